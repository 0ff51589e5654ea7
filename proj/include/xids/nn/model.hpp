#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "xids/nn/layers.hpp"
#include "xids/nn/spec.hpp"

namespace xids::nn {

// A feed-forward stack of layers built from a ModelSpec. Parameters are
// owned by the layers; forward() is const and safe to call concurrently in
// infer mode.
template <class S>
class Sequential {
 public:
  struct Cache {
    std::vector<LayerCache<S>> layers;
  };

  Sequential(ModelSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)), init_seed_(init_seed) {
    spec_.validate();
    Rng rng(init_seed);
    Shape shape{spec_.input_steps, spec_.input_channels};
    for (const LayerSpec& ls : spec_.layers) {
      std::unique_ptr<Layer<S>> layer = std::visit(
          [&](const auto& s) -> std::unique_ptr<Layer<S>> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Conv1DSpec>) return std::make_unique<Conv1DLayer<S>>(s, shape, rng);
            if constexpr (std::is_same_v<T, MaxPool1DSpec>) return std::make_unique<MaxPool1DLayer<S>>(s, shape);
            if constexpr (std::is_same_v<T, DenseSpec>) return std::make_unique<DenseLayer<S>>(s, shape, rng);
            if constexpr (std::is_same_v<T, LstmSpec>) return std::make_unique<LstmLayer<S>>(s, shape, rng);
            if constexpr (std::is_same_v<T, DropoutSpec>) return std::make_unique<DropoutLayer<S>>(s);
            if constexpr (std::is_same_v<T, SoftmaxSpec>) return std::make_unique<SoftmaxLayer<S>>();
          },
          ls);
      shape = layer->output_shape(shape);
      layers_.push_back(std::move(layer));
    }
    output_shape_ = shape;
    if (output_shape_.steps * output_shape_.channels != spec_.output_classes) {
      throw InvalidSpec("model output has " + std::to_string(output_shape_.steps * output_shape_.channels) +
                        " values per sample, expected " + std::to_string(spec_.output_classes));
    }
  }

  Sequential(const Sequential& other) : Sequential(other.spec_, other.init_seed_) { copy_params_from(other); }
  Sequential& operator=(const Sequential&) = delete;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer<S>& layer(std::size_t i) const { return *layers_[i]; }
  Layer<S>& layer(std::size_t i) { return *layers_[i]; }

  // Output is (N, 1, classes) holding per-row class probabilities when the
  // spec ends in Softmax.
  Tensor<S> forward(const Tensor<S>& x, Mode mode, Rng* rng = nullptr, Cache* cache = nullptr) const {
    if (x.steps != spec_.input_steps || x.channels != spec_.input_channels) {
      throw ShapeMismatch("input is (" + std::to_string(x.steps) + ", " + std::to_string(x.channels) +
                          ") per sample, model expects (" + std::to_string(spec_.input_steps) + ", " +
                          std::to_string(spec_.input_channels) + ")");
    }
    if (cache) cache->layers.assign(layers_.size(), LayerCache<S>{});
    Tensor<S> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i]->forward(h, mode, rng, cache ? &cache->layers[i] : nullptr);
      if (!h.values.allFinite()) {
        throw NonFiniteActivation("layer " + std::to_string(i) + " (" + std::string(layers_[i]->kind()) + ")");
      }
    }
    if (h.steps == 1) return h;
    return Tensor<S>(h.batch, 1, h.steps * h.channels, Mat<S>(h.flat()));
  }

  // N x classes probabilities in infer mode, evaluated in chunks of
  // `chunk` samples. Small chunks keep the intermediates in cache.
  Mat<S> predict_proba(const Tensor<S>& x, Index chunk = 64) const {
    Mat<S> out(x.batch, spec_.output_classes);
    for (Index start = 0; start < x.batch; start += chunk) {
      const Index n = std::min(chunk, x.batch - start);
      const Tensor<S> part(n, x.steps, x.channels, x.values.middleRows(start * x.steps, n * x.steps));
      out.middleRows(start, n) = forward(part, Mode::Infer).values;
    }
    return out;
  }

  // Gradients of the loss w.r.t. every parameter, given dL/doutput, in
  // parameters() order.
  std::vector<Mat<S>> backward(const Cache& cache, const Mat<S>& grad_output) const {
    if (cache.layers.size() != layers_.size()) throw MissingCache("forward() was not run with a cache");
    for (const auto& lc : cache.layers) {
      if (!lc.filled) throw MissingCache("incomplete forward cache");
    }
    std::vector<std::vector<Mat<S>>> per_layer(layers_.size());
    const Shape out = output_shape_;
    Tensor<S> grad(grad_output.rows(), out.steps, out.channels,
                   Eigen::Map<const Mat<S>>(grad_output.data(), grad_output.rows() * out.steps, out.channels));
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& params = layers_[i]->params();
      per_layer[i].resize(params.size());
      for (std::size_t k = 0; k < params.size(); ++k) per_layer[i][k].resize(params[k].rows(), params[k].cols());
      grad = layers_[i]->backward(grad, cache.layers[i], per_layer[i]);
    }
    std::vector<Mat<S>> flat;
    for (auto& g : per_layer) {
      for (auto& m : g) flat.push_back(std::move(m));
    }
    return flat;
  }

  std::vector<Mat<S>*> parameters() {
    std::vector<Mat<S>*> out;
    for (auto& l : layers_) {
      for (auto& p : l->params()) out.push_back(&p);
    }
    return out;
  }

  std::vector<const Mat<S>*> parameters() const {
    std::vector<const Mat<S>*> out;
    for (const auto& l : layers_) {
      for (const auto& p : l->params()) out.push_back(&p);
    }
    return out;
  }

  // "<layer index>.<kind>.<param name>" per parameter tensor.
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (const auto& n : layers_[i]->param_names()) {
        out.push_back(std::to_string(i) + "." + std::string(layers_[i]->kind()) + "." + n);
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  template <class T>
  void copy_params_from(const Sequential<T>& other) {
    auto dst = parameters();
    const auto src = other.parameters();
    if (dst.size() != src.size()) throw ShapeMismatch("parameter lists differ");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i]->rows() != src[i]->rows() || dst[i]->cols() != src[i]->cols()) {
        throw ShapeMismatch("parameter " + std::to_string(i) + " shape differs");
      }
      *dst[i] = src[i]->template cast<S>();
    }
  }

 private:
  ModelSpec spec_;
  std::uint64_t init_seed_ = 0;
  std::vector<std::unique_ptr<Layer<S>>> layers_;
  Shape output_shape_;
};

// Row-wise argmax; ties resolve to the lowest class index.
template <class Derived>
std::vector<int> predict_class(const Eigen::MatrixBase<Derived>& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace xids::nn
