#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xids/nn/spec.hpp"
#include "xids/nn/tensor.hpp"
#include "xids/random.hpp"

namespace xids::nn {

enum class Mode { Train, Infer };

// (steps, channels) of a per-sample tensor.
struct Shape {
  Index steps = 0;
  Index channels = 0;
};

// Whatever a layer keeps from forward() for its backward pass.
template <class S>
struct LayerCache {
  void record(const Tensor<S>& x) {
    filled = true;
    batch = x.batch;
    steps = x.steps;
    channels = x.channels;
  }

  bool filled = false;
  Index batch = 0;  // input shape
  Index steps = 0;
  Index channels = 0;
  std::vector<Mat<S>> mats;
  std::vector<Index> indices;
};

// ---------------------------------------------------------------------------
// Activations

template <class S>
Mat<S> activate(Activation act, const Mat<S>& z) {
  switch (act) {
    case Activation::Linear:
      return z;
    case Activation::Relu:
      return z.cwiseMax(S(0));
    case Activation::Sigmoid:
      return z.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
    case Activation::Tanh:
      return z.array().tanh().matrix();
  }
  return z;
}

template <class S>
void activate_inplace(Activation act, Mat<S>& z) {
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::Relu:
      z = z.cwiseMax(S(0));
      return;
    case Activation::Sigmoid:
    case Activation::Tanh:
      z = activate(act, z);
      return;
  }
}

// grad * f'(z), with `a` = f(z).
template <class S>
Mat<S> activation_backward(Activation act, const Mat<S>& z, const Mat<S>& a, const Mat<S>& grad) {
  switch (act) {
    case Activation::Linear:
      return grad;
    case Activation::Relu:
      return (z.array() > S(0)).select(grad, S(0));
    case Activation::Sigmoid:
      return (grad.array() * a.array() * (S(1) - a.array())).matrix();
    case Activation::Tanh:
      return (grad.array() * (S(1) - a.array().square())).matrix();
  }
  return grad;
}

template <class S>
S sigmoid(S v) {
  return S(1) / (S(1) + std::exp(-v));
}

// ---------------------------------------------------------------------------
// Glorot-uniform initialisation: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).

template <class S>
void glorot_uniform(Mat<S>& w, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(uniform(rng, -limit, limit));
}

// ---------------------------------------------------------------------------
// Layer interface

template <class S>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual Shape output_shape(Shape in) const = 0;

  // `rng` is required in train mode by stochastic layers. When `cache` is
  // non-null the layer records what backward() needs.
  virtual Tensor<S> forward(const Tensor<S>& x, Mode mode, Rng* rng, LayerCache<S>* cache) const = 0;

  // Returns dL/dinput and writes dL/dparam into `grads` (same order and
  // shapes as params()).
  virtual Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache,
                             std::span<Mat<S>> grads) const = 0;

  virtual std::vector<std::string> param_names() const { return {}; }

  std::vector<Mat<S>>& params() { return params_; }
  const std::vector<Mat<S>>& params() const { return params_; }

 protected:
  std::vector<Mat<S>> params_;
};

// ---------------------------------------------------------------------------
// Conv1D

struct ConvGeometry {
  Index out_length = 0;
  Index pad_left = 0;
};

inline ConvGeometry conv_geometry(Index length, Index kernel_width, Index stride, Padding padding) {
  if (kernel_width < 1 || stride < 1) throw ShapeMismatch("kernel width and stride must be positive");
  ConvGeometry g;
  if (padding == Padding::Same) {
    g.out_length = (length + stride - 1) / stride;
    const Index pad_total = std::max<Index>((g.out_length - 1) * stride + kernel_width - length, 0);
    g.pad_left = pad_total / 2;
  } else {
    if (kernel_width > length) {
      throw ShapeMismatch("kernel width " + std::to_string(kernel_width) + " exceeds input length " +
                          std::to_string(length));
    }
    g.out_length = (length - kernel_width) / stride + 1;
  }
  return g;
}

// Patch matrix of a batch: row (n, t) holds the K x C window feeding output
// position t of sample n, flattened as k * C + c. Out-of-range taps are 0.
template <class S>
Mat<S> im2col(const Tensor<S>& x, Index kernel_width, Index stride, const ConvGeometry& g) {
  const Index c = x.channels;
  Mat<S> patches(x.batch * g.out_length, kernel_width * c);
  if (stride == 1) {
    // Each tap k is a shifted copy of the sample's rows.
    patches.setZero();
    for (Index k = 0; k < kernel_width; ++k) {
      const Index t0 = std::max<Index>(0, g.pad_left - k);
      const Index t1 = std::min<Index>(g.out_length, x.steps + g.pad_left - k);
      if (t1 <= t0) continue;
      for (Index n = 0; n < x.batch; ++n) {
        patches.block(n * g.out_length + t0, k * c, t1 - t0, c) =
            x.values.middleRows(n * x.steps + t0 + k - g.pad_left, t1 - t0);
      }
    }
    return patches;
  }
  patches.setZero();
  for (Index n = 0; n < x.batch; ++n) {
    for (Index t = 0; t < g.out_length; ++t) {
      const Index row = n * g.out_length + t;
      for (Index k = 0; k < kernel_width; ++k) {
        const Index src = t * stride + k - g.pad_left;
        if (src < 0 || src >= x.steps) continue;
        patches.row(row).segment(k * c, c) = x.values.row(n * x.steps + src);
      }
    }
  }
  return patches;
}

// Single-sequence cross-correlation. `input` is L x C, `kernel` is (K * C) x F
// with row k * C + c, `bias` has F entries. Returns L_out x F.
template <class S>
Mat<S> conv1d_forward(const Mat<S>& input, const Mat<S>& kernel, const RowVec<S>& bias, Index kernel_width,
                      Index stride, Padding padding) {
  if (kernel.rows() != kernel_width * input.cols() || bias.size() != kernel.cols()) {
    throw ShapeMismatch("conv1d kernel/bias shape does not match input channels");
  }
  const Tensor<S> x(1, input.rows(), input.cols(), input);
  const ConvGeometry g = conv_geometry(input.rows(), kernel_width, stride, padding);
  Mat<S> out = im2col(x, kernel_width, stride, g) * kernel;
  out.rowwise() += bias;
  return out;
}

template <class S>
class Conv1DLayer final : public Layer<S> {
 public:
  Conv1DLayer(const Conv1DSpec& spec, Shape in, Rng& rng) : spec_(spec), in_(in) {
    const Index rows = spec.kernel_width * in.channels;
    Mat<S> w(rows, spec.filters);
    glorot_uniform(w, rows, static_cast<Index>(spec.kernel_width) * spec.filters, rng);
    this->params_ = {std::move(w), Mat<S>::Zero(1, spec.filters)};
    geometry_ = conv_geometry(in.steps, spec.kernel_width, spec.stride, spec.padding);
  }

  std::string_view kind() const override { return "Conv1D"; }
  Shape output_shape(Shape) const override { return {geometry_.out_length, spec_.filters}; }
  std::vector<std::string> param_names() const override { return {"kernel", "bias"}; }

  Tensor<S> forward(const Tensor<S>& x, Mode, Rng*, LayerCache<S>* cache) const override {
    Mat<S> patches = im2col(x, spec_.kernel_width, spec_.stride, geometry_);
    Mat<S> z(patches.rows(), spec_.filters);
    z.noalias() = patches * this->params_[0];
    z.rowwise() += this->params_[1].row(0);
    if (!cache) {
      activate_inplace(spec_.activation, z);
      return Tensor<S>(x.batch, geometry_.out_length, spec_.filters, std::move(z));
    }
    Mat<S> a = activate(spec_.activation, z);
    Tensor<S> out(x.batch, geometry_.out_length, spec_.filters, a);
    {
      cache->record(x);
      cache->mats = {std::move(patches), std::move(z), std::move(a)};
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache,
                     std::span<Mat<S>> grads) const override {
    const Mat<S>& patches = cache.mats[0];
    const Mat<S> dz = activation_backward(spec_.activation, cache.mats[1], cache.mats[2], grad_out.values);
    grads[0].noalias() = patches.transpose() * dz;
    grads[1] = dz.colwise().sum();
    const Mat<S> dpatches = dz * this->params_[0].transpose();

    const Index batch = cache.batch;
    const Index steps = cache.steps;
    const Index c = cache.channels;
    Tensor<S> dx(batch, steps, c);
    dx.values.setZero();
    for (Index n = 0; n < batch; ++n) {
      for (Index t = 0; t < geometry_.out_length; ++t) {
        const Index row = n * geometry_.out_length + t;
        for (Index k = 0; k < spec_.kernel_width; ++k) {
          const Index src = t * spec_.stride + k - geometry_.pad_left;
          if (src < 0 || src >= steps) continue;
          dx.values.row(n * steps + src) += dpatches.row(row).segment(k * c, c);
        }
      }
    }
    return dx;
  }

 private:
  Conv1DSpec spec_;
  Shape in_;
  ConvGeometry geometry_;
};

// ---------------------------------------------------------------------------
// MaxPool1D (valid windows; ties go to the earliest position)

template <class S>
class MaxPool1DLayer final : public Layer<S> {
 public:
  MaxPool1DLayer(const MaxPool1DSpec& spec, Shape in) : spec_(spec) {
    if (spec.window > in.steps) throw ShapeMismatch("pool window exceeds input length");
    out_steps_ = (in.steps - spec.window) / spec.stride + 1;
  }

  std::string_view kind() const override { return "MaxPool1D"; }
  Shape output_shape(Shape in) const override { return {out_steps_, in.channels}; }

  Tensor<S> forward(const Tensor<S>& x, Mode, Rng*, LayerCache<S>* cache) const override {
    Tensor<S> out(x.batch, out_steps_, x.channels);
    if (!cache) {
      for (Index n = 0; n < x.batch; ++n) {
        for (Index t = 0; t < out_steps_; ++t) {
          const Index base = n * x.steps + t * spec_.stride;
          auto o = out.values.row(n * out_steps_ + t);
          o = x.values.row(base);
          for (Index w = 1; w < spec_.window; ++w) o = o.cwiseMax(x.values.row(base + w));
        }
      }
      return out;
    }
    std::vector<Index> argmax;
    if (cache) argmax.resize(static_cast<std::size_t>(out.values.size()));
    for (Index n = 0; n < x.batch; ++n) {
      for (Index t = 0; t < out_steps_; ++t) {
        const Index orow = n * out_steps_ + t;
        for (Index ch = 0; ch < x.channels; ++ch) {
          Index best = n * x.steps + t * spec_.stride;
          for (Index w = 1; w < spec_.window; ++w) {
            const Index r = n * x.steps + t * spec_.stride + w;
            if (x.values(r, ch) > x.values(best, ch)) best = r;
          }
          out.values(orow, ch) = x.values(best, ch);
          if (cache) argmax[static_cast<std::size_t>(orow * x.channels + ch)] = best;
        }
      }
    }
    if (cache) {
      cache->record(x);
      cache->indices = std::move(argmax);
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache, std::span<Mat<S>>) const override {
    Tensor<S> dx(cache.batch, cache.steps, cache.channels);
    dx.values.setZero();
    for (Index r = 0; r < grad_out.values.rows(); ++r) {
      for (Index ch = 0; ch < grad_out.channels; ++ch) {
        dx.values(cache.indices[static_cast<std::size_t>(r * grad_out.channels + ch)], ch) += grad_out.values(r, ch);
      }
    }
    return dx;
  }

 private:
  MaxPool1DSpec spec_;
  Index out_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Dense (flattens steps x channels)

template <class S>
class DenseLayer final : public Layer<S> {
 public:
  DenseLayer(const DenseSpec& spec, Shape in, Rng& rng) : spec_(spec) {
    const Index fan_in = in.steps * in.channels;
    Mat<S> w(fan_in, spec.units);
    glorot_uniform(w, fan_in, spec.units, rng);
    this->params_ = {std::move(w), Mat<S>::Zero(1, spec.units)};
  }

  std::string_view kind() const override { return "Dense"; }
  Shape output_shape(Shape) const override { return {1, spec_.units}; }
  std::vector<std::string> param_names() const override { return {"kernel", "bias"}; }

  Tensor<S> forward(const Tensor<S>& x, Mode, Rng*, LayerCache<S>* cache) const override {
    Mat<S> z(x.batch, spec_.units);
    z.noalias() = x.flat() * this->params_[0];
    z.rowwise() += this->params_[1].row(0);
    if (!cache) {
      activate_inplace(spec_.activation, z);
      return Tensor<S>(x.batch, 1, spec_.units, std::move(z));
    }
    Mat<S> a = activate(spec_.activation, z);
    Tensor<S> out(x.batch, 1, spec_.units, a);
    {
      cache->record(x);
      cache->mats = {std::move(z), std::move(a), x.flat()};
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache,
                     std::span<Mat<S>> grads) const override {
    const Mat<S> dz = activation_backward(spec_.activation, cache.mats[0], cache.mats[1], grad_out.values);
    grads[0].noalias() = cache.mats[2].transpose() * dz;
    grads[1] = dz.colwise().sum();
    Tensor<S> dx(cache.batch, cache.steps, cache.channels);
    dx.flat().noalias() = dz * this->params_[0].transpose();
    return dx;
  }

 private:
  DenseSpec spec_;
};

// ---------------------------------------------------------------------------
// LSTM

// Column blocks of the stacked gate matrices.
enum class Gate : Index { Forget = 0, Input = 1, Output = 2, Candidate = 3 };

// W is C x 4H, U is H x 4H, b is 1 x 4H; gate g occupies columns
// [g * H, (g + 1) * H).
template <class S>
struct LstmParams {
  Mat<S> W;
  Mat<S> U;
  RowVec<S> b;

  Index hidden() const { return U.rows(); }
  auto W_gate(Gate g) const { return W.middleCols(static_cast<Index>(g) * hidden(), hidden()); }
  auto U_gate(Gate g) const { return U.middleCols(static_cast<Index>(g) * hidden(), hidden()); }
  auto b_gate(Gate g) const { return b.segment(static_cast<Index>(g) * hidden(), hidden()); }
};

template <class S>
struct LstmState {
  RowVec<S> h;
  RowVec<S> c;
};

// Batched gate values for one time step; each matrix is N x H.
template <class S>
struct LstmStep {
  Mat<S> f, i, o, g, c, tanh_c, h;
};

template <class S>
LstmStep<S> lstm_cell(const Mat<S>& x, const Mat<S>& h_prev, const Mat<S>& c_prev, const Mat<S>& W,
                      const Mat<S>& U, const RowVec<S>& b) {
  const Index H = U.rows();
  if (W.rows() != x.cols() || W.cols() != 4 * H || U.cols() != 4 * H || b.size() != 4 * H ||
      h_prev.cols() != H || c_prev.cols() != H) {
    throw ShapeMismatch("lstm parameter shapes do not match input/state");
  }
  Mat<S> z = x * W + h_prev * U;
  z.rowwise() += b;
  LstmStep<S> s;
  const auto sig = [](S v) { return sigmoid(v); };
  s.f = z.middleCols(0, H).unaryExpr(sig);
  s.i = z.middleCols(H, H).unaryExpr(sig);
  s.o = z.middleCols(2 * H, H).unaryExpr(sig);
  s.g = z.middleCols(3 * H, H).array().tanh().matrix();
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tanh_c.array()).matrix();
  return s;
}

// One recurrence step for a single sample.
template <class S>
LstmState<S> lstm_step(const RowVec<S>& x, const LstmState<S>& state, const LstmParams<S>& p) {
  const LstmStep<S> s = lstm_cell<S>(x, state.h, state.c, p.W, p.U, p.b);
  return {s.h.row(0), s.c.row(0)};
}

template <class S>
class LstmLayer final : public Layer<S> {
 public:
  LstmLayer(const LstmSpec& spec, Shape in, Rng& rng) : spec_(spec), in_(in) {
    const Index H = spec.hidden_units;
    Mat<S> w(in.channels, 4 * H);
    Mat<S> u(H, 4 * H);
    glorot_uniform(w, in.channels, 4 * H, rng);
    glorot_uniform(u, H, 4 * H, rng);
    Mat<S> b = Mat<S>::Zero(1, 4 * H);
    b.middleCols(0, H).setOnes();  // unit forget bias
    this->params_ = {std::move(w), std::move(u), std::move(b)};
  }

  std::string_view kind() const override { return "LSTM"; }
  Shape output_shape(Shape in) const override {
    return {spec_.return_sequences ? in.steps : 1, spec_.hidden_units};
  }
  std::vector<std::string> param_names() const override { return {"W", "U", "b"}; }

  LstmParams<S> cell_params() const { return {this->params_[0], this->params_[1], this->params_[2].row(0)}; }

  Tensor<S> forward(const Tensor<S>& x, Mode, Rng*, LayerCache<S>* cache) const override {
    const Index N = x.batch;
    const Index T = x.steps;
    const Index H = spec_.hidden_units;
    const Mat<S>& W = this->params_[0];
    const Mat<S>& U = this->params_[1];
    const RowVec<S> b = this->params_[2].row(0);

    Mat<S> h = Mat<S>::Zero(N, H);
    Mat<S> c = Mat<S>::Zero(N, H);
    Tensor<S> out(N, spec_.return_sequences ? T : 1, H);
    if (cache) {
      cache->record(x);
      cache->mats.clear();
      cache->mats.reserve(static_cast<std::size_t>(T) * 8);
    }
    for (Index t = 0; t < T; ++t) {
      Mat<S> xt(N, x.channels);
      for (Index n = 0; n < N; ++n) xt.row(n) = x.values.row(n * T + t);
      LstmStep<S> s = lstm_cell<S>(xt, h, c, W, U, b);
      if (spec_.return_sequences) {
        for (Index n = 0; n < N; ++n) out.values.row(n * T + t) = s.h.row(n);
      }
      if (cache) {
        cache->mats.push_back(std::move(xt));
        cache->mats.push_back(h);
        cache->mats.push_back(c);
        cache->mats.push_back(s.f);
        cache->mats.push_back(s.i);
        cache->mats.push_back(s.o);
        cache->mats.push_back(s.g);
        cache->mats.push_back(s.tanh_c);
      }
      h = std::move(s.h);
      c = std::move(s.c);
    }
    if (!spec_.return_sequences) out.values = h;
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache,
                     std::span<Mat<S>> grads) const override {
    const Index N = cache.batch;
    const Index T = cache.steps;
    const Index C = cache.channels;
    const Index H = spec_.hidden_units;
    const Mat<S>& W = this->params_[0];
    const Mat<S>& U = this->params_[1];

    grads[0] = Mat<S>::Zero(C, 4 * H);
    grads[1] = Mat<S>::Zero(H, 4 * H);
    grads[2] = Mat<S>::Zero(1, 4 * H);
    Tensor<S> dx(N, T, C);

    Mat<S> dh_next = Mat<S>::Zero(N, H);
    Mat<S> dc_next = Mat<S>::Zero(N, H);
    Mat<S> dz(N, 4 * H);
    for (Index t = T - 1; t >= 0; --t) {
      const auto base = static_cast<std::size_t>(t) * 8;
      const Mat<S>& xt = cache.mats[base + 0];
      const Mat<S>& h_prev = cache.mats[base + 1];
      const Mat<S>& c_prev = cache.mats[base + 2];
      const Mat<S>& f = cache.mats[base + 3];
      const Mat<S>& i = cache.mats[base + 4];
      const Mat<S>& o = cache.mats[base + 5];
      const Mat<S>& g = cache.mats[base + 6];
      const Mat<S>& tanh_c = cache.mats[base + 7];

      Mat<S> dh = dh_next;
      if (spec_.return_sequences) {
        for (Index n = 0; n < N; ++n) dh.row(n) += grad_out.values.row(n * T + t);
      } else if (t == T - 1) {
        dh += grad_out.values;
      }
      const auto dc = (dh.array() * o.array() * (S(1) - tanh_c.array().square()) + dc_next.array()).eval();
      dz.middleCols(0, H) = (dc * c_prev.array() * f.array() * (S(1) - f.array())).matrix();
      dz.middleCols(H, H) = (dc * g.array() * i.array() * (S(1) - i.array())).matrix();
      dz.middleCols(2 * H, H) = (dh.array() * tanh_c.array() * o.array() * (S(1) - o.array())).matrix();
      dz.middleCols(3 * H, H) = (dc * i.array() * (S(1) - g.array().square())).matrix();
      dc_next = (dc * f.array()).matrix();

      grads[0].noalias() += xt.transpose() * dz;
      grads[1].noalias() += h_prev.transpose() * dz;
      grads[2] += dz.colwise().sum();
      const Mat<S> dxt = dz * W.transpose();
      for (Index n = 0; n < N; ++n) dx.values.row(n * T + t) = dxt.row(n);
      dh_next.noalias() = dz * U.transpose();
    }
    return dx;
  }

 private:
  LstmSpec spec_;
  Shape in_;
};

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled by 1 / (1 - rate), identity at inference)

template <class S>
class DropoutLayer final : public Layer<S> {
 public:
  explicit DropoutLayer(const DropoutSpec& spec) : spec_(spec) {}

  std::string_view kind() const override { return "Dropout"; }
  Shape output_shape(Shape in) const override { return in; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode, Rng* rng, LayerCache<S>* cache) const override {
    if (cache) {
      cache->record(x);
      cache->mats.clear();
    }
    if (mode == Mode::Infer || spec_.rate <= 0.0) return x;
    if (rng == nullptr) throw InvalidSpec("dropout in train mode needs a random generator");
    const double keep = 1.0 - spec_.rate;
    const S scale = static_cast<S>(1.0 / keep);
    Mat<S> mask(x.values.rows(), x.values.cols());
    for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = uniform01(*rng) < keep ? scale : S(0);
    Tensor<S> out(x.batch, x.steps, x.channels, x.values.cwiseProduct(mask));
    if (cache) cache->mats = {std::move(mask)};
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache, std::span<Mat<S>>) const override {
    if (cache.mats.empty()) return grad_out;
    return Tensor<S>(grad_out.batch, grad_out.steps, grad_out.channels, grad_out.values.cwiseProduct(cache.mats[0]));
  }

 private:
  DropoutSpec spec_;
};

// ---------------------------------------------------------------------------
// Softmax over channels (max-shifted)

template <class S>
Mat<S> softmax_rows(const Mat<S>& z) {
  Mat<S> p = z.colwise() - z.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.array().rowwise().sum();
  return p;
}

template <class S>
class SoftmaxLayer final : public Layer<S> {
 public:
  std::string_view kind() const override { return "Softmax"; }
  Shape output_shape(Shape in) const override { return in; }

  Tensor<S> forward(const Tensor<S>& x, Mode, Rng*, LayerCache<S>* cache) const override {
    Tensor<S> out(x.batch, x.steps, x.channels, softmax_rows<S>(x.values));
    if (cache) {
      cache->record(x);
      cache->mats = {out.values};
    }
    return out;
  }

  Tensor<S> backward(const Tensor<S>& grad_out, const LayerCache<S>& cache, std::span<Mat<S>>) const override {
    const Mat<S>& p = cache.mats[0];
    const auto dot = (grad_out.values.array() * p.array()).rowwise().sum().eval();
    Mat<S> dx = (p.array() * (grad_out.values.array().colwise() - dot)).matrix();
    return Tensor<S>(grad_out.batch, grad_out.steps, grad_out.channels, std::move(dx));
  }
};

}  // namespace xids::nn
