#pragma once

#include <memory>

#include "xids/explain/shapley.hpp"
#include "xids/nn/model.hpp"

namespace xids::explain {

// Wraps a model as a flat-feature ModelFn: each input row is laid out as the
// model's (steps, channels) sample, so the same explainer serves every
// family. Evaluation runs in scalar type S.
template <class S>
ModelFn model_fn(std::shared_ptr<const nn::Sequential<S>> model) {
  return [model](const Eigen::MatrixXd& rows) -> Eigen::MatrixXd {
    const auto& spec = model->spec();
    if (rows.cols() != spec.input_steps * spec.input_channels) {
      throw ShapeMismatch("rows have " + std::to_string(rows.cols()) + " features, model takes " +
                          std::to_string(spec.input_steps * spec.input_channels));
    }
    const nn::Mat<S> flat = rows.cast<S>();
    nn::Tensor<S> x(rows.rows(), spec.input_steps, spec.input_channels,
                    Eigen::Map<const nn::Mat<S>>(flat.data(), rows.rows() * spec.input_steps, spec.input_channels));
    return model->predict_proba(x).template cast<double>();
  };
}

}  // namespace xids::explain
