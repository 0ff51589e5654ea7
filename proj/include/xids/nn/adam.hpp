#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "xids/nn/tensor.hpp"

namespace xids::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class S>
struct AdamState {
  std::vector<Mat<S>> m;
  std::vector<Mat<S>> v;
  long long t = 0;
};

// One Adam step with bias correction:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
// Moment tensors are created on the first call.
template <class S>
void adam_update(std::span<Mat<S>* const> params, std::span<const Mat<S>> grads, AdamState<S>& state,
                 const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeMismatch("parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const Mat<S>* p : params) {
      state.m.push_back(Mat<S>::Zero(p->rows(), p->cols()));
      state.v.push_back(Mat<S>::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("adam state does not match parameters");

  ++state.t;
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S c1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(state.t)));
  const S c2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(state.t)));
  const S lr = static_cast<S>(cfg.learning_rate);
  const S eps = static_cast<S>(cfg.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat<S>& p = *params[k];
    const Mat<S>& g = grads[k];
    if (g.rows() != p.rows() || g.cols() != p.cols() || state.m[k].rows() != p.rows() ||
        state.m[k].cols() != p.cols()) {
      throw ShapeMismatch("gradient " + std::to_string(k) + " shape differs from its parameter");
    }
    state.m[k] = b1 * state.m[k] + (S(1) - b1) * g;
    state.v[k] = b2 * state.v[k] + (S(1) - b2) * g.cwiseAbs2();
    p.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + eps);
  }
}

}  // namespace xids::nn
