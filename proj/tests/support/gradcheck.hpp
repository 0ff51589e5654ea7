#pragma once

// Central finite-difference check of Sequential<double>::backward.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "xids/nn/train.hpp"

namespace xids::testing {

using nn::Index;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // parameter name and flat index of the worst entry
  std::size_t checked = 0;
};

// |a - n| / max(|a| + |n|, floor). The floor keeps entries whose true
// gradient is ~0 from being judged on rounding noise alone.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

inline double batch_loss(const nn::Sequential<double>& model, const nn::Tensor<double>& x, std::span<const int> y,
                         nn::LossKind loss, nn::Mode mode, std::uint64_t dropout_seed) {
  Rng rng(dropout_seed);
  const nn::Mat<double> p = model.forward(x, mode, &rng).values;
  if (loss == nn::LossKind::SparseCategorical) return nn::sparse_cross_entropy<double>(p, y);
  return nn::categorical_cross_entropy<double>(p, nn::one_hot<double>(y, p.cols()));
}

// Checks every parameter entry, or `per_tensor` randomly chosen entries of
// each tensor when that is smaller than the tensor.
inline GradCheckResult gradient_check(nn::Sequential<double>& model, const nn::Tensor<double>& x,
                                      std::span<const int> y, nn::LossKind loss, nn::Mode mode,
                                      std::uint64_t dropout_seed = 1,
                                      std::size_t per_tensor = std::numeric_limits<std::size_t>::max(),
                                      std::uint64_t pick_seed = 0, double h = 1e-5) {
  Rng rng(dropout_seed);
  const auto analytic = nn::loss_and_gradients(model, x, y, loss, mode, &rng).grads;
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  Rng pick(pick_seed);
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Mat<double>& p = *params[k];
    std::vector<Index> entries;
    if (static_cast<std::size_t>(p.size()) <= per_tensor) {
      for (Index i = 0; i < p.size(); ++i) entries.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_tensor; ++i) {
        entries.push_back(static_cast<Index>(bounded(pick, static_cast<std::uint64_t>(p.size()))));
      }
    }
    for (const Index i : entries) {
      const double saved = p.data()[i];
      p.data()[i] = saved + h;
      const double up = batch_loss(model, x, y, loss, mode, dropout_seed);
      p.data()[i] = saved - h;
      const double down = batch_loss(model, x, y, loss, mode, dropout_seed);
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[k].data()[i], numeric);
      ++r.checked;
      if (err >= r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = names[k] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

// Fills every parameter (biases included) with U(-scale, scale).
inline void randomize_parameters(nn::Sequential<double>& model, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (auto* p : model.parameters()) {
    for (Index i = 0; i < p->size(); ++i) p->data()[i] = uniform(rng, -scale, scale);
  }
}

inline nn::Tensor<double> random_tensor(Index batch, Index steps, Index channels, std::uint64_t seed) {
  Rng rng(seed);
  nn::Tensor<double> t(batch, steps, channels);
  for (Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = uniform(rng, -1.0, 1.0);
  return t;
}

inline std::vector<int> random_labels(std::size_t n, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(classes)));
  return y;
}

}  // namespace xids::testing
