#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "xids/nn/tensor.hpp"

namespace xids::nn {

XIDS_DEFINE_ERROR(InvalidTarget);

// Probabilities are floored here before taking the log.
inline constexpr double kProbFloor = 1e-12;

enum class LossKind { SparseCategorical, Categorical };

namespace detail {

template <class S>
void check_targets(const Mat<S>& probs, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != probs.rows()) {
    throw InvalidTarget(std::to_string(targets.size()) + " targets for " + std::to_string(probs.rows()) + " rows");
  }
  for (const int t : targets) {
    if (t < 0 || t >= probs.cols()) throw InvalidTarget("target " + std::to_string(t) + " out of range");
  }
}

}  // namespace detail

template <class S>
Mat<S> one_hot(std::span<const int> targets, Index classes) {
  Mat<S> y = Mat<S>::Zero(static_cast<Index>(targets.size()), classes);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || targets[r] >= classes) throw InvalidTarget("target out of range");
    y(static_cast<Index>(r), targets[r]) = S(1);
  }
  return y;
}

// -mean(log p[target])
template <class S>
S sparse_cross_entropy(const Mat<S>& probs, std::span<const int> targets) {
  detail::check_targets(probs, targets);
  if (probs.rows() == 0) return S(0);
  S total = 0;
  for (Index r = 0; r < probs.rows(); ++r) {
    total -= std::log(std::max<S>(probs(r, targets[static_cast<std::size_t>(r)]), S(kProbFloor)));
  }
  return total / static_cast<S>(probs.rows());
}

// dL/dprobs of sparse_cross_entropy; zero where the floor is active.
template <class S>
Mat<S> sparse_cross_entropy_grad(const Mat<S>& probs, std::span<const int> targets) {
  detail::check_targets(probs, targets);
  Mat<S> g = Mat<S>::Zero(probs.rows(), probs.cols());
  const S inv_n = S(1) / static_cast<S>(std::max<Index>(probs.rows(), 1));
  for (Index r = 0; r < probs.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    const S p = probs(r, t);
    if (p > S(kProbFloor)) g(r, t) = -inv_n / p;
  }
  return g;
}

// -mean(sum_k y_k log p_k) for one-hot (or soft) targets.
template <class S>
S categorical_cross_entropy(const Mat<S>& probs, const Mat<S>& targets) {
  if (targets.rows() != probs.rows() || targets.cols() != probs.cols()) {
    throw InvalidTarget("target matrix shape differs from probabilities");
  }
  if (probs.rows() == 0) return S(0);
  const auto logp = probs.array().max(S(kProbFloor)).log();
  return -(targets.array() * logp).sum() / static_cast<S>(probs.rows());
}

template <class S>
Mat<S> categorical_cross_entropy_grad(const Mat<S>& probs, const Mat<S>& targets) {
  if (targets.rows() != probs.rows() || targets.cols() != probs.cols()) {
    throw InvalidTarget("target matrix shape differs from probabilities");
  }
  const S inv_n = S(1) / static_cast<S>(std::max<Index>(probs.rows(), 1));
  return (probs.array() > S(kProbFloor))
      .select(-inv_n * targets.array() / probs.array().max(S(kProbFloor)), S(0))
      .matrix();
}

}  // namespace xids::nn
