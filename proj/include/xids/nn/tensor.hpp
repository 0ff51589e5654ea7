#pragma once

#include <Eigen/Core>

#include "xids/error.hpp"

namespace xids::nn {

using Eigen::Index;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

XIDS_DEFINE_ERROR(NonFiniteActivation);
XIDS_DEFINE_ERROR(MissingCache);

// Batch of sequences, shape (batch, steps, channels), stored row-major as a
// (batch * steps) x channels matrix so that element (n, t, c) sits at flat
// offset (n * steps + t) * channels + c.
template <class S>
struct Tensor {
  Index batch = 0;
  Index steps = 0;
  Index channels = 0;
  Mat<S> values;

  Tensor() = default;
  Tensor(Index b, Index t, Index c) : batch(b), steps(t), channels(c), values(b * t, c) {}
  Tensor(Index b, Index t, Index c, Mat<S> v) : batch(b), steps(t), channels(c), values(std::move(v)) {
    if (values.rows() != b * t || values.cols() != c) throw ShapeMismatch("tensor payload does not match shape");
  }

  Index size() const { return values.size(); }

  // batch x (steps * channels) view of the same storage.
  Eigen::Map<const Mat<S>> flat() const { return {values.data(), batch, steps * channels}; }
  Eigen::Map<Mat<S>> flat() { return {values.data(), batch, steps * channels}; }

  // Gathers the samples listed in `rows` into a new tensor.
  template <class Indices>
  Tensor gather(const Indices& rows) const {
    Tensor out(static_cast<Index>(rows.size()), steps, channels);
    Index k = 0;
    for (const auto r : rows) {
      out.values.middleRows(k * steps, steps) = values.middleRows(static_cast<Index>(r) * steps, steps);
      ++k;
    }
    return out;
  }

  template <class T>
  Tensor<T> cast() const {
    return Tensor<T>(batch, steps, channels, values.template cast<T>());
  }
};

}  // namespace xids::nn
