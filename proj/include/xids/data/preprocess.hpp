#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xids/data/nslkdd.hpp"
#include "xids/data/schema.hpp"
#include "xids/error.hpp"

namespace xids::data {

XIDS_DEFINE_ERROR(EmptyTrainingSet);
XIDS_DEFINE_ERROR(UnseenCategory);
XIDS_DEFINE_ERROR(NonNumericToken);
XIDS_DEFINE_ERROR(DegenerateSplit);
XIDS_DEFINE_ERROR(WrongFeatureCount);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Sorted category vocabulary of one categorical feature; the code of a value
// is its position in `categories`.
struct CategoryCodes {
  std::size_t feature = 0;
  std::string name;
  std::vector<std::string> categories;

  // Throws UnseenCategory.
  int code(const std::string& value) const;
};

struct EncoderParams {
  std::vector<CategoryCodes> columns;

  const CategoryCodes* find(std::size_t feature) const;
};

EncoderParams fit_encoders(std::span<const RawRecord> train,
                           const FeatureSchema& schema = nslkdd_schema());

// Replaces categorical tokens by codes and parses numeric tokens. Result is
// N x 41.
Eigen::MatrixXd apply_encoding(std::span<const RawRecord> records,
                               const EncoderParams& encoder,
                               const FeatureSchema& schema = nslkdd_schema());

struct ScalerParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

ScalerParams fit_minmax(const Eigen::MatrixXd& train);

// (x - min) / (max - min), 0 for constant columns, clamped to [0, 1].
Eigen::MatrixXd apply_minmax(const Eigen::MatrixXd& x, const ScalerParams& scaler);

// Inverse of apply_minmax on non-degenerate columns; constant columns map
// back to min.
Eigen::MatrixXd invert_minmax(const Eigen::MatrixXd& scaled, const ScalerParams& scaler);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  bool shuffle = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// |train| = floor(train_fraction * n). Throws DegenerateSplit if either side
// would be empty or the fraction is outside (0, 1).
SplitIndices split(std::size_t n, const SplitSpec& spec);

// Seeded subsample of `n` indices into [0, total), in shuffled order.
std::vector<std::size_t> subsample(std::size_t total, std::size_t n, std::uint64_t seed);

enum class Provenance { Train, Test };

struct EncodedDataset {
  Eigen::MatrixXd matrix;  // N x 41, scaled to [0, 1]
  std::vector<int> labels;
  EncoderParams encoder;
  ScalerParams scaler;
  Provenance provenance = Provenance::Train;

  Eigen::Index rows() const { return matrix.rows(); }
};

enum class Layout { CNN, LSTM };

// (N, 41, 1) for CNN, (N, 1, 41) for LSTM. `values` holds the row-major
// traversal of the source matrix in both layouts, reshaped to
// (N * steps) x channels.
struct ShapedInput {
  Layout layout = Layout::CNN;
  Eigen::Index samples = 0;
  Eigen::Index steps = 0;
  Eigen::Index channels = 0;
  RowMatrix values;

  std::array<Eigen::Index, 3> shape() const { return {samples, steps, channels}; }
};

ShapedInput reshape(const Eigen::MatrixXd& matrix, Layout layout);

std::array<std::size_t, kClassCount> class_distribution(std::span<const int> labels);

std::vector<int> encode_labels(std::span<const RawRecord> records);

}  // namespace xids::data
