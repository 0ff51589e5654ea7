#include "xids/data/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "xids/random.hpp"

namespace xids::data {

int CategoryCodes::code(const std::string& value) const {
  const auto it = std::lower_bound(categories.begin(), categories.end(), value);
  if (it == categories.end() || *it != value) {
    throw UnseenCategory(name + "='" + value + "'");
  }
  return static_cast<int>(it - categories.begin());
}

const CategoryCodes* EncoderParams::find(std::size_t feature) const {
  for (const auto& c : columns) {
    if (c.feature == feature) return &c;
  }
  return nullptr;
}

EncoderParams fit_encoders(std::span<const RawRecord> train, const FeatureSchema& schema) {
  if (train.empty()) throw EmptyTrainingSet("cannot fit encoders on zero records");
  EncoderParams params;
  for (const std::size_t f : schema.categorical_indices()) {
    std::set<std::string> distinct;
    for (const auto& r : train) distinct.insert(r.feature_values[f]);
    params.columns.push_back({f, schema.features[f].name, {distinct.begin(), distinct.end()}});
  }
  return params;
}

Eigen::MatrixXd apply_encoding(std::span<const RawRecord> records, const EncoderParams& encoder,
                               const FeatureSchema& schema) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto m = static_cast<Eigen::Index>(schema.features.size());
  Eigen::MatrixXd out(n, m);
  std::vector<const CategoryCodes*> lookup(schema.features.size(), nullptr);
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    if (schema.features[f].kind == FeatureKind::Categorical) {
      lookup[f] = encoder.find(f);
      if (lookup[f] == nullptr) {
        throw UnseenCategory("no encoder fitted for feature " + schema.features[f].name);
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const RawRecord& rec = records[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::string& token = rec.feature_values[static_cast<std::size_t>(j)];
      if (const CategoryCodes* codes = lookup[static_cast<std::size_t>(j)]) {
        out(i, j) = codes->code(token);
        continue;
      }
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
        throw NonNumericToken(schema.features[static_cast<std::size_t>(j)].name + " at line " +
                              std::to_string(rec.line_no) + ": '" + token + "'");
      }
      out(i, j) = value;
    }
  }
  return out;
}

ScalerParams fit_minmax(const Eigen::MatrixXd& train) {
  if (train.rows() == 0) throw EmptyTrainingSet("cannot fit scaler on zero rows");
  return {train.colwise().minCoeff().transpose(), train.colwise().maxCoeff().transpose()};
}

Eigen::MatrixXd apply_minmax(const Eigen::MatrixXd& x, const ScalerParams& scaler) {
  if (x.cols() != scaler.min.size()) {
    throw ShapeMismatch("matrix has " + std::to_string(x.cols()) + " columns, scaler has " +
                        std::to_string(scaler.min.size()));
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double lo = scaler.min(j);
    const double range = scaler.max(j) - lo;
    if (range <= 0.0) {
      out.col(j).setZero();
    } else {
      out.col(j) = ((x.col(j).array() - lo) / range).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return out;
}

Eigen::MatrixXd invert_minmax(const Eigen::MatrixXd& scaled, const ScalerParams& scaler) {
  if (scaled.cols() != scaler.min.size()) throw ShapeMismatch("column count differs from scaler");
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double range = scaler.max(j) - scaler.min(j);
    out.col(j) = scaled.col(j).array() * range + scaler.min(j);
  }
  return out;
}

SplitIndices split(std::size_t n, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw DegenerateSplit("train_fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw DegenerateSplit(std::to_string(n) + " rows at fraction " +
                          std::to_string(spec.train_fraction) + " leaves an empty partition");
  }
  std::vector<std::size_t> order;
  if (spec.shuffle) {
    Rng rng(spec.seed);
    order = shuffled_indices(n, rng);
  } else {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

std::vector<std::size_t> subsample(std::size_t total, std::size_t n, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  auto idx = shuffled_indices(total, rng);
  if (n < total) idx.resize(n);
  return idx;
}

ShapedInput reshape(const Eigen::MatrixXd& matrix, Layout layout) {
  if (matrix.cols() != static_cast<Eigen::Index>(kFeatureCount)) {
    throw WrongFeatureCount("matrix has " + std::to_string(matrix.cols()) + " columns, expected 41");
  }
  ShapedInput out;
  out.layout = layout;
  out.samples = matrix.rows();
  if (layout == Layout::CNN) {
    out.steps = matrix.cols();
    out.channels = 1;
  } else {
    out.steps = 1;
    out.channels = matrix.cols();
  }
  const RowMatrix row_major = matrix;
  out.values = Eigen::Map<const RowMatrix>(row_major.data(), out.samples * out.steps, out.channels);
  return out;
}

std::array<std::size_t, kClassCount> class_distribution(std::span<const int> labels) {
  std::array<std::size_t, kClassCount> counts{};
  for (const int l : labels) {
    if (l < 0 || l >= static_cast<int>(kClassCount)) throw FormatError("invalid label code " + std::to_string(l));
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

std::vector<int> encode_labels(std::span<const RawRecord> records) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(static_cast<int>(map_attack_label(r.attack_label)));
  return out;
}

}  // namespace xids::data
