#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "xids/data/preprocess.hpp"

namespace xids::data {

// On-disk dataset bundle:
//   train.bin / test.bin  - encoded matrices and labels (see write_matrix)
//   dataset.json          - encoder, scaler, split spec, class distributions
struct DatasetBundle {
  EncodedDataset train;
  EncodedDataset test;
  SplitSpec split;
  std::array<std::size_t, kClassCount> full_distribution{};
  std::size_t source_rows = 0;
  std::string config_hash;
};

// Binary layout, little-endian: "XIDSMAT1", u64 rows, u64 cols, rows*cols f64
// in row-major order, rows i32 labels.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                  std::span<const int> labels);
void read_matrix(const std::filesystem::path& path, Eigen::MatrixXd& m, std::vector<int>& labels);

nlohmann::json to_json(const EncoderParams& p);
nlohmann::json to_json(const ScalerParams& p);
nlohmann::json to_json(const SplitSpec& s);
EncoderParams encoder_from_json(const nlohmann::json& j);
ScalerParams scaler_from_json(const nlohmann::json& j);
SplitSpec split_from_json(const nlohmann::json& j);

void save_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::filesystem::path& dir);

}  // namespace xids::data
