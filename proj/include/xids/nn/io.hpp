#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "xids/nn/model.hpp"
#include "xids/nn/train.hpp"

namespace xids::nn {

// Model bundle directory:
//   model.json      - format_version, ModelSpec, init seed, parameter names/shapes
//   weights.bin     - "XIDSWTS1", u64 tensor count, then per tensor u64 rows,
//                     u64 cols, rows*cols little-endian f64 (row-major)
//   train_config.json
//   history.csv     - epoch,mean_loss,accuracy,seconds
struct ModelBundle {
  Sequential<double> model;
  TrainConfig config;
  TrainHistory history;
  std::string config_hash;
};

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

void save_weights(const std::filesystem::path& path, const Sequential<double>& model);
void load_weights(const std::filesystem::path& path, Sequential<double>& model);

void save_model_bundle(const std::filesystem::path& dir, const Sequential<double>& model, const TrainConfig& cfg,
                       const TrainHistory& history, const std::string& config_hash);
ModelBundle load_model_bundle(const std::filesystem::path& dir);

}  // namespace xids::nn
