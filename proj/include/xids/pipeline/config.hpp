#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids::pipeline {

XIDS_DEFINE_ERROR(ConfigInvalid);

struct DataConfig {
  std::string train_path = "data/KDDTrain+.txt";
  std::size_t subsample = 0;  // 0 keeps every row
  double train_fraction = 0.8;
};

struct ModelConfig {
  std::string family = "cnn";
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
};

struct ExplainerConfig {
  int background = 100;
  int instances = 100;
  int coalitions = 2048;
  int threads = 0;  // 0 = hardware concurrency
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store = "sessions.jsonl";  // relative to output_dir
  std::string static_dir;
  std::string admin_token;
  std::string instruments;  // empty = built-in definitions
  std::string scenarios;    // empty = derived from the explanation bundle
  std::string model = "cnn";
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "runs/default";
  DataConfig data;
  ModelConfig model;
  ExplainerConfig explainer;
  ServiceConfig service;

  // Throws ConfigInvalid naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);

// Unknown keys and wrong types are ConfigInvalid; missing keys keep their
// defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

// XIDS_SEED, XIDS_OUTPUT_DIR and XIDS_<SECTION>_<KEY> (e.g.
// XIDS_SERVICE_PORT, XIDS_DATA_TRAIN_PATH) override the matching field.
PipelineConfig apply_env(const PipelineConfig& c, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_env();

// Hex SHA-256 prefix over seed, data settings and model hyperparameters.
// Model family, output location and service settings are left out, so both
// models of one run share a hash. Explainer settings are left out as well;
// the explanation bundle records its own budget, background and seed.
std::string config_hash(const PipelineConfig& c);

std::string sha256_hex(const std::string& bytes);

}  // namespace xids::pipeline
