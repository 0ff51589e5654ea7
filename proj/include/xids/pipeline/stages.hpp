#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "xids/error.hpp"
#include "xids/pipeline/config.hpp"

namespace xids::pipeline {

XIDS_DEFINE_ERROR(MissingArtifact);
XIDS_DEFINE_ERROR(MixedConfigHash);
XIDS_DEFINE_ERROR(LockHeld);

// Output directory layout, all relative to output_dir:
//   data/                     dataset bundle
//   model_<family>/           model bundle
//   metrics_<family>.json     evaluation report (+ .txt table)
//   roc_<family>_<class>.csv  one-vs-rest ROC curves, plus roc_<family>_micro.csv
//   explanations_<family>.json
//   report.txt / report.json
//   manifest.json             config, hash, seed, per-stage timings
struct Layout {
  std::filesystem::path root;

  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path model(const std::string& family) const { return root / ("model_" + family); }
  std::filesystem::path metrics(const std::string& family) const { return root / ("metrics_" + family + ".json"); }
  std::filesystem::path metrics_table(const std::string& family) const {
    return root / ("metrics_" + family + ".txt");
  }
  std::filesystem::path roc(const std::string& family, const std::string& cls) const {
    return root / ("roc_" + family + "_" + cls + ".csv");
  }
  std::filesystem::path explanations(const std::string& family) const {
    return root / ("explanations_" + family + ".json");
  }
  std::filesystem::path report() const { return root / "report.txt"; }
  std::filesystem::path report_json() const { return root / "report.json"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path lock() const { return root / ".xids.lock"; }
};

// Exclusive per-directory lock; a lock left behind by a dead process is
// taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& path);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

using Progress = std::function<void(const std::string&)>;

struct StageResult {
  std::string stage;
  double seconds = 0.0;
  nlohmann::json summary;
};

// Each stage checks its inputs carry the current config hash and throws
// MissingArtifact naming the stage to run first.
StageResult prepare_data(const PipelineConfig& cfg, const Progress& progress = {});
StageResult train_model(const PipelineConfig& cfg, const Progress& progress = {});
StageResult evaluate_model(const PipelineConfig& cfg, const Progress& progress = {});
StageResult explain_model(const PipelineConfig& cfg, const Progress& progress = {});
// Combines whatever metrics and explanations exist; MixedConfigHash if they
// disagree.
StageResult write_report(const PipelineConfig& cfg, const Progress& progress = {});

// Records a finished stage in manifest.json.
void record_stage(const PipelineConfig& cfg, const StageResult& result);

// Reads a JSON artifact and checks its config_hash.
nlohmann::json read_artifact(const std::filesystem::path& path, const std::string& stage, const std::string& hash);

// Writes through a temporary file and renames, so readers never see a
// partial artifact.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace xids::pipeline
