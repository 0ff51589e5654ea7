#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xids/pipeline/config.hpp"
#include "xids/survey/survey.hpp"

namespace xids::service {

struct Scenario {
  std::string id;
  std::string narrative;
  std::string instance_id;
  std::string model_family;
};

nlohmann::json to_json(const Scenario& s);

struct ServiceOptions {
  std::filesystem::path artifacts_dir;  // pipeline output directory
  std::string model_family = "cnn";     // default for explanation and metrics views
  std::filesystem::path store_path;
  std::filesystem::path static_dir;     // empty = no static hosting
  std::string admin_token;              // empty = analytics open
  std::vector<survey::Instrument> instruments;
  std::filesystem::path scenarios_path;  // empty = one scenario per predicted class
};

// Resolves store/instrument/scenario paths from the config: the store path is
// relative to the output directory unless absolute.
ServiceOptions options_from_config(const pipeline::PipelineConfig& cfg);

// Read endpoints:
//   GET  /api/health
//   GET  /api/scenarios
//   GET  /api/explanations/{instance}[?model=cnn|lstm]
//   GET  /api/summary[?model=]        per-class rankings and beeswarm points
//   GET  /api/metrics[?model=]
//   GET  /api/instruments
//   GET  /api/sessions/{id}
//   GET  /api/analytics               admin token when configured
//   GET  /api/export.csv              admin token when configured
// Writes:
//   POST /api/sessions                {demographics?, scenario_id?} -> 201 {session}
//   POST /api/sessions/{id}/responses {responses: {item: value}, demographics?, scenario_id?} -> 204
//   POST /api/sessions/{id}/complete  -> 200 {session}
// Missing artifacts give 503 on the views that need them; the survey side
// keeps working.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

  const std::vector<Scenario>& scenarios() const;
  nlohmann::json analytics() const;
  std::string export_csv() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xids::service
