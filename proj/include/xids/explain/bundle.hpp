#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xids/explain/shapley.hpp"

namespace xids::explain {

inline constexpr int kExplanationFormatVersion = 1;

// Everything the analyst views need for one explained test set. Instance ids
// are the test-partition row indices as strings.
struct ExplanationBundle {
  std::string config_hash;
  std::string model_family;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  int n_coalitions = 0;
  std::vector<std::size_t> background_rows;  // indices into the training partition
  std::vector<InstanceExplanation> instances;
  std::vector<Eigen::VectorXd> raw_values;   // unscaled feature values, parallel to instances (may be empty)
  std::vector<ExplanationSummary> summaries;  // one per class
};

nlohmann::json to_json(const Attribution& a, const std::vector<std::string>& class_names);
nlohmann::json to_json(const InstanceExplanation& e, const std::vector<std::string>& class_names,
                       const Eigen::VectorXd* raw_values = nullptr);
nlohmann::json to_json(const ExplanationSummary& s, const std::vector<std::string>& class_names);
nlohmann::json to_json(const ExplanationBundle& b);

ExplanationBundle explanation_bundle_from_json(const nlohmann::json& j);

// Canonical text form: two-space indent, sorted keys, trailing newline.
std::string dump(const nlohmann::json& j);

void save_explanation_bundle(const std::filesystem::path& path, const ExplanationBundle& b);
ExplanationBundle load_explanation_bundle(const std::filesystem::path& path);

}  // namespace xids::explain
