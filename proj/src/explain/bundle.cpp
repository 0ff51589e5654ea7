#include "xids/explain/bundle.hpp"

#include <fstream>
#include <sstream>

namespace xids::explain {
namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string name_of(const std::vector<std::string>& names, int i) {
  return i >= 0 && static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)] : std::to_string(i);
}

Attribution attribution_from_json(const nlohmann::json& j) {
  return {j.at("class_index").get<int>(), j.at("base_value").get<double>(), vec_from_json(j.at("phi")),
          j.at("prediction").get<double>()};
}

}  // namespace

nlohmann::json to_json(const Attribution& a, const std::vector<std::string>& class_names) {
  return {{"class_index", a.class_index},
          {"class_name", name_of(class_names, a.class_index)},
          {"base_value", a.base_value},
          {"phi", vec_json(a.phi)},
          {"prediction", a.prediction}};
}

nlohmann::json to_json(const InstanceExplanation& e, const std::vector<std::string>& class_names,
                       const Eigen::VectorXd* raw_values) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& a : e.classes) classes.push_back(to_json(a, class_names));
  nlohmann::json j = {{"id", e.instance_id},
                      {"true_label", e.true_label},
                      {"predicted_label", e.predicted_label},
                      {"feature_values", vec_json(e.features)},
                      {"coalitions", e.coalitions},
                      {"exact", e.exact},
                      {"ridge_fallback", e.ridge_fallback},
                      {"classes", std::move(classes)}};
  if (raw_values) j["raw_values"] = vec_json(*raw_values);
  return j;
}

nlohmann::json to_json(const ExplanationSummary& s, const std::vector<std::string>& class_names) {
  nlohmann::json ranking = nlohmann::json::array();
  for (const auto& r : s.ranking) {
    ranking.push_back({{"feature", r.feature}, {"name", r.name}, {"mean_abs_phi", r.mean_abs_phi}});
  }
  nlohmann::json beeswarm = nlohmann::json::array();
  for (const auto& points : s.beeswarm) {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& [value, phi] : points) p.push_back({value, phi});
    beeswarm.push_back(std::move(p));
  }
  return {{"class_index", s.class_index},
          {"class_name", name_of(class_names, s.class_index)},
          {"ranking", std::move(ranking)},
          {"beeswarm", std::move(beeswarm)}};
}

nlohmann::json to_json(const ExplanationBundle& b) {
  nlohmann::json instances = nlohmann::json::array();
  for (std::size_t i = 0; i < b.instances.size(); ++i) {
    instances.push_back(to_json(b.instances[i], b.class_names, i < b.raw_values.size() ? &b.raw_values[i] : nullptr));
  }
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : b.summaries) summaries.push_back(to_json(s, b.class_names));
  return {{"format_version", kExplanationFormatVersion},
          {"config_hash", b.config_hash},
          {"model_family", b.model_family},
          {"feature_names", b.feature_names},
          {"class_names", b.class_names},
          {"seed", b.seed},
          {"n_coalitions", b.n_coalitions},
          {"background", {{"size", b.background_rows.size()}, {"rows", b.background_rows}}},
          {"instances", std::move(instances)},
          {"summaries", std::move(summaries)}};
}

ExplanationBundle explanation_bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kExplanationFormatVersion) {
      throw FormatError("unsupported explanation format_version " + j.at("format_version").dump());
    }
    ExplanationBundle b;
    b.config_hash = j.at("config_hash").get<std::string>();
    b.model_family = j.at("model_family").get<std::string>();
    b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    b.class_names = j.at("class_names").get<std::vector<std::string>>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.n_coalitions = j.at("n_coalitions").get<int>();
    b.background_rows = j.at("background").at("rows").get<std::vector<std::size_t>>();
    bool any_raw = false;
    for (const auto& ij : j.at("instances")) {
      InstanceExplanation e;
      e.instance_id = ij.at("id").get<std::string>();
      e.true_label = ij.at("true_label").get<int>();
      e.predicted_label = ij.at("predicted_label").get<int>();
      e.features = vec_from_json(ij.at("feature_values"));
      e.coalitions = ij.at("coalitions").get<int>();
      e.exact = ij.at("exact").get<bool>();
      e.ridge_fallback = ij.at("ridge_fallback").get<bool>();
      for (const auto& cj : ij.at("classes")) e.classes.push_back(attribution_from_json(cj));
      if (ij.contains("raw_values")) {
        any_raw = true;
        b.raw_values.push_back(vec_from_json(ij.at("raw_values")));
      }
      b.instances.push_back(std::move(e));
    }
    if (any_raw && b.raw_values.size() != b.instances.size()) {
      throw FormatError("raw_values present on some instances only");
    }
    for (const auto& sj : j.at("summaries")) {
      ExplanationSummary s;
      s.class_index = sj.at("class_index").get<int>();
      for (const auto& r : sj.at("ranking")) {
        s.ranking.push_back({r.at("feature").get<std::size_t>(), r.at("name").get<std::string>(),
                             r.at("mean_abs_phi").get<double>()});
      }
      for (const auto& points : sj.at("beeswarm")) {
        auto& out = s.beeswarm.emplace_back();
        for (const auto& p : points) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      }
      b.summaries.push_back(std::move(s));
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("explanation bundle: ") + e.what());
  }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void save_explanation_bundle(const std::filesystem::path& path, const ExplanationBundle& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump(to_json(b));
  if (!out) throw IoError("write failed for " + path.string());
}

ExplanationBundle load_explanation_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return explanation_bundle_from_json(j);
}

}  // namespace xids::explain
