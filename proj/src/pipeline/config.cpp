#include "xids/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <openssl/evp.h>

extern char** environ;

namespace xids::pipeline {

void PipelineConfig::validate() const {
  if (output_dir.empty()) throw ConfigInvalid("output_dir: empty");
  if (data.train_path.empty()) throw ConfigInvalid("data.train_path: empty");
  if (!(data.train_fraction > 0 && data.train_fraction < 1)) throw ConfigInvalid("data.train_fraction: outside (0, 1)");
  if (model.family != "cnn" && model.family != "lstm") throw ConfigInvalid("model.family: expected cnn or lstm");
  if (model.epochs < 1) throw ConfigInvalid("model.epochs: must be positive");
  if (model.batch_size < 1) throw ConfigInvalid("model.batch_size: must be positive");
  if (!(model.learning_rate > 0)) throw ConfigInvalid("model.learning_rate: must be positive");
  if (explainer.background < 1) throw ConfigInvalid("explainer.background: must be positive");
  if (explainer.instances < 1) throw ConfigInvalid("explainer.instances: must be positive");
  if (explainer.coalitions < 4) throw ConfigInvalid("explainer.coalitions: too small");
  if (explainer.threads < 0) throw ConfigInvalid("explainer.threads: negative");
  if (service.port < 0 || service.port > 65535) throw ConfigInvalid("service.port: out of range");
  if (service.store.empty()) throw ConfigInvalid("service.store: empty");
  if (service.model != "cnn" && service.model != "lstm") throw ConfigInvalid("service.model: expected cnn or lstm");
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"data", {{"train_path", c.data.train_path}, {"subsample", c.data.subsample}, {"train_fraction", c.data.train_fraction}}},
      {"model",
       {{"family", c.model.family},
        {"epochs", c.model.epochs},
        {"batch_size", c.model.batch_size},
        {"learning_rate", c.model.learning_rate}}},
      {"explainer",
       {{"background", c.explainer.background},
        {"instances", c.explainer.instances},
        {"coalitions", c.explainer.coalitions},
        {"threads", c.explainer.threads}}},
      {"service",
       {{"host", c.service.host},
        {"port", c.service.port},
        {"store", c.service.store},
        {"static_dir", c.service.static_dir},
        {"admin_token", c.service.admin_token},
        {"instruments", c.service.instruments},
        {"scenarios", c.service.scenarios},
        {"model", c.service.model}}},
  };
}

namespace {

// Overlays `patch` onto `base`, which must already hold every allowed key.
void overlay(nlohmann::json& base, const nlohmann::json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigInvalid((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigInvalid(field + ": unknown key");
    nlohmann::json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, field);
    } else if (slot.is_string() != value.is_string() || slot.is_number() != value.is_number()) {
      throw ConfigInvalid(field + ": expected " + std::string(slot.type_name()));
    } else if (slot.is_number_integer() && !value.is_number_integer()) {
      throw ConfigInvalid(field + ": expected an integer");
    } else if (slot.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
      throw ConfigInvalid(field + ": must not be negative");
    } else {
      slot = value;
    }
  }
}

PipelineConfig from_complete_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.seed = j["seed"].get<std::uint64_t>();
  c.output_dir = j["output_dir"].get<std::string>();
  const auto& d = j["data"];
  c.data.train_path = d["train_path"].get<std::string>();
  c.data.subsample = d["subsample"].get<std::size_t>();
  c.data.train_fraction = d["train_fraction"].get<double>();
  const auto& m = j["model"];
  c.model.family = m["family"].get<std::string>();
  c.model.epochs = m["epochs"].get<int>();
  c.model.batch_size = m["batch_size"].get<int>();
  c.model.learning_rate = m["learning_rate"].get<double>();
  const auto& e = j["explainer"];
  c.explainer.background = e["background"].get<int>();
  c.explainer.instances = e["instances"].get<int>();
  c.explainer.coalitions = e["coalitions"].get<int>();
  c.explainer.threads = e["threads"].get<int>();
  const auto& s = j["service"];
  c.service.host = s["host"].get<std::string>();
  c.service.port = s["port"].get<int>();
  c.service.store = s["store"].get<std::string>();
  c.service.static_dir = s["static_dir"].get<std::string>();
  c.service.admin_token = s["admin_token"].get<std::string>();
  c.service.instruments = s["instruments"].get<std::string>();
  c.service.scenarios = s["scenarios"].get<std::string>();
  c.service.model = s["model"].get<std::string>();
  return c;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  return s;
}

nlohmann::json parse_env_value(const std::string& name, const std::string& text, const nlohmann::json& like) {
  if (like.is_string()) return text;
  try {
    std::size_t used = 0;
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      const auto v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } else if (like.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else {
      const auto v = std::stod(text, &used);
      if (used == text.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigInvalid(name + ": cannot parse '" + text + "'");
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j) {
  nlohmann::json full = to_json(PipelineConfig{});
  overlay(full, j, "");
  PipelineConfig c = from_complete_json(full);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

PipelineConfig apply_env(const PipelineConfig& c, const std::map<std::string, std::string>& env) {
  nlohmann::json full = to_json(c);
  for (auto& [key, value] : full.items()) {
    if (value.is_object()) {
      for (auto& [sub, slot] : value.items()) {
        const std::string name = "XIDS_" + upper(key) + "_" + upper(sub);
        if (const auto it = env.find(name); it != env.end()) slot = parse_env_value(name, it->second, slot);
      }
    } else {
      const std::string name = "XIDS_" + upper(key);
      if (const auto it = env.find(name); it != env.end()) value = parse_env_value(name, it->second, value);
    }
  }
  PipelineConfig out = from_complete_json(full);
  out.validate();
  return out;
}

std::map<std::string, std::string> process_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.rfind("XIDS_", 0) == 0) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string config_hash(const PipelineConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output_dir");
  j.erase("service");
  j["model"].erase("family");
  // Explainer settings are recorded in the explanation bundle itself; keeping
  // them out lets a new budget reuse the trained models.
  j.erase("explainer");
  // Only the file name of the dataset matters, not where it is mounted.
  j["data"]["train_path"] = std::filesystem::path(c.data.train_path).filename().string();
  return sha256_hex(j.dump()).substr(0, 16);
}

}  // namespace xids::pipeline
