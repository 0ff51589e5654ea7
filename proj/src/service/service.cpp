#include "xids/service/service.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "httplib.h"
#include "xids/data/schema.hpp"
#include "xids/explain/bundle.hpp"
#include "xids/pipeline/stages.hpp"
#include "xids/service/store.hpp"

namespace xids::service {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const Scenario& s) {
  return {{"id", s.id}, {"narrative", s.narrative}, {"instance_id", s.instance_id}, {"model_family", s.model_family}};
}

ServiceOptions options_from_config(const pipeline::PipelineConfig& cfg) {
  ServiceOptions o;
  o.artifacts_dir = cfg.output_dir;
  o.model_family = cfg.service.model;
  const fs::path store(cfg.service.store);
  o.store_path = store.is_absolute() ? store : fs::path(cfg.output_dir) / store;
  o.static_dir = cfg.service.static_dir;
  o.admin_token = cfg.service.admin_token;
  o.scenarios_path = cfg.service.scenarios;
  if (cfg.service.instruments.empty()) {
    o.instruments = survey::default_instruments();
  } else {
    std::ifstream in(cfg.service.instruments);
    if (!in) throw pipeline::ConfigInvalid("service.instruments: cannot open " + cfg.service.instruments);
    try {
      o.instruments = survey::instruments_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw pipeline::ConfigInvalid("service.instruments: " + std::string(e.what()));
    }
  }
  return o;
}

struct Service::Impl {
  ServiceOptions opt;
  SessionStore store;
  std::map<std::string, explain::ExplanationBundle> explanations;  // by family
  std::map<std::string, std::map<std::string, std::size_t>> instance_index;
  std::map<std::string, json> metrics;
  std::map<std::string, std::string> load_errors;
  std::vector<Scenario> scenarios;
  httplib::Server server;

  explicit Impl(ServiceOptions o) : opt(std::move(o)), store(opt.store_path) {
    load_artifacts();
    load_scenarios();
    routes();
  }

  void load_artifacts() {
    const pipeline::Layout layout{opt.artifacts_dir};
    for (const std::string family : {"cnn", "lstm"}) {
      try {
        if (fs::exists(layout.explanations(family))) {
          explanations[family] = explain::load_explanation_bundle(layout.explanations(family));
          auto& idx = instance_index[family];
          const auto& inst = explanations[family].instances;
          for (std::size_t i = 0; i < inst.size(); ++i) idx[inst[i].instance_id] = i;
        }
      } catch (const std::exception& e) {
        load_errors["explanations_" + family] = e.what();
      }
      try {
        if (fs::exists(layout.metrics(family))) {
          metrics[family] = pipeline::read_artifact(layout.metrics(family), "evaluate", "");
        }
      } catch (const std::exception& e) {
        load_errors["metrics_" + family] = e.what();
      }
    }
  }

  void load_scenarios() {
    if (!opt.scenarios_path.empty()) {
      std::ifstream in(opt.scenarios_path);
      if (!in) throw IoError("cannot read scenarios " + opt.scenarios_path.string());
      json j;
      try {
        j = json::parse(in);
        for (const auto& s : j.at("scenarios")) {
          scenarios.push_back({s.at("id").get<std::string>(), s.value("narrative", ""),
                               s.at("instance_id").get<std::string>(), s.value("model_family", opt.model_family)});
        }
      } catch (const json::exception& e) {
        throw FormatError("scenarios: " + std::string(e.what()));
      }
      for (const auto& s : scenarios) {
        const auto it = instance_index.find(s.model_family);
        if (it == instance_index.end() || !it->second.count(s.instance_id)) {
          throw FormatError("scenario " + s.id + " refers to unexplained instance " + s.instance_id + " (" +
                            s.model_family + ")");
        }
      }
      return;
    }
    const auto it = explanations.find(opt.model_family);
    if (it == explanations.end()) return;
    const std::string shown = opt.model_family == "cnn" ? "CNN" : "LSTM";
    for (int c = 0; c < static_cast<int>(data::kClassCount); ++c) {
      for (const auto& e : it->second.instances) {
        if (e.predicted_label != c) continue;
        const std::string cls(data::class_name(c));
        scenarios.push_back({"scenario-" + cls,
                             "A connection record that the " + shown + " model classified as " + cls +
                                 ". Review the explanation and judge whether the decision is sound.",
                             e.instance_id, opt.model_family});
        break;
      }
    }
  }

  // --- helpers

  static void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
    send_json(res, {{"error", error}, {"detail", detail}}, status);
  }

  std::string family_of(const httplib::Request& req) const {
    return req.has_param("model") ? req.get_param_value("model") : opt.model_family;
  }

  bool authorized(const httplib::Request& req) const {
    if (opt.admin_token.empty()) return true;
    if (req.get_header_value("X-Admin-Token") == opt.admin_token) return true;
    if (req.get_header_value("Authorization") == "Bearer " + opt.admin_token) return true;
    return req.has_param("token") && req.get_param_value("token") == opt.admin_token;
  }

  std::vector<survey::SurveyResponse> completed_responses() const {
    std::vector<survey::SurveyResponse> out;
    for (const auto& r : store.completed()) out.push_back(r.response());
    return out;
  }

  static std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json::object();
    try {
      json j = json::parse(req.body);
      if (!j.is_object()) {
        send_error(res, 400, "BadRequest", "body must be a JSON object");
        return std::nullopt;
      }
      return j;
    } catch (const json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
      return std::nullopt;
    }
  }

  json analytics() const {
    const auto all = store.all();
    const auto done = completed_responses();
    json out;
    out["total_sessions"] = all.size();
    out["completed_sessions"] = done.size();
    out["incomplete_sessions"] = all.size() - done.size();

    const survey::AlphaSet alpha = survey::alpha_by_construct(done, opt.instruments);
    out["alpha"] = json::array();
    for (const auto& a : alpha.reports) out["alpha"].push_back(survey::to_json(a));
    out["alpha_omitted"] = json::array();
    for (const auto& [c, why] : alpha.skipped) out["alpha_omitted"].push_back({{"construct", c}, {"reason", why}});

    out["likert"] = json::object();
    out["constructs"] = json::object();
    for (const auto& in : opt.instruments) {
      json items = json::array();
      for (const auto& d : survey::likert_summary(done, in)) items.push_back(survey::to_json(d));
      out["likert"][in.id] = items;
      for (const auto& c : in.constructs) {
        json scores = json::array();
        double sum = 0;
        for (const auto& r : done) {
          if (!survey::missing_items(r, in, c).empty()) continue;
          const double s = survey::score_construct(r, in, c);
          scores.push_back(s);
          sum += s;
        }
        json entry = {{"instrument", in.id}, {"scores", scores}};
        if (!scores.empty()) entry["mean"] = sum / static_cast<double>(scores.size());
        out["constructs"][c] = entry;
      }
      if (in.items_of("Usability").size() == 10) {
        json scores = json::array();
        for (const auto& r : done) {
          if (survey::missing_items(r, in, "Usability").empty()) scores.push_back(survey::sus_score(r, in));
        }
        out["sus"] = {{"scores", scores}};
      }
    }
    if (done.empty()) out["note"] = "no completed sessions";
    return out;
  }

  // --- routes

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type, Authorization, X-Admin-Token"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send_error(res, 500, "InternalError", what);
    });

    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      json loaded = json::object();
      for (const auto& [f, e] : explanations) loaded["explanations_" + f] = e.config_hash;
      for (const auto& [f, m] : metrics) loaded["metrics_" + f] = m.value("config_hash", "");
      send_json(res, {{"status", "ok"},
                      {"artifacts", loaded},
                      {"load_errors", load_errors},
                      {"sessions", store.all().size()},
                      {"dropped_store_lines", store.dropped_lines()}});
    });

    server.Get("/api/scenarios", [this](const httplib::Request&, httplib::Response& res) {
      if (explanations.empty()) return send_error(res, 503, "ArtifactsNotLoaded", "no explanation bundle");
      json list = json::array();
      for (const auto& s : scenarios) list.push_back(to_json(s));
      send_json(res, {{"scenarios", list}});
    });

    server.Get(R"(/api/explanations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string family = family_of(req);
      const auto it = explanations.find(family);
      if (it == explanations.end()) {
        return send_error(res, 503, "ArtifactsNotLoaded", "no " + family + " explanation bundle");
      }
      const std::string id = req.matches[1];
      const auto& idx = instance_index.at(family);
      const auto pos = idx.find(id);
      if (pos == idx.end()) return send_error(res, 404, "UnknownInstance", "instance " + id + " was not explained");
      const auto& b = it->second;
      const Eigen::VectorXd* raw = b.raw_values.empty() ? nullptr : &b.raw_values[pos->second];
      json j = explain::to_json(b.instances[pos->second], b.class_names, raw);
      j["model_family"] = family;
      j["feature_names"] = b.feature_names;
      j["class_names"] = b.class_names;
      j["config_hash"] = b.config_hash;
      send_json(res, j);
    });

    server.Get("/api/summary", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string family = family_of(req);
      const auto it = explanations.find(family);
      if (it == explanations.end()) {
        return send_error(res, 503, "ArtifactsNotLoaded", "no " + family + " explanation bundle");
      }
      json list = json::array();
      for (const auto& s : it->second.summaries) list.push_back(explain::to_json(s, it->second.class_names));
      send_json(res, {{"model_family", family},
                      {"config_hash", it->second.config_hash},
                      {"feature_names", it->second.feature_names},
                      {"summaries", list}});
    });

    server.Get("/api/metrics", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string family = family_of(req);
      const auto it = metrics.find(family);
      if (it == metrics.end()) return send_error(res, 503, "ArtifactsNotLoaded", "no " + family + " metrics");
      send_json(res, it->second);
    });

    server.Get("/api/instruments", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, survey::instruments_to_json(opt.instruments));
    });

    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      try {
        const survey::Demographics d =
            survey::demographics_from_json(body->value("demographics", json::object()));
        const SessionRecord r = store.create(d, body->value("scenario_id", ""));
        send_json(res, service::to_json(r), 201);
      } catch (const FormatError& e) {
        send_error(res, 400, "BadRequest", e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "BadRequest", e.what());
      }
    });

    server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = store.get(req.matches[1]);
      if (!r) return send_error(res, 404, "UnknownSession", "no session " + std::string(req.matches[1]));
      send_json(res, service::to_json(*r));
    });

    server.Post(R"(/api/sessions/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req, res);
      if (!body) return;
      const std::string id = req.matches[1];
      try {
        std::map<std::string, int> answers;
        if (body->contains("responses")) {
          const json& rs = body->at("responses");
          if (!rs.is_object()) return send_error(res, 400, "BadRequest", "responses must be an object");
          for (const auto& [item, v] : rs.items()) {
            if (!survey::find_item(opt.instruments, item)) throw survey::UnknownItem("unknown item " + item);
            if (!v.is_number_integer()) throw survey::OutOfScale(item + ": not an integer");
            const long long value = v.get<long long>();
            const int clamped = value < 0 ? 0 : value > 1000 ? 1000 : static_cast<int>(value);
            survey::validate_answer(opt.instruments, item, clamped);
            answers[item] = clamped;
          }
        }
        std::optional<survey::Demographics> demo;
        if (body->contains("demographics")) demo = survey::demographics_from_json(body->at("demographics"));
        std::optional<std::string> scenario;
        if (body->contains("scenario_id")) scenario = body->at("scenario_id").get<std::string>();
        store.update(id, answers, demo, scenario);
        res.status = 204;
      } catch (const survey::OutOfScale& e) {
        send_error(res, 400, "OutOfScale", e.what());
      } catch (const survey::UnknownItem& e) {
        send_error(res, 400, "UnknownItem", e.what());
      } catch (const UnknownSession& e) {
        send_error(res, 404, "UnknownSession", e.what());
      } catch (const SessionCompleted& e) {
        send_error(res, 409, "SessionCompleted", e.what());
      } catch (const FormatError& e) {
        send_error(res, 400, "BadRequest", e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "BadRequest", e.what());
      }
    });

    server.Post(R"(/api/sessions/([^/]+)/complete)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto r = store.get(id);
      if (!r) return send_error(res, 404, "UnknownSession", "no session " + id);
      if (r->completed()) return send_error(res, 409, "SessionCompleted", "session " + id + " is completed");
      std::vector<std::string> missing;
      for (const auto& in : opt.instruments) {
        for (const auto& item : in.items) {
          if (!r->answers.count(item.id)) missing.push_back(item.id);
        }
      }
      if (!missing.empty()) {
        return send_json(res, {{"error", "IncompleteResponse"}, {"detail", "unanswered items"}, {"missing", missing}},
                         400);
      }
      try {
        send_json(res, service::to_json(store.complete(id)));
      } catch (const SessionCompleted& e) {
        send_error(res, 409, "SessionCompleted", e.what());
      }
    });

    server.Get("/api/analytics", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req)) return send_error(res, 403, "Forbidden", "admin token required");
      send_json(res, analytics());
    });

    server.Get("/api/export.csv", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req)) return send_error(res, 403, "Forbidden", "admin token required");
      res.set_content(survey::export_csv(completed_responses(), opt.instruments), "text/csv");
    });

    if (!opt.static_dir.empty()) {
      if (!server.set_mount_point("/", opt.static_dir.string())) {
        throw IoError("static directory " + opt.static_dir.string() + " does not exist");
      }
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

const std::vector<Scenario>& Service::scenarios() const { return impl_->scenarios; }

nlohmann::json Service::analytics() const { return impl_->analytics(); }

std::string Service::export_csv() const {
  return survey::export_csv(impl_->completed_responses(), impl_->opt.instruments);
}

}  // namespace xids::service
