// Command-line driver for the detection / explanation / survey pipeline.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "xids/data/synthetic.hpp"
#include "xids/pipeline/config.hpp"
#include "xids/pipeline/stages.hpp"
#include "xids/service/service.hpp"
#include "xids/survey/survey.hpp"

namespace {

using namespace xids;
using pipeline::PipelineConfig;

enum Exit { Ok = 0, Failure = 1, BadConfig = 2, Missing = 3, Mixed = 4, Locked = 5 };

struct Overrides {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::string train_path;
  std::optional<std::size_t> subsample;
  std::optional<int> epochs;
  std::optional<int> instances;
  std::optional<int> coalitions;
  std::optional<int> threads;
  std::optional<int> port;
  std::string host;
  std::string static_dir;
  std::string admin_token;
};

PipelineConfig effective_config(const Overrides& o) {
  PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : pipeline::load_config(o.config_path);
  c = pipeline::apply_env(c, pipeline::process_env());
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.seed = *o.seed;
  if (!o.model.empty()) {
    c.model.family = o.model;
    c.service.model = o.model;
  }
  if (!o.train_path.empty()) c.data.train_path = o.train_path;
  if (o.subsample) c.data.subsample = *o.subsample;
  if (o.epochs) c.model.epochs = *o.epochs;
  if (o.instances) c.explainer.instances = *o.instances;
  if (o.coalitions) c.explainer.coalitions = *o.coalitions;
  if (o.threads) c.explainer.threads = *o.threads;
  if (o.port) c.service.port = *o.port;
  if (!o.host.empty()) c.service.host = o.host;
  if (!o.static_dir.empty()) c.service.static_dir = o.static_dir;
  if (!o.admin_token.empty()) c.service.admin_token = o.admin_token;
  c.validate();
  return c;
}

pipeline::Progress logger(const std::string& stage) {
  return [stage](const std::string& msg) { std::cerr << "[" << stage << "] " << msg << std::endl; };
}

using StageFn = pipeline::StageResult (*)(const PipelineConfig&, const pipeline::Progress&);

void run_stage(const PipelineConfig& cfg, const std::string& name, StageFn fn) {
  const pipeline::StageResult r = fn(cfg, logger(name));
  pipeline::record_stage(cfg, r);
  std::cerr << "[" << name << "] done in " << std::fixed << std::setprecision(1) << r.seconds << "s" << std::endl;
  std::cout << nlohmann::json{{"stage", r.stage}, {"seconds", r.seconds}, {"summary", r.summary}}.dump() << "\n";
}

int serve(const PipelineConfig& cfg) {
  // Block the stop signals before the server spawns threads, then wait for
  // them on a dedicated thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::Service svc(service::options_from_config(cfg));
  const int port = svc.bind(cfg.service.host, cfg.service.port);
  std::cerr << "[serve] listening on http://" << cfg.service.host << ":" << port << " (artifacts "
            << cfg.output_dir << ", " << svc.scenarios().size() << " scenario(s))" << std::endl;
  std::thread waiter([&svc, set] {
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "[serve] stopping" << std::endl;
    svc.stop();
  });
  svc.run();
  // run() also returns on its own when the listener fails.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return Ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable intrusion detection pipeline: data, models, attributions, survey service"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("-o,--out", o.out, "Output directory (overrides output_dir)");
  app.add_option("-s,--seed", o.seed, "Seed for split, initialisation, training and explanation");

  auto* prepare = app.add_subcommand("prepare-data", "Parse, encode, scale and split the training file");
  prepare->add_option("--train-path", o.train_path, "KDDTrain+ text file");
  prepare->add_option("--subsample", o.subsample, "Keep a seeded subsample of this many rows (0 = all)");

  auto* train = app.add_subcommand("train", "Train one model family on the prepared data");
  train->add_option("-m,--model", o.model, "cnn or lstm")->check(CLI::IsMember({"cnn", "lstm"}));
  train->add_option("--epochs", o.epochs, "Training epochs");

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on the held-out split");
  evaluate->add_option("-m,--model", o.model, "cnn or lstm")->check(CLI::IsMember({"cnn", "lstm"}));

  auto* explain = app.add_subcommand("explain", "Kernel Shapley attributions for a sample of test rows");
  explain->add_option("-m,--model", o.model, "cnn or lstm")->check(CLI::IsMember({"cnn", "lstm"}));
  explain->add_option("--instances", o.instances, "Number of test rows to explain");
  explain->add_option("--coalitions", o.coalitions, "Coalition budget per instance");
  explain->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* report = app.add_subcommand("report", "Summary tables across the evaluated models");

  auto* run = app.add_subcommand("run", "prepare-data, then train, evaluate and explain each model, then report");
  std::vector<std::string> models = {"cnn", "lstm"};
  run->add_option("--models", models, "Model families")->check(CLI::IsMember({"cnn", "lstm"}))->delimiter(',');
  run->add_option("--train-path", o.train_path, "KDDTrain+ text file");
  run->add_option("--subsample", o.subsample, "Keep a seeded subsample of this many rows (0 = all)");
  run->add_option("--epochs", o.epochs, "Training epochs");
  run->add_option("--instances", o.instances, "Number of test rows to explain");
  run->add_option("--coalitions", o.coalitions, "Coalition budget per instance");
  bool skip_explain = false;
  run->add_flag("--no-explain", skip_explain, "Stop after evaluation");

  auto* alpha = app.add_subcommand("alpha", "Cronbach's alpha per construct from a response export");
  std::string responses_path;
  std::string instruments_path;
  bool alpha_json = false;
  alpha->add_option("--responses", responses_path, "CSV with session_id and item columns")
      ->required()
      ->check(CLI::ExistingFile);
  alpha->add_option("--instruments", instruments_path, "Instrument definitions (default: built-in)")
      ->check(CLI::ExistingFile);
  alpha->add_flag("--json", alpha_json, "Print JSON instead of a table");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP API over the artifacts and the survey store");
  serve_cmd->add_option("-m,--model", o.model, "Default model family for views")
      ->check(CLI::IsMember({"cnn", "lstm"}));
  serve_cmd->add_option("-p,--port", o.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--host", o.host, "Bind address");
  serve_cmd->add_option("--static-dir", o.static_dir, "Built UI assets to host at /");
  serve_cmd->add_option("--admin-token", o.admin_token, "Token required for analytics and export");

  auto* synth = app.add_subcommand("synth", "Write a synthetic file in KDDTrain+ format");
  std::size_t synth_rows = 5000;
  std::string synth_path;
  synth->add_option("--rows", synth_rows, "Records to generate");
  synth->add_option("path", synth_path, "Output file")->required();

  auto* instruments = app.add_subcommand("instruments", "Print the built-in instrument definitions");
  auto* show = app.add_subcommand("config", "Print the effective config and its hash");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      data::write_synthetic_nslkdd(synth_path, synth_rows, o.seed.value_or(42));
      std::cerr << "wrote " << synth_rows << " records to " << synth_path << std::endl;
      return Ok;
    }
    if (*instruments) {
      std::cout << survey::instruments_to_json(survey::default_instruments()).dump(2) << "\n";
      return Ok;
    }
    if (*alpha) {
      const auto defs = instruments_path.empty() ? survey::default_instruments()
                                                 : survey::instruments_from_json(nlohmann::json::parse(
                                                       std::ifstream(instruments_path)));
      std::ifstream in(responses_path);
      std::ostringstream text;
      text << in.rdbuf();
      const auto responses = survey::responses_from_csv(text.str(), defs);
      const survey::AlphaSet set = survey::alpha_by_construct(responses, defs);
      if (alpha_json) {
        nlohmann::json j = {{"respondents", responses.size()}, {"alpha", nlohmann::json::array()},
                            {"omitted", nlohmann::json::array()}};
        for (const auto& a : set.reports) j["alpha"].push_back(survey::to_json(a));
        for (const auto& [c, why] : set.skipped) j["omitted"].push_back({{"construct", c}, {"reason", why}});
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << survey::format_alpha_table(set.reports);
        for (const auto& [c, why] : set.skipped) std::cout << c << ": omitted (" << why << ")\n";
      }
      return Ok;
    }

    const PipelineConfig cfg = effective_config(o);
    if (*show) {
      std::cout << nlohmann::json{{"config", pipeline::to_json(cfg)}, {"config_hash", pipeline::config_hash(cfg)}}
                       .dump(2)
                << "\n";
      return Ok;
    }
    if (*serve_cmd) return serve(cfg);

    pipeline::DirectoryLock lock(pipeline::Layout{cfg.output_dir}.lock());
    if (*prepare) run_stage(cfg, "prepare-data", pipeline::prepare_data);
    if (*train) run_stage(cfg, "train", pipeline::train_model);
    if (*evaluate) run_stage(cfg, "evaluate", pipeline::evaluate_model);
    if (*explain) run_stage(cfg, "explain", pipeline::explain_model);
    if (*report) run_stage(cfg, "report", pipeline::write_report);
    if (*run) {
      run_stage(cfg, "prepare-data", pipeline::prepare_data);
      for (const auto& family : models) {
        PipelineConfig m = cfg;
        m.model.family = family;
        run_stage(m, "train", pipeline::train_model);
        run_stage(m, "evaluate", pipeline::evaluate_model);
        if (!skip_explain) run_stage(m, "explain", pipeline::explain_model);
      }
      run_stage(cfg, "report", pipeline::write_report);
    }
    return Ok;
  } catch (const pipeline::ConfigInvalid& e) {
    std::cerr << e.what() << std::endl;
    return BadConfig;
  } catch (const pipeline::MissingArtifact& e) {
    std::cerr << e.what() << std::endl;
    return Missing;
  } catch (const pipeline::MixedConfigHash& e) {
    std::cerr << e.what() << std::endl;
    return Mixed;
  } catch (const pipeline::LockHeld& e) {
    std::cerr << e.what() << std::endl;
    return Locked;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return Failure;
  }
}
