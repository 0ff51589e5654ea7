#include "xids/pipeline/stages.hpp"

#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>

#include "xids/data/bundle.hpp"
#include "xids/data/nslkdd.hpp"
#include "xids/data/preprocess.hpp"
#include "xids/explain/adapter.hpp"
#include "xids/explain/bundle.hpp"
#include "xids/metrics.hpp"
#include "xids/nn/io.hpp"
#include "xids/nn/spec.hpp"
#include "xids/nn/train.hpp"

namespace xids::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> class_names() {
  return {data::kClassNames.begin(), data::kClassNames.end()};
}

void say(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

data::DatasetBundle load_data(const Layout& layout, const std::string& hash) {
  if (!fs::exists(layout.data() / "dataset.json")) {
    throw MissingArtifact("no dataset in " + layout.data().string() + "; run prepare-data first");
  }
  data::DatasetBundle b = data::load_bundle(layout.data());
  if (b.config_hash != hash) {
    throw MissingArtifact("dataset was prepared with config " + b.config_hash + ", current is " + hash +
                          "; run prepare-data again");
  }
  return b;
}

nn::ModelBundle load_model(const Layout& layout, const std::string& family, const std::string& hash) {
  const fs::path dir = layout.model(family);
  if (!fs::exists(dir / "model.json")) {
    throw MissingArtifact("no " + family + " model in " + dir.string() + "; run train --model " + family + " first");
  }
  nn::ModelBundle m = nn::load_model_bundle(dir);
  if (m.config_hash != hash) {
    throw MissingArtifact(family + " model was trained with config " + m.config_hash + ", current is " + hash +
                          "; run train --model " + family + " again");
  }
  return m;
}

data::Layout tensor_layout(const std::string& family) {
  return family == "cnn" ? data::Layout::CNN : data::Layout::LSTM;
}

nn::Tensor<double> to_tensor(const Eigen::MatrixXd& m, const std::string& family) {
  data::ShapedInput s = data::reshape(m, tensor_layout(family));
  return {s.samples, s.steps, s.channels, std::move(s.values)};
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& path) : path_(path) {
  fs::create_directories(path.parent_path());
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    long owner = 0;
    std::ifstream(path) >> owner;
    if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM)) {
      throw LockHeld(path.parent_path().string() + " is in use by process " + std::to_string(owner));
    }
    fs::remove(path);  // stale
  }
  throw LockHeld("cannot lock " + path.parent_path().string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json read_artifact(const fs::path& path, const std::string& stage, const std::string& hash) {
  if (!fs::exists(path)) throw MissingArtifact("missing " + path.string() + "; run " + stage + " first");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const std::string h = j.value("config_hash", "");
  if (!hash.empty() && h != hash) {
    throw MixedConfigHash(path.string() + " has config hash " + h + ", expected " + hash);
  }
  return j;
}

StageResult prepare_data(const PipelineConfig& cfg, const Progress& progress) {
  const auto t0 = Clock::now();
  const Layout layout{cfg.output_dir};
  if (!fs::exists(cfg.data.train_path)) throw ConfigInvalid("data.train_path: " + cfg.data.train_path + " not found");
  say(progress, "reading " + cfg.data.train_path);
  std::vector<data::RawRecord> recs = data::read_nslkdd_file(cfg.data.train_path);

  data::DatasetBundle b;
  b.config_hash = config_hash(cfg);
  b.source_rows = recs.size();
  b.full_distribution = data::class_distribution(data::encode_labels(recs));
  if (cfg.data.subsample > 0 && cfg.data.subsample < recs.size()) {
    std::vector<data::RawRecord> kept;
    kept.reserve(cfg.data.subsample);
    for (const auto i : data::subsample(recs.size(), cfg.data.subsample, cfg.seed)) kept.push_back(std::move(recs[i]));
    recs = std::move(kept);
    say(progress, "subsampled " + std::to_string(recs.size()) + " rows");
  }

  const std::vector<int> labels = data::encode_labels(recs);
  const data::EncoderParams encoder = data::fit_encoders(recs);
  const Eigen::MatrixXd raw = data::apply_encoding(recs, encoder);
  b.split = {cfg.data.train_fraction, cfg.seed, true};
  const data::SplitIndices parts = data::split(recs.size(), b.split);

  auto gather = [&](const std::vector<std::size_t>& idx, data::EncodedDataset& out) {
    out.matrix.resize(static_cast<Eigen::Index>(idx.size()), raw.cols());
    out.labels.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.matrix.row(static_cast<Eigen::Index>(i)) = raw.row(static_cast<Eigen::Index>(idx[i]));
      out.labels.push_back(labels[idx[i]]);
    }
    out.encoder = encoder;
  };
  gather(parts.train, b.train);
  gather(parts.test, b.test);
  b.train.scaler = data::fit_minmax(b.train.matrix);
  b.test.scaler = b.train.scaler;
  b.train.matrix = data::apply_minmax(b.train.matrix, b.train.scaler);
  b.test.matrix = data::apply_minmax(b.test.matrix, b.train.scaler);
  b.train.provenance = data::Provenance::Train;
  b.test.provenance = data::Provenance::Test;
  data::save_bundle(layout.data(), b);

  StageResult r{"prepare-data", seconds_since(t0), {}};
  nlohmann::json dist;
  for (std::size_t c = 0; c < data::kClassCount; ++c) dist[std::string(data::kClassNames[c])] = b.full_distribution[c];
  r.summary = {{"source_rows", b.source_rows},
               {"train_rows", b.train.rows()},
               {"test_rows", b.test.rows()},
               {"class_distribution", dist}};
  return r;
}

StageResult train_model(const PipelineConfig& cfg, const Progress& progress) {
  const auto t0 = Clock::now();
  const Layout layout{cfg.output_dir};
  const std::string hash = config_hash(cfg);
  const data::DatasetBundle b = load_data(layout, hash);
  const std::string& family = cfg.model.family;

  nn::Sequential<double> model(family == "cnn" ? nn::reference_cnn() : nn::reference_lstm(), cfg.seed);
  nn::TrainConfig tc;
  tc.epochs = cfg.model.epochs;
  tc.batch_size = cfg.model.batch_size;
  tc.adam.learning_rate = cfg.model.learning_rate;
  // The two families were specified with different (equivalent) losses.
  tc.loss = family == "cnn" ? nn::LossKind::SparseCategorical : nn::LossKind::Categorical;
  tc.seed = cfg.seed;

  const nn::Tensor<double> x = to_tensor(b.train.matrix, family);
  say(progress, "training " + family + " on " + std::to_string(x.batch) + " samples, " +
                    std::to_string(model.parameter_count()) + " parameters");
  const nn::TrainHistory h = nn::train(model, x, b.train.labels, tc, [&](const nn::EpochStats& e) {
    std::ostringstream os;
    os << "epoch " << e.epoch << "/" << tc.epochs << "  loss " << std::setprecision(5) << e.mean_loss << "  acc "
       << e.accuracy << "  " << std::setprecision(3) << e.seconds << "s";
    say(progress, os.str());
  });
  nn::save_model_bundle(layout.model(family), model, tc, h, hash);

  StageResult r{"train:" + family, seconds_since(t0), {}};
  r.summary = {{"epochs", tc.epochs},
               {"final_loss", h.epochs.back().mean_loss},
               {"final_train_accuracy", h.epochs.back().accuracy},
               {"parameters", model.parameter_count()}};
  return r;
}

StageResult evaluate_model(const PipelineConfig& cfg, const Progress& progress) {
  const auto t0 = Clock::now();
  const Layout layout{cfg.output_dir};
  const std::string hash = config_hash(cfg);
  const std::string& family = cfg.model.family;
  const data::DatasetBundle b = load_data(layout, hash);
  const nn::ModelBundle m = load_model(layout, family, hash);

  say(progress, "evaluating " + family + " on " + std::to_string(b.test.rows()) + " test rows");
  const Eigen::MatrixXd probs = m.model.predict_proba(to_tensor(b.test.matrix, family));
  const metrics::EvaluationReport rep = metrics::evaluate(probs, b.test.labels);
  const auto names = class_names();

  nlohmann::json j = metrics::to_json(rep, names);
  j["config_hash"] = hash;
  j["model_family"] = family;
  j["seed"] = cfg.seed;
  j["test_rows"] = b.test.rows();
  write_text_atomic(layout.metrics(family), j.dump(2) + "\n");
  write_text_atomic(layout.metrics_table(family),
                    "config " + hash + "\n" + metrics::format_table(rep, names, family == "cnn" ? "CNN" : "LSTM"));
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (rep.auc_undefined[c]) continue;
    write_text_atomic(layout.roc(family, names[c]),
                      metrics::roc_csv(metrics::roc_curve(probs, b.test.labels, static_cast<int>(c))));
  }
  write_text_atomic(layout.roc(family, "micro"), metrics::roc_csv(metrics::micro_roc_curve(probs, b.test.labels)));

  StageResult r{"evaluate:" + family, seconds_since(t0), {}};
  r.summary = {{"accuracy", rep.aggregate.accuracy}, {"macro_f1", rep.aggregate.macro.f1}};
  return r;
}

StageResult explain_model(const PipelineConfig& cfg, const Progress& progress) {
  const auto t0 = Clock::now();
  const Layout layout{cfg.output_dir};
  const std::string hash = config_hash(cfg);
  const std::string& family = cfg.model.family;
  const data::DatasetBundle b = load_data(layout, hash);
  const nn::ModelBundle m = load_model(layout, family, hash);

  // Explaining evaluates the model millions of times; single precision is
  // plenty for attributions and several times faster.
  auto fast = std::make_shared<nn::Sequential<float>>(m.model.spec(), 0);
  fast->copy_params_from(m.model);
  const explain::ModelFn fn = explain::model_fn<float>(fast);

  explain::ExplanationBundle out;
  out.config_hash = hash;
  out.model_family = family;
  out.feature_names = data::nslkdd_schema().names();
  out.class_names = class_names();
  out.seed = cfg.seed;
  out.n_coalitions = cfg.explainer.coalitions;

  const Eigen::MatrixXd background =
      explain::select_rows(b.train.matrix, cfg.explainer.background, cfg.seed, &out.background_rows);
  std::vector<std::size_t> chosen;
  const Eigen::MatrixXd xs = explain::select_rows(b.test.matrix, cfg.explainer.instances, cfg.seed + 1, &chosen);

  const unsigned threads = cfg.explainer.threads > 0 ? static_cast<unsigned>(cfg.explainer.threads)
                                                     : std::max(1u, std::thread::hardware_concurrency());
  say(progress, "explaining " + std::to_string(xs.rows()) + " " + family + " predictions against " +
                    std::to_string(background.rows()) + " background rows, " +
                    std::to_string(cfg.explainer.coalitions) + " coalitions, " + std::to_string(threads) +
                    " thread(s)");
  explain::KernelShapOptions opt;
  opt.n_coalitions = cfg.explainer.coalitions;
  opt.seed = cfg.seed;
  out.instances = explain::explain_batch(fn, xs, background, opt, threads);

  const Eigen::MatrixXd raw = data::invert_minmax(xs, b.train.scaler);
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    out.instances[i].instance_id = std::to_string(chosen[i]);
    out.instances[i].true_label = b.test.labels[chosen[i]];
    out.raw_values.push_back(raw.row(static_cast<Eigen::Index>(i)).transpose());
  }
  for (int c = 0; c < static_cast<int>(data::kClassCount); ++c) {
    out.summaries.push_back(explain::summarize(out.instances, c, out.feature_names));
  }
  explain::save_explanation_bundle(layout.explanations(family), out);

  double worst = 0;
  for (const auto& e : out.instances) {
    for (const auto& a : e.classes) worst = std::max(worst, std::abs(a.base_value + a.phi.sum() - a.prediction));
  }
  StageResult r{"explain:" + family, seconds_since(t0), {}};
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(10, out.summaries[0].ranking.size()); ++i) {
    top.push_back(out.summaries[0].ranking[i].name);
  }
  r.summary = {{"instances", out.instances.size()}, {"max_local_accuracy_error", worst}, {"dos_top10", top}};
  return r;
}

namespace {

struct ReferenceRow {
  const char* model;
  double acc, mp, mr, mf, wp, wr, wf;
};

bool auc_undefined(const nlohmann::json& cls) {
  for (const auto& u : cls.value("undefined", nlohmann::json::array())) {
    if (u == "auc") return true;
  }
  return false;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

StageResult write_report(const PipelineConfig& cfg, const Progress& progress) {
  const auto t0 = Clock::now();
  const Layout layout{cfg.output_dir};
  const std::string hash = config_hash(cfg);
  const auto names = class_names();

  std::vector<std::pair<std::string, nlohmann::json>> metrics_by_family;
  std::vector<std::pair<std::string, explain::ExplanationBundle>> explained;
  std::string seen_hash;
  auto check = [&](const std::string& h, const fs::path& from) {
    if (seen_hash.empty()) seen_hash = h;
    if (h != seen_hash) throw MixedConfigHash(from.string() + " has config hash " + h + ", others have " + seen_hash);
  };
  for (const std::string family : {"cnn", "lstm"}) {
    if (fs::exists(layout.metrics(family))) {
      nlohmann::json j = read_artifact(layout.metrics(family), "evaluate", "");
      check(j.value("config_hash", ""), layout.metrics(family));
      metrics_by_family.emplace_back(family, std::move(j));
    }
    if (fs::exists(layout.explanations(family))) {
      explain::ExplanationBundle e = explain::load_explanation_bundle(layout.explanations(family));
      check(e.config_hash, layout.explanations(family));
      explained.emplace_back(family, std::move(e));
    }
  }
  if (metrics_by_family.empty()) throw MissingArtifact("no metrics in " + cfg.output_dir + "; run evaluate first");
  if (seen_hash != hash) {
    throw MixedConfigHash("artifacts have config hash " + seen_hash + ", the current config hashes to " + hash);
  }
  say(progress, "writing report for " + std::to_string(metrics_by_family.size()) + " model(s)");

  std::ostringstream os;
  os << "Run " << hash << " (seed " << cfg.seed << ")\n\n";
  os << "Overall performance\n";
  os << std::left << std::setw(8) << "Model" << std::right << std::setw(10) << "Accuracy" << std::setw(10) << "Macro P"
     << std::setw(10) << "Macro R" << std::setw(10) << "Macro F1" << std::setw(10) << "Wtd P" << std::setw(10)
     << "Wtd R" << std::setw(10) << "Wtd F1" << "\n";
  nlohmann::json overall = nlohmann::json::object();
  for (const auto& [family, j] : metrics_by_family) {
    os << std::left << std::setw(8) << (family == "cnn" ? "CNN" : "LSTM") << std::right << std::setw(10)
       << fixed(j["accuracy"]) << std::setw(10) << fixed(j["macro"]["precision"]) << std::setw(10)
       << fixed(j["macro"]["recall"]) << std::setw(10) << fixed(j["macro"]["f1"]) << std::setw(10)
       << fixed(j["weighted"]["precision"]) << std::setw(10) << fixed(j["weighted"]["recall"]) << std::setw(10)
       << fixed(j["weighted"]["f1"]) << "\n";
    overall[family] = {{"accuracy", j["accuracy"]}, {"macro", j["macro"]}, {"weighted", j["weighted"]}};
  }
  const ReferenceRow reference[] = {{"CNN", .99, .88, .84, .86, .99, .99, .98}, {"LSTM", .99, .99, .89, .93, .99, .99, .99}};
  os << "\nReference values\n";
  for (const auto& p : reference) {
    os << std::left << std::setw(8) << p.model << std::right << std::setw(10) << fixed(p.acc, 2) << std::setw(10)
       << fixed(p.mp, 2) << std::setw(10) << fixed(p.mr, 2) << std::setw(10) << fixed(p.mf, 2) << std::setw(10)
       << fixed(p.wp, 2) << std::setw(10) << fixed(p.wr, 2) << std::setw(10) << fixed(p.wf, 2) << "\n";
  }
  os << "note: the reference CNN macro recall is reported both as 0.84 and as 0.99; 0.84 is listed.\n";

  os << "\nPer-class performance\n";
  os << std::left << std::setw(8) << "Model" << std::setw(8) << "Class" << std::right << std::setw(10) << "Precision"
     << std::setw(10) << "Recall" << std::setw(10) << "F1" << std::setw(10) << "Support" << std::setw(8) << "AUC"
     << "\n";
  for (const auto& [family, j] : metrics_by_family) {
    for (const auto& c : j["classes"]) {
      os << std::left << std::setw(8) << (family == "cnn" ? "CNN" : "LSTM") << std::setw(8)
         << c["name"].get<std::string>() << std::right << std::setw(10) << fixed(c["precision"]) << std::setw(10)
         << fixed(c["recall"]) << std::setw(10) << fixed(c["f1"]) << std::setw(10) << c["support"].get<long>()
         << std::setw(8) << (auc_undefined(c) ? std::string("n/a") : fixed(c["auc"], 3)) << "\n";
    }
  }

  nlohmann::json top_features = nlohmann::json::object();
  if (!explained.empty()) {
    os << "\nMost influential features for DoS (mean |phi|)\n";
    for (const auto& [family, e] : explained) {
      os << (family == "cnn" ? "CNN" : "LSTM") << ":";
      nlohmann::json list = nlohmann::json::array();
      const auto& ranking = e.summaries.at(0).ranking;
      for (std::size_t i = 0; i < std::min<std::size_t>(10, ranking.size()); ++i) {
        os << (i ? ", " : " ") << ranking[i].name << " (" << fixed(ranking[i].mean_abs_phi, 4) << ")";
        list.push_back({{"feature", ranking[i].name}, {"mean_abs_phi", ranking[i].mean_abs_phi}});
      }
      os << "\n";
      top_features[family] = list;
    }
  }
  write_text_atomic(layout.report(), os.str());
  const nlohmann::json rj = {
      {"config_hash", hash}, {"seed", cfg.seed}, {"overall", overall}, {"dos_top_features", top_features}};
  write_text_atomic(layout.report_json(), rj.dump(2) + "\n");

  StageResult r{"report", seconds_since(t0), {}};
  r.summary = {{"models", metrics_by_family.size()}, {"explained", explained.size()}};
  return r;
}

void record_stage(const PipelineConfig& cfg, const StageResult& result) {
  const Layout layout{cfg.output_dir};
  nlohmann::json m = nlohmann::json::object();
  if (fs::exists(layout.manifest())) {
    try {
      m = nlohmann::json::parse(read_file(layout.manifest()));
    } catch (const nlohmann::json::exception&) {
      m = nlohmann::json::object();
    }
  }
  const std::string hash = config_hash(cfg);
  if (m.value("config_hash", "") != hash) m["stages"] = nlohmann::json::object();
  m["config_hash"] = hash;
  m["seed"] = cfg.seed;
  m["config"] = to_json(cfg);
  m["stages"][result.stage] = {{"seconds", result.seconds}, {"finished_at", utc_now()}, {"summary", result.summary}};
  write_text_atomic(layout.manifest(), m.dump(2) + "\n");
}

}  // namespace xids::pipeline
