#include "xids/nn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace xids::nn {

static_assert(std::endian::native == std::endian::little, "weight format assumes a little-endian host");

namespace {

constexpr char kWeightsMagic[8] = {'X', 'I', 'D', 'S', 'W', 'T', 'S', '1'};

std::string loss_name(LossKind k) { return k == LossKind::SparseCategorical ? "sparse_categorical" : "categorical"; }

LossKind loss_from_string(const std::string& s) {
  if (s == "sparse_categorical") return LossKind::SparseCategorical;
  if (s == "categorical") return LossKind::Categorical;
  throw FormatError("unknown loss '" + s + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.adam.learning_rate},
          {"beta1", cfg.adam.beta1},
          {"beta2", cfg.adam.beta2},
          {"epsilon", cfg.adam.epsilon},
          {"loss", loss_name(cfg.loss)},
          {"seed", cfg.seed},
          {"shuffle", cfg.shuffle}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.adam.learning_rate = j.at("learning_rate").get<double>();
  cfg.adam.beta1 = j.at("beta1").get<double>();
  cfg.adam.beta2 = j.at("beta2").get<double>();
  cfg.adam.epsilon = j.at("epsilon").get<double>();
  cfg.loss = loss_from_string(j.at("loss").get<std::string>());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.shuffle = j.at("shuffle").get<bool>();
  return cfg;
}

void save_weights(const std::filesystem::path& path, const Sequential<double>& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto params = model.parameters();
  out.write(kWeightsMagic, sizeof kWeightsMagic);
  const std::uint64_t count = params.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const Mat<double>* p : params) {
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(p->rows()), static_cast<std::uint64_t>(p->cols())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void load_weights(const std::filesystem::path& path, Sequential<double>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kWeightsMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + " is not a weights file");
  }
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  auto params = model.parameters();
  if (!in || count != params.size()) throw FormatError("weights file holds a different number of tensors");
  for (Mat<double>* p : params) {
    std::uint64_t dims[2];
    if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw FormatError("truncated " + path.string());
    if (dims[0] != static_cast<std::uint64_t>(p->rows()) || dims[1] != static_cast<std::uint64_t>(p->cols())) {
      throw FormatError("tensor shape in " + path.string() + " does not match the model spec");
    }
    if (!in.read(reinterpret_cast<char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(double)))) {
      throw FormatError("truncated " + path.string());
    }
  }
}

void save_model_bundle(const std::filesystem::path& dir, const Sequential<double>& model, const TrainConfig& cfg,
                       const TrainHistory& history, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  nlohmann::json params = nlohmann::json::array();
  const auto names = model.parameter_names();
  const auto tensors = model.parameters();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    params.push_back({{"name", names[i]}, {"shape", {tensors[i]->rows(), tensors[i]->cols()}}});
  }
  const nlohmann::json meta = {{"format_version", kModelFormatVersion},
                               {"config_hash", config_hash},
                               {"init_seed", model.init_seed()},
                               {"spec", to_json(model.spec())},
                               {"parameters", params}};
  write_text(dir / "model.json", meta.dump(2) + "\n");
  save_weights(dir / "weights.bin", model);
  const nlohmann::json tc = {{"format_version", kModelFormatVersion}, {"config_hash", config_hash}, {"train", to_json(cfg)}};
  write_text(dir / "train_config.json", tc.dump(2) + "\n");

  std::ostringstream csv;
  csv.precision(17);
  csv << "epoch,mean_loss,accuracy,seconds\n";
  for (const auto& e : history.epochs) csv << e.epoch << ',' << e.mean_loss << ',' << e.accuracy << ',' << e.seconds << '\n';
  write_text(dir / "history.csv", csv.str());
}

ModelBundle load_model_bundle(const std::filesystem::path& dir) {
  const nlohmann::json meta = read_json(dir / "model.json");
  if (meta.at("format_version").get<int>() != kModelFormatVersion) throw FormatError("unsupported model format_version");
  Sequential<double> model(spec_from_json(meta.at("spec")), meta.at("init_seed").get<std::uint64_t>());
  load_weights(dir / "weights.bin", model);
  const nlohmann::json tc = read_json(dir / "train_config.json");
  ModelBundle bundle{std::move(model), train_config_from_json(tc.at("train")), {},
                     meta.at("config_hash").get<std::string>()};

  std::ifstream hist(dir / "history.csv");
  std::string line;
  std::getline(hist, line);
  while (std::getline(hist, line)) {
    if (line.empty()) continue;
    EpochStats e;
    char sep;
    std::istringstream row(line);
    row >> e.epoch >> sep >> e.mean_loss >> sep >> e.accuracy >> sep >> e.seconds;
    bundle.history.epochs.push_back(e);
  }
  return bundle;
}

}  // namespace xids::nn
