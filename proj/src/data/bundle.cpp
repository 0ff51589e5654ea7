#include "xids/data/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace xids::data {

static_assert(std::endian::native == std::endian::little, "bundle format assumes a little-endian host");

namespace {

constexpr char kMatrixMagic[8] = {'X', 'I', 'D', 'S', 'M', 'A', 'T', '1'};

template <class T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("truncated " + path.string());
  return value;
}

nlohmann::json distribution_json(const std::array<std::size_t, kClassCount>& counts) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < kClassCount; ++c) j[std::string(kClassNames[c])] = counts[c];
  return j;
}

std::array<std::size_t, kClassCount> distribution_from_json(const nlohmann::json& j) {
  std::array<std::size_t, kClassCount> counts{};
  for (std::size_t c = 0; c < kClassCount; ++c) counts[c] = j.at(std::string(kClassNames[c])).get<std::size_t>();
  return counts;
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != m.rows()) throw ShapeMismatch("label count differs from rows");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  const RowMatrix rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  for (const int l : labels) put<std::int32_t>(out, l);
  if (!out) throw IoError("write failed for " + path.string());
}

void read_matrix(const std::filesystem::path& path, Eigen::MatrixXd& m, std::vector<int>& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + " is not a matrix file");
  }
  const auto rows = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
  const auto cols = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
  RowMatrix rm(rows, cols);
  if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)))) {
    throw FormatError("truncated " + path.string());
  }
  m = rm;
  labels.resize(static_cast<std::size_t>(rows));
  for (auto& l : labels) l = get<std::int32_t>(in, path);
}

nlohmann::json to_json(const EncoderParams& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : p.columns) {
    j.push_back({{"feature", c.feature}, {"name", c.name}, {"categories", c.categories}});
  }
  return j;
}

nlohmann::json to_json(const ScalerParams& p) {
  return {{"min", std::vector<double>(p.min.data(), p.min.data() + p.min.size())},
          {"max", std::vector<double>(p.max.data(), p.max.data() + p.max.size())}};
}

nlohmann::json to_json(const SplitSpec& s) {
  return {{"train_fraction", s.train_fraction}, {"seed", s.seed}, {"shuffle", s.shuffle}};
}

EncoderParams encoder_from_json(const nlohmann::json& j) {
  EncoderParams p;
  for (const auto& c : j) {
    p.columns.push_back({c.at("feature").get<std::size_t>(), c.at("name").get<std::string>(),
                         c.at("categories").get<std::vector<std::string>>()});
  }
  return p;
}

ScalerParams scaler_from_json(const nlohmann::json& j) {
  const auto lo = j.at("min").get<std::vector<double>>();
  const auto hi = j.at("max").get<std::vector<double>>();
  if (lo.size() != hi.size()) throw FormatError("scaler min/max length differ");
  ScalerParams p;
  p.min = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  p.max = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return p;
}

SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train_fraction = j.at("train_fraction").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.shuffle = j.at("shuffle").get<bool>();
  return s;
}

void save_bundle(const std::filesystem::path& dir, const DatasetBundle& b) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "train.bin", b.train.matrix, b.train.labels);
  write_matrix(dir / "test.bin", b.test.matrix, b.test.labels);
  nlohmann::json side = {
      {"format_version", 1},
      {"config_hash", b.config_hash},
      {"feature_names", nslkdd_schema().names()},
      {"class_names", std::vector<std::string>(kClassNames.begin(), kClassNames.end())},
      {"encoder", to_json(b.train.encoder)},
      {"scaler", to_json(b.train.scaler)},
      {"split", to_json(b.split)},
      {"source_rows", b.source_rows},
      {"train_rows", b.train.rows()},
      {"test_rows", b.test.rows()},
      {"class_distribution",
       {{"source", distribution_json(b.full_distribution)},
        {"train", distribution_json(class_distribution(b.train.labels))},
        {"test", distribution_json(class_distribution(b.test.labels))}}},
  };
  std::ofstream out(dir / "dataset.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
  out << side.dump(2) << '\n';
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw IoError("missing " + (dir / "dataset.json").string());
  const nlohmann::json side = nlohmann::json::parse(in);
  if (side.at("format_version").get<int>() != 1) throw FormatError("unsupported dataset format_version");
  DatasetBundle b;
  b.config_hash = side.at("config_hash").get<std::string>();
  b.split = split_from_json(side.at("split"));
  b.source_rows = side.at("source_rows").get<std::size_t>();
  b.full_distribution = distribution_from_json(side.at("class_distribution").at("source"));
  for (EncodedDataset* ds : {&b.train, &b.test}) {
    ds->encoder = encoder_from_json(side.at("encoder"));
    ds->scaler = scaler_from_json(side.at("scaler"));
  }
  b.train.provenance = Provenance::Train;
  b.test.provenance = Provenance::Test;
  read_matrix(dir / "train.bin", b.train.matrix, b.train.labels);
  read_matrix(dir / "test.bin", b.test.matrix, b.test.labels);
  return b;
}

}  // namespace xids::data
