#include "xids/data/nslkdd.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace xids::data {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

std::vector<RawRecord> parse_nslkdd(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  fields.reserve(kColumnCount);
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;

    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      fields.push_back(trim(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != kColumnCount) {
      throw FieldCountMismatch("line " + std::to_string(line_no) + ": found " +
                               std::to_string(fields.size()) + " fields, expected 43");
    }

    RawRecord rec;
    rec.line_no = line_no;
    for (std::size_t i = 0; i < kFeatureCount; ++i) rec.feature_values[i] = std::string(fields[i]);
    rec.attack_label = std::string(fields[41]);
    if (rec.attack_label.empty()) {
      throw FieldCountMismatch("line " + std::to_string(line_no) + ": empty attack label");
    }
    const std::string_view diff = fields[42];
    const auto [ptr, ec] = std::from_chars(diff.data(), diff.data() + diff.size(), rec.difficulty);
    if (ec != std::errc() || ptr != diff.data() + diff.size()) {
      throw NonNumericDifficulty("line " + std::to_string(line_no) + ": '" + std::string(diff) + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RawRecord> parse_nslkdd(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_nslkdd(in);
}

std::vector<RawRecord> read_nslkdd_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_nslkdd(in);
}

AttackClass map_attack_label(std::string_view label) {
  static const std::unordered_map<std::string_view, AttackClass> table = {
      {"back", AttackClass::DoS},           {"land", AttackClass::DoS},
      {"neptune", AttackClass::DoS},        {"pod", AttackClass::DoS},
      {"smurf", AttackClass::DoS},          {"teardrop", AttackClass::DoS},
      {"ipsweep", AttackClass::Probe},      {"nmap", AttackClass::Probe},
      {"portsweep", AttackClass::Probe},    {"satan", AttackClass::Probe},
      {"ftp_write", AttackClass::R2L},      {"guess_passwd", AttackClass::R2L},
      {"imap", AttackClass::R2L},           {"multihop", AttackClass::R2L},
      {"phf", AttackClass::R2L},            {"spy", AttackClass::R2L},
      {"warezclient", AttackClass::R2L},    {"warezmaster", AttackClass::R2L},
      {"buffer_overflow", AttackClass::U2R}, {"loadmodule", AttackClass::U2R},
      {"perl", AttackClass::U2R},           {"rootkit", AttackClass::U2R},
      {"normal", AttackClass::Normal},
  };
  const auto it = table.find(label);
  if (it == table.end()) throw UnknownAttackLabel("'" + std::string(label) + "'");
  return it->second;
}

}  // namespace xids::data
