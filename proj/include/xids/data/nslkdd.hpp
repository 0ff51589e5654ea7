#pragma once

#include <array>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "xids/data/schema.hpp"
#include "xids/error.hpp"

namespace xids::data {

XIDS_DEFINE_ERROR(FieldCountMismatch);
XIDS_DEFINE_ERROR(NonNumericDifficulty);
XIDS_DEFINE_ERROR(UnknownAttackLabel);

struct RawRecord {
  std::array<std::string, kFeatureCount> feature_values;
  std::string attack_label;
  int difficulty = 0;
  std::size_t line_no = 0;  // 1-based source line
};

// Parses comma-separated NSL-KDD text (no header, 43 fields per line). Blank
// lines are skipped; CRLF endings are accepted.
std::vector<RawRecord> parse_nslkdd(std::istream& in);
std::vector<RawRecord> parse_nslkdd(std::string_view text);
std::vector<RawRecord> read_nslkdd_file(const std::string& path);

// Five-way family of one of the 23 training labels.
AttackClass map_attack_label(std::string_view label);

}  // namespace xids::data
