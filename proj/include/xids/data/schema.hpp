#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xids::data {

inline constexpr std::size_t kFeatureCount = 41;
inline constexpr std::size_t kColumnCount = 43;
inline constexpr std::size_t kClassCount = 5;

enum class FeatureKind { Numeric, Categorical };

struct FeatureDef {
  std::string name;
  FeatureKind kind;
};

// Column layout of an NSL-KDD record: 41 features, the attack label, then the
// difficulty score.
struct FeatureSchema {
  std::vector<FeatureDef> features;
  std::size_t label_position = 41;
  std::size_t difficulty_position = 42;

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::size_t> categorical_indices() const;
  std::vector<std::string> names() const;

  // Throws FormatError if the invariants (41 unique names, categorical set
  // {protocol_type, service, flag}) do not hold.
  void validate() const;
};

const FeatureSchema& nslkdd_schema();

enum class AttackClass : int { DoS = 0, Probe = 1, R2L = 2, U2R = 3, Normal = 4 };

inline constexpr std::array<std::string_view, kClassCount> kClassNames = {
    "DoS", "Probe", "R2L", "U2R", "Normal"};

inline std::string_view class_name(int code) {
  return kClassNames.at(static_cast<std::size_t>(code));
}

}  // namespace xids::data
