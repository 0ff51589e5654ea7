#include "xids/data/schema.hpp"

#include <algorithm>
#include <set>

#include "xids/error.hpp"

namespace xids::data {

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> FeatureSchema::categorical_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].kind == FeatureKind::Categorical) out.push_back(i);
  }
  return out;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

void FeatureSchema::validate() const {
  if (features.size() != kFeatureCount) {
    throw FormatError("schema has " + std::to_string(features.size()) + " features, expected 41");
  }
  std::set<std::string> seen;
  std::set<std::string> categorical;
  for (const auto& f : features) {
    if (!seen.insert(f.name).second) throw FormatError("duplicate feature name " + f.name);
    if (f.kind == FeatureKind::Categorical) categorical.insert(f.name);
  }
  if (categorical != std::set<std::string>{"protocol_type", "service", "flag"}) {
    throw FormatError("categorical features must be exactly protocol_type, service, flag");
  }
}

const FeatureSchema& nslkdd_schema() {
  static const FeatureSchema schema = [] {
    constexpr auto N = FeatureKind::Numeric;
    constexpr auto C = FeatureKind::Categorical;
    FeatureSchema s;
    s.features = {
        {"duration", N},
        {"protocol_type", C},
        {"service", C},
        {"flag", C},
        {"src_bytes", N},
        {"dst_bytes", N},
        {"land", N},
        {"wrong_fragment", N},
        {"urgent", N},
        {"hot", N},
        {"num_failed_logins", N},
        {"logged_in", N},
        {"num_compromised", N},
        {"root_shell", N},
        {"su_attempted", N},
        {"num_root", N},
        {"num_file_creations", N},
        {"num_shells", N},
        {"num_access_files", N},
        {"num_outbound_cmds", N},
        {"is_host_login", N},
        {"is_guest_login", N},
        {"count", N},
        {"srv_count", N},
        {"serror_rate", N},
        {"srv_serror_rate", N},
        {"rerror_rate", N},
        {"srv_rerror_rate", N},
        {"same_srv_rate", N},
        {"diff_srv_rate", N},
        {"srv_diff_host_rate", N},
        {"dst_host_count", N},
        {"dst_host_srv_count", N},
        {"dst_host_same_srv_rate", N},
        {"dst_host_diff_srv_rate", N},
        {"dst_host_same_src_port_rate", N},
        {"dst_host_srv_diff_host_rate", N},
        {"dst_host_serror_rate", N},
        {"dst_host_srv_serror_rate", N},
        {"dst_host_rerror_rate", N},
        {"dst_host_srv_rerror_rate", N},
    };
    s.validate();
    return s;
  }();
  return schema;
}

}  // namespace xids::data
