#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "xids/survey/survey.hpp"

namespace xids::survey {

int reverse_score(int response, int scale_max, bool reversed) {
  if (response < 1 || response > scale_max) {
    throw OutOfScale(std::to_string(response) + " outside 1.." + std::to_string(scale_max));
  }
  return reversed ? scale_max + 1 - response : response;
}

std::vector<std::string> missing_items(const SurveyResponse& r, const Instrument& instrument,
                                       const std::string& construct) {
  std::vector<std::string> missing;
  for (const auto* item : instrument.items_of(construct)) {
    if (!r.answers.count(item->id)) missing.push_back(item->id);
  }
  return missing;
}

bool is_complete(const SurveyResponse& r, const Instrument& instrument) {
  for (const auto& item : instrument.items) {
    if (!r.answers.count(item.id)) return false;
  }
  return true;
}

double score_construct(const SurveyResponse& r, const Instrument& instrument, const std::string& construct) {
  const auto items = instrument.items_of(construct);
  if (items.empty()) throw UnknownItem("no items for construct " + construct);
  const auto missing = missing_items(r, instrument, construct);
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ",") + id;
    throw IncompleteResponse(construct + " missing " + ids);
  }
  double sum = 0;
  for (const auto* item : items) sum += reverse_score(r.answers.at(item->id), item->scale_max, item->reverse_keyed);
  return sum / static_cast<double>(items.size());
}

double sus_score(std::span<const int> responses) {
  if (responses.size() != 10) throw WrongItemCount(std::to_string(responses.size()) + " usability items, need 10");
  int sum = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const int r = reverse_score(responses[i], 5, false);
    sum += i % 2 == 0 ? r - 1 : 5 - r;
  }
  return 2.5 * sum;
}

double sus_score(const SurveyResponse& r, const Instrument& instrument) {
  const auto items = instrument.items_of("Usability");
  if (items.size() != 10) throw WrongItemCount(std::to_string(items.size()) + " usability items, need 10");
  const auto missing = missing_items(r, instrument, "Usability");
  if (!missing.empty()) throw IncompleteResponse("Usability missing " + missing.front());
  std::vector<int> raw;
  for (const auto* item : items) raw.push_back(r.answers.at(item->id));
  return sus_score(raw);
}

AlphaReport cronbach_alpha(const Eigen::MatrixXd& responses, std::string construct) {
  const Eigen::Index n = responses.rows();
  const Eigen::Index k = responses.cols();
  if (n < 2) throw InsufficientData(std::to_string(n) + " respondents, need 2");
  if (k < 2) throw InsufficientData(std::to_string(k) + " items, need 2");
  auto sample_var = [n](const Eigen::VectorXd& v) {
    return (v.array() - v.mean()).square().sum() / static_cast<double>(n - 1);
  };
  AlphaReport a;
  a.construct = std::move(construct);
  a.respondents = n;
  a.items = k;
  double item_sum = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    a.item_variances.push_back(sample_var(responses.col(j)));
    item_sum += a.item_variances.back();
  }
  a.total_variance = sample_var(responses.rowwise().sum());
  if (!(a.total_variance > 0)) throw ZeroTotalVariance("respondent totals are identical");
  const double kd = static_cast<double>(k);
  a.alpha = kd / (kd - 1) * (1 - item_sum / a.total_variance);
  return a;
}

Eigen::MatrixXd construct_matrix(std::span<const SurveyResponse> responses, const Instrument& instrument,
                                 const std::string& construct) {
  const auto items = instrument.items_of(construct);
  std::vector<const SurveyResponse*> complete;
  for (const auto& r : responses) {
    if (missing_items(r, instrument, construct).empty()) complete.push_back(&r);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(complete.size()), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < complete.size(); ++i) {
    for (std::size_t j = 0; j < items.size(); ++j) {
      const auto* item = items[j];
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          reverse_score(complete[i]->answers.at(item->id), item->scale_max, item->reverse_keyed);
    }
  }
  return m;
}

std::vector<ItemDistribution> likert_summary(std::span<const SurveyResponse> responses, const Instrument& instrument) {
  std::vector<const SurveyResponse*> complete;
  for (const auto& r : responses) {
    if (is_complete(r, instrument)) complete.push_back(&r);
  }
  std::vector<ItemDistribution> out;
  if (complete.empty()) return out;
  for (const auto& item : instrument.items) {
    ItemDistribution d;
    d.item_id = item.id;
    d.construct = item.construct;
    d.counts.assign(static_cast<std::size_t>(item.scale_max), 0);
    for (const auto* r : complete) {
      const int v = r->answers.at(item.id);
      reverse_score(v, item.scale_max, false);
      ++d.counts[static_cast<std::size_t>(v - 1)];
    }
    d.n = static_cast<std::int64_t>(complete.size());
    for (const auto c : d.counts) d.percentages.push_back(100.0 * static_cast<double>(c) / static_cast<double>(d.n));
    out.push_back(std::move(d));
  }
  return out;
}

nlohmann::json to_json(const AlphaReport& a) {
  return {{"construct", a.construct},         {"respondents", a.respondents}, {"items", a.items},
          {"item_variances", a.item_variances}, {"total_variance", a.total_variance}, {"alpha", a.alpha}};
}

nlohmann::json to_json(const ItemDistribution& d) {
  return {{"item_id", d.item_id}, {"construct", d.construct}, {"counts", d.counts}, {"percentages", d.percentages},
          {"n", d.n}};
}

std::string format_alpha_table(std::span<const AlphaReport> reports) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "Construct" << std::right << std::setw(8) << "alpha" << std::setw(6) << "k"
     << std::setw(6) << "n" << "\n";
  for (const auto& a : reports) {
    os << std::left << std::setw(20) << a.construct << std::right << std::fixed << std::setprecision(2)
       << std::setw(8) << a.alpha << std::setw(6) << a.items << std::setw(6) << a.respondents << "\n";
  }
  return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (const char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// RFC 4180 records; tolerates a missing final newline and CRLF.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string export_csv(std::span<const SurveyResponse> responses, std::span<const Instrument> instruments) {
  std::ostringstream os;
  os << "session_id,age_band,gender,education,experience";
  for (const auto& in : instruments) {
    for (const auto& item : in.items) os << ',' << csv_field(item.id);
  }
  bool has_sus = false;
  for (const auto& in : instruments) {
    for (const auto& c : in.constructs) os << ',' << csv_field("score:" + c);
    has_sus = has_sus || in.items_of("Usability").size() == 10;
  }
  if (has_sus) os << ",sus";
  os << "\n";
  for (const auto& r : responses) {
    os << csv_field(r.session_id) << ',' << csv_field(r.demographics.age_band) << ','
       << csv_field(r.demographics.gender) << ',' << csv_field(r.demographics.education) << ','
       << csv_field(r.demographics.experience);
    for (const auto& in : instruments) {
      for (const auto& item : in.items) {
        os << ',';
        if (const auto it = r.answers.find(item.id); it != r.answers.end()) os << it->second;
      }
    }
    std::string sus;
    for (const auto& in : instruments) {
      for (const auto& c : in.constructs) {
        os << ',';
        if (missing_items(r, in, c).empty()) os << number(score_construct(r, in, c));
      }
      if (in.items_of("Usability").size() == 10 && missing_items(r, in, "Usability").empty()) {
        sus = number(sus_score(r, in));
      }
    }
    if (has_sus) os << ',' << sus;
    os << "\n";
  }
  return os.str();
}

std::vector<SurveyResponse> responses_from_csv(const std::string& text, std::span<const Instrument> instruments) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("empty CSV");
  const auto& header = rows.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  if (!col.count("session_id")) throw FormatError("CSV has no session_id column");
  std::vector<SurveyResponse> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw FormatError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields, header " +
                        std::to_string(header.size()));
    }
    auto cell = [&](const char* name) -> std::string {
      const auto it = col.find(name);
      return it == col.end() ? std::string() : row[it->second];
    };
    SurveyResponse resp;
    resp.session_id = cell("session_id");
    resp.demographics = {cell("age_band"), cell("gender"), cell("education"), cell("experience")};
    for (const auto& in : instruments) {
      for (const auto& item : in.items) {
        const auto it = col.find(item.id);
        if (it == col.end() || row[it->second].empty()) continue;
        const std::string& s = row[it->second];
        std::size_t used = 0;
        int v = 0;
        try {
          v = std::stoi(s, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != s.size() || used == 0) throw FormatError(item.id + ": not an integer: " + s);
        validate_answer(instruments, item.id, v);
        resp.answers[item.id] = v;
      }
    }
    out.push_back(std::move(resp));
  }
  return out;
}

AlphaSet alpha_by_construct(std::span<const SurveyResponse> responses, std::span<const Instrument> instruments) {
  AlphaSet set;
  for (const auto& in : instruments) {
    for (const auto& c : in.constructs) {
      const Eigen::MatrixXd m = construct_matrix(responses, in, c);
      if (m.cols() < 2) {
        set.skipped.emplace_back(c, "single item");
      } else if (m.rows() < 2) {
        set.skipped.emplace_back(c, "insufficient n");
      } else {
        try {
          set.reports.push_back(cronbach_alpha(m, c));
        } catch (const ZeroTotalVariance&) {
          set.skipped.emplace_back(c, "zero total variance");
        }
      }
    }
  }
  return set;
}

}  // namespace xids::survey
