#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids::survey {

XIDS_DEFINE_ERROR(OutOfScale);
XIDS_DEFINE_ERROR(IncompleteResponse);
XIDS_DEFINE_ERROR(WrongItemCount);
XIDS_DEFINE_ERROR(ZeroTotalVariance);
XIDS_DEFINE_ERROR(InsufficientData);
XIDS_DEFINE_ERROR(UnknownItem);
XIDS_DEFINE_ERROR(InvalidInstrument);

struct LikertItem {
  std::string id;
  std::string construct;
  std::string text;
  bool reverse_keyed = false;
  int scale_max = 5;
};

struct Instrument {
  std::string id;
  std::string title;
  std::vector<LikertItem> items;        // presentation order
  std::vector<std::string> constructs;  // first-appearance order

  const LikertItem* find(const std::string& item_id) const;
  std::vector<const LikertItem*> items_of(const std::string& construct) const;
};

// Checks ids are unique and non-empty, scale_max >= 2, and rebuilds the
// construct list from the items.
void validate(Instrument& instrument);

nlohmann::json to_json(const Instrument& instrument);
Instrument instrument_from_json(const nlohmann::json& j);

// Mini-IPIP6 (24 items, six traits) and the post-interaction survey (Trust,
// Reliability, Usability as the ten SUS items). Item texts are placeholders.
std::vector<Instrument> default_instruments();

nlohmann::json instruments_to_json(std::span<const Instrument> instruments);
std::vector<Instrument> instruments_from_json(const nlohmann::json& j);

// Searches every instrument; nullptr when absent.
const LikertItem* find_item(std::span<const Instrument> instruments, const std::string& item_id);

// Throws UnknownItem or OutOfScale.
void validate_answer(std::span<const Instrument> instruments, const std::string& item_id, int value);

struct Demographics {
  std::string age_band;
  std::string gender;
  std::string education;
  std::string experience;
};

nlohmann::json to_json(const Demographics& d);
Demographics demographics_from_json(const nlohmann::json& j);

struct SurveyResponse {
  std::string session_id;
  Demographics demographics;
  std::map<std::string, int> answers;  // item id -> raw response
};

// (m + 1) - r when reversed; throws OutOfScale unless 1 <= r <= m.
int reverse_score(int response, int scale_max, bool reversed = true);

// Item ids of `construct` with no answer.
std::vector<std::string> missing_items(const SurveyResponse& r, const Instrument& instrument,
                                       const std::string& construct);
bool is_complete(const SurveyResponse& r, const Instrument& instrument);

// Mean of reverse-adjusted responses; IncompleteResponse lists missing ids.
double score_construct(const SurveyResponse& r, const Instrument& instrument, const std::string& construct);

// Ten raw responses in SUS order: odd items contribute r - 1, even items 5 - r.
double sus_score(std::span<const int> responses);

// SUS for the instrument's Usability items.
double sus_score(const SurveyResponse& r, const Instrument& instrument);

struct AlphaReport {
  std::string construct;
  Eigen::Index respondents = 0;
  Eigen::Index items = 0;
  std::vector<double> item_variances;
  double total_variance = 0.0;
  double alpha = 0.0;
};

// Rows are respondents, columns items, reverse adjustment already applied.
// Sample variances (n - 1). InsufficientData for n < 2 or k < 2.
AlphaReport cronbach_alpha(const Eigen::MatrixXd& responses, std::string construct = {});

// Reverse-adjusted n x k matrix of the responses that answered every item of
// the construct, in item order.
Eigen::MatrixXd construct_matrix(std::span<const SurveyResponse> responses, const Instrument& instrument,
                                 const std::string& construct);

struct ItemDistribution {
  std::string item_id;
  std::string construct;
  std::vector<std::int64_t> counts;  // index 0 is scale point 1
  std::vector<double> percentages;
  std::int64_t n = 0;
};

// Counts over responses complete for the instrument; empty when none are.
std::vector<ItemDistribution> likert_summary(std::span<const SurveyResponse> responses, const Instrument& instrument);

nlohmann::json to_json(const AlphaReport& a);
nlohmann::json to_json(const ItemDistribution& d);

// Construct / alpha table with k and n columns.
std::string format_alpha_table(std::span<const AlphaReport> reports);

// One row per response: session_id, demographics, every item of every
// instrument (blank when unanswered), then each construct score and SUS
// (blank when the construct is incomplete).
std::string export_csv(std::span<const SurveyResponse> responses, std::span<const Instrument> instruments);

// Reads answers back from export_csv output (or any CSV with a session_id
// column and item-id columns); unknown columns are ignored.
std::vector<SurveyResponse> responses_from_csv(const std::string& text, std::span<const Instrument> instruments);

// Alpha for every construct with at least two items and two complete
// respondents; the rest are reported in `skipped` with a reason.
struct AlphaSet {
  std::vector<AlphaReport> reports;
  std::vector<std::pair<std::string, std::string>> skipped;  // construct, reason
};

AlphaSet alpha_by_construct(std::span<const SurveyResponse> responses, std::span<const Instrument> instruments);

}  // namespace xids::survey
