#include <cmath>

#include "doctest.h"
#include "xids/random.hpp"
#include "xids/survey/survey.hpp"

using namespace xids;
using namespace xids::survey;

namespace {

Instrument ten_items() {
  Instrument in;
  in.id = "t";
  for (int i = 0; i < 10; ++i) {
    in.items.push_back({"i" + std::to_string(i), "C", "", i == 1 || i == 3 || i == 6 || i == 9, 5});
  }
  validate(in);
  return in;
}

SurveyResponse answer_all(const std::string& id, const Instrument& in, Rng& rng) {
  SurveyResponse r;
  r.session_id = id;
  for (const auto& item : in.items) r.answers[item.id] = 1 + static_cast<int>(bounded(rng, 5));
  return r;
}

}  // namespace

TEST_CASE("reverse scoring") {
  CHECK(reverse_score(5, 5) == 1);
  CHECK(reverse_score(3, 5) == 3);
  CHECK(reverse_score(2, 5, false) == 2);
  for (int m = 2; m <= 9; ++m) {
    for (int r = 1; r <= m; ++r) {
      const int once = reverse_score(r, m);
      CHECK(once >= 1);
      CHECK(once <= m);
      CHECK(reverse_score(once, m) == r);
    }
  }
  CHECK_THROWS_AS(reverse_score(0, 5), OutOfScale);
  CHECK_THROWS_AS(reverse_score(6, 5), OutOfScale);
}

TEST_CASE("construct scores") {
  Instrument two;
  two.id = "two";
  two.items = {{"a", "C", "", false, 5}, {"b", "C", "", true, 5}};
  validate(two);
  SurveyResponse r;
  r.answers = {{"a", 5}, {"b", 1}};
  CHECK(score_construct(r, two, "C") == 5.0);
  r.answers = {{"a", 4}, {"b", 2}};
  CHECK(score_construct(r, two, "C") == 4.0);

  // Hand computation in tests/oracles/derive.py.
  const Instrument ten = ten_items();
  const int raw[] = {5, 2, 4, 1, 3, 4, 2, 5, 3, 1};
  SurveyResponse m;
  for (int i = 0; i < 10; ++i) m.answers["i" + std::to_string(i)] = raw[i];
  CHECK(std::abs(score_construct(m, ten, "C") - 4.2) <= 1e-12);

  // Item order within the construct does not matter.
  Instrument shuffled = ten;
  Rng rng(3);
  shuffle(std::span<LikertItem>(shuffled.items), rng);
  CHECK(std::abs(score_construct(m, shuffled, "C") - 4.2) <= 1e-12);

  m.answers.erase("i3");
  m.answers.erase("i7");
  try {
    score_construct(m, ten, "C");
    FAIL("expected IncompleteResponse");
  } catch (const IncompleteResponse& e) {
    CHECK(std::string(e.what()).find("i3,i7") != std::string::npos);
  }
  CHECK_THROWS_AS(score_construct(m, ten, "nope"), UnknownItem);
}

TEST_CASE("SUS") {
  CHECK(sus_score(std::vector<int>{5, 1, 5, 1, 5, 1, 5, 1, 5, 1}) == 100.0);
  CHECK(sus_score(std::vector<int>(10, 3)) == 50.0);
  CHECK(sus_score(std::vector<int>{4, 2, 4, 2, 4, 2, 4, 2, 4, 2}) == 75.0);
  CHECK(sus_score(std::vector<int>{4, 2, 5, 1, 3, 2, 4, 3, 5, 1}) == 80.0);
  CHECK_THROWS_AS(sus_score(std::vector<int>(9, 3)), WrongItemCount);
  CHECK_THROWS_AS(sus_score(std::vector<int>{0, 2, 4, 2, 4, 2, 4, 2, 4, 2}), OutOfScale);

  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    std::vector<int> r(10), mirror(10);
    for (int i = 0; i < 10; ++i) {
      r[i] = 1 + static_cast<int>(bounded(rng, 5));
      mirror[i] = 6 - r[i];
    }
    const double s = sus_score(r);
    CHECK(s >= 0);
    CHECK(s <= 100);
    CHECK(s + sus_score(mirror) == 100.0);
  }

  // Instrument form agrees with the raw form.
  const auto defaults = default_instruments();
  const Instrument& post = defaults[1];
  SurveyResponse resp;
  const int raw[] = {4, 2, 5, 1, 3, 2, 4, 3, 5, 1};
  for (int i = 0; i < 10; ++i) resp.answers["sus" + std::to_string(i + 1)] = raw[i];
  CHECK(sus_score(resp, post) == 80.0);
  // SUS = (mean adjusted - 1) * 25 for the same items.
  CHECK(std::abs(sus_score(resp, post) - (score_construct(resp, post, "Usability") - 1) * 25) <= 1e-12);
}

TEST_CASE("cronbach alpha") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 2, 3, 3, 4;
  CHECK(std::abs(cronbach_alpha(m).alpha - 1.0) <= 1e-12);

  Eigen::MatrixXd same(5, 4);
  for (int i = 0; i < 5; ++i) same.row(i).setConstant(1 + (i * 3) % 5);
  CHECK(std::abs(cronbach_alpha(same).alpha - 1.0) <= 1e-12);

  // Spreadsheet oracle (tests/oracles/derive.py): 84/131.
  Eigen::MatrixXd h(4, 3);
  h << 1, 3, 2, 4, 2, 5, 3, 4, 3, 5, 5, 4;
  const AlphaReport a = cronbach_alpha(h, "hand");
  CHECK(std::abs(a.alpha - 84.0 / 131.0) <= 1e-9);
  CHECK(std::abs(a.item_variances[0] - 35.0 / 12.0) <= 1e-12);
  CHECK(std::abs(a.item_variances[1] - 5.0 / 3.0) <= 1e-12);
  CHECK(std::abs(a.total_variance - 131.0 / 12.0) <= 1e-12);
  CHECK(a.items == 3);
  CHECK(a.respondents == 4);
  CHECK(a.construct == "hand");

  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd r(6 + static_cast<Eigen::Index>(bounded(rng, 10)), 2 + static_cast<Eigen::Index>(bounded(rng, 6)));
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = 1 + static_cast<double>(bounded(rng, 5));
    AlphaReport base;
    try {
      base = cronbach_alpha(r);
    } catch (const ZeroTotalVariance&) {
      continue;
    }
    CHECK(base.alpha <= 1.0 + 1e-12);
    // respondent relabeling
    const auto order = shuffled_indices(static_cast<std::size_t>(r.rows()), rng);
    Eigen::MatrixXd p(r.rows(), r.cols());
    for (std::size_t i = 0; i < order.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = r.row(static_cast<Eigen::Index>(order[i]));
    CHECK(std::abs(cronbach_alpha(p).alpha - base.alpha) <= 1e-12);
    // common affine rescaling
    const Eigen::MatrixXd s = (r.array() * 2.5 - 7.0).matrix();
    CHECK(std::abs(cronbach_alpha(s).alpha - base.alpha) <= 1e-10);
  }

  CHECK_THROWS_AS(cronbach_alpha(Eigen::MatrixXd::Ones(1, 3)), InsufficientData);
  CHECK_THROWS_AS(cronbach_alpha(Eigen::MatrixXd::Ones(3, 1)), InsufficientData);
  CHECK_THROWS_AS(cronbach_alpha(Eigen::MatrixXd::Ones(3, 3)), ZeroTotalVariance);
}

TEST_CASE("likert summary") {
  const auto defaults = default_instruments();
  const Instrument& post = defaults[1];
  CHECK(likert_summary({}, post).empty());

  SurveyResponse one;
  for (const auto& item : post.items) one.answers[item.id] = 4;
  const auto single = likert_summary(std::span(&one, 1), post);
  REQUIRE(single.size() == post.items.size());
  CHECK(single[0].counts == std::vector<std::int64_t>{0, 0, 0, 1, 0});

  Rng rng(15);
  std::vector<SurveyResponse> rs;
  for (int i = 0; i < 15; ++i) rs.push_back(answer_all("s" + std::to_string(i), post, rng));
  SurveyResponse partial = rs[0];
  partial.answers.erase("sus4");
  rs.push_back(partial);  // excluded
  const auto dist = likert_summary(rs, post);
  for (std::size_t j = 0; j < post.items.size(); ++j) {
    CHECK(dist[j].n == 15);
    double pct = 0;
    for (int v = 1; v <= 5; ++v) {
      std::int64_t naive = 0;
      for (int i = 0; i < 15; ++i) naive += rs[static_cast<std::size_t>(i)].answers.at(post.items[j].id) == v;
      CHECK(dist[j].counts[static_cast<std::size_t>(v - 1)] == naive);
      pct += dist[j].percentages[static_cast<std::size_t>(v - 1)];
    }
    CHECK(std::abs(pct - 100.0) <= 1e-9);
  }
}

TEST_CASE("default instruments") {
  const auto defaults = default_instruments();
  REQUIRE(defaults.size() == 2);
  const Instrument& ipip = defaults[0];
  CHECK(ipip.items.size() == 24);
  CHECK(ipip.constructs.size() == 6);
  for (const auto& c : ipip.constructs) CHECK(ipip.items_of(c).size() == 4);
  const Instrument& post = defaults[1];
  CHECK(post.constructs == std::vector<std::string>{"Trust", "Reliability", "Usability"});
  CHECK(post.items_of("Usability").size() == 10);

  const auto back = instruments_from_json(instruments_to_json(defaults));
  CHECK(instruments_to_json(back) == instruments_to_json(defaults));

  CHECK_THROWS_AS(validate_answer(defaults, "sus1", 6), OutOfScale);
  CHECK_THROWS_AS(validate_answer(defaults, "sus11", 3), UnknownItem);
  CHECK_NOTHROW(validate_answer(defaults, "ipip_hh4", 1));

  nlohmann::json bad = instruments_to_json(defaults);
  bad["instruments"][1]["items"][0]["id"] = "ipip_ext1";
  CHECK_THROWS_AS(instruments_from_json(bad), InvalidInstrument);
  bad = instruments_to_json(defaults);
  bad["instruments"][0]["items"][0].erase("construct");
  CHECK_THROWS_AS(instruments_from_json(bad), FormatError);
}

TEST_CASE("export and alpha from CSV") {
  const auto defaults = default_instruments();
  Rng rng(21);
  std::vector<SurveyResponse> rs;
  for (int i = 0; i < 5; ++i) {
    SurveyResponse r = answer_all("s" + std::to_string(i), defaults[1], rng);
    for (const auto& item : defaults[0].items) r.answers[item.id] = 1 + static_cast<int>(bounded(rng, 5));
    r.demographics = {"25-34", "female", "MSc, security", "expert \"red team\""};
    rs.push_back(std::move(r));
  }
  rs[4].answers.erase("trust2");

  const std::string csv = export_csv(rs, defaults);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  const auto back = responses_from_csv(csv, defaults);
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].session_id == rs[i].session_id);
    CHECK(back[i].answers == rs[i].answers);
    CHECK(back[i].demographics.education == "MSc, security");
    CHECK(back[i].demographics.experience == "expert \"red team\"");
  }
  CHECK(export_csv(back, defaults) == csv);

  const AlphaSet set = alpha_by_construct(back, defaults);
  for (const auto& a : set.reports) {
    for (const auto& in : defaults) {
      if (in.items_of(a.construct).empty()) continue;
      const Eigen::MatrixXd m = construct_matrix(rs, in, a.construct);
      CHECK(a.alpha == cronbach_alpha(m).alpha);
      CHECK(a.respondents == (a.construct == "Trust" ? 4 : 5));
    }
  }
  CHECK(set.reports.size() + set.skipped.size() == 9);
  CHECK(format_alpha_table(set.reports).find("Reliability") != std::string::npos);

  CHECK_THROWS_AS(responses_from_csv("session_id,sus1\ns1,7\n", defaults), OutOfScale);
  CHECK_THROWS_AS(responses_from_csv("session_id,sus1\ns1,x\n", defaults), FormatError);
  CHECK_THROWS_AS(responses_from_csv("session_id,sus1\ns1\n", defaults), FormatError);
  CHECK_THROWS_AS(responses_from_csv("id,sus1\ns1,3\n", defaults), FormatError);
}
