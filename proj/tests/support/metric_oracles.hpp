#pragma once

// Brute-force reference implementations, computed straight from the sample
// lists without going through a confusion matrix.

#include <cstdint>
#include <span>
#include <vector>

#include "xids/random.hpp"

namespace xids::testing {

struct NaiveClass {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0, recall = 0, f1 = 0;
  std::int64_t support = 0;
};

struct NaiveReport {
  std::vector<std::vector<std::int64_t>> confusion;
  std::vector<NaiveClass> classes;
  double accuracy = 0;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  double weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
};

inline NaiveReport naive_report(std::span<const int> truth, std::span<const int> pred, int k) {
  NaiveReport r;
  const auto n = truth.size();
  r.confusion.assign(static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      for (std::size_t s = 0; s < n; ++s) {
        if (truth[s] == i && pred[s] == j) ++r.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
  }
  std::int64_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) correct += truth[s] == pred[s];
  r.accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  for (int c = 0; c < k; ++c) {
    NaiveClass m;
    for (std::size_t s = 0; s < n; ++s) {
      const bool t = truth[s] == c;
      const bool p = pred[s] == c;
      if (t && p) ++m.tp;
      if (!t && p) ++m.fp;
      if (t && !p) ++m.fn;
      if (!t && !p) ++m.tn;
    }
    m.support = m.tp + m.fn;
    m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.classes.push_back(m);
  }
  for (const auto& m : r.classes) {
    r.macro_p += m.precision / k;
    r.macro_r += m.recall / k;
    r.macro_f1 += m.f1 / k;
    if (n) {
      const double w = static_cast<double>(m.support) / static_cast<double>(n);
      r.weighted_p += w * m.precision;
      r.weighted_r += w * m.recall;
      r.weighted_f1 += w * m.f1;
    }
  }
  return r;
}

// P(score+ > score-) + 1/2 P(score+ == score-) over all positive/negative pairs.
inline double pair_counting_auc(std::span<const double> scores, std::span<const int> positive) {
  double wins = 0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// Random labels/predictions/probability-like scores; scores are rounded to
// a coarse grid on some cases so that ties occur.
struct RandomCase {
  std::vector<int> truth;
  std::vector<int> pred;
  std::vector<double> scores;  // n x k row-major
  int k = 5;
};

inline RandomCase random_case(Rng& rng, std::size_t n, int k) {
  RandomCase c;
  c.k = k;
  const bool coarse = bounded(rng, 2) == 0;
  const double accuracy = uniform01(rng);
  for (std::size_t s = 0; s < n; ++s) {
    const int t = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(k)));
    const int p = uniform01(rng) < accuracy ? t : static_cast<int>(bounded(rng, static_cast<std::uint64_t>(k)));
    c.truth.push_back(t);
    c.pred.push_back(p);
    for (int j = 0; j < k; ++j) {
      double v = uniform01(rng) + (j == t ? accuracy : 0.0);
      if (coarse) v = static_cast<double>(static_cast<int>(v * 10)) / 10.0;
      c.scores.push_back(v);
    }
  }
  return c;
}

}  // namespace xids::testing
