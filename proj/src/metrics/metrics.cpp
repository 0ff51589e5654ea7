#include "xids/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

namespace xids::metrics {

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) {
    throw LengthMismatch(std::to_string(truth.size()) + " true vs " + std::to_string(predicted.size()) + " predicted");
  }
  ConfusionMatrix cm = ConfusionMatrix::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      throw InvalidLabel("sample " + std::to_string(i) + ": (" + std::to_string(t) + ", " + std::to_string(p) + ")");
    }
    ++cm(t, p);
  }
  return cm;
}

std::vector<ClassCounts> per_class_counts(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.sum();
  std::vector<ClassCounts> out(static_cast<std::size_t>(cm.rows()));
  for (Eigen::Index c = 0; c < cm.rows(); ++c) {
    ClassCounts& k = out[static_cast<std::size_t>(c)];
    k.tp = cm(c, c);
    k.fp = cm.col(c).sum() - k.tp;
    k.fn = cm.row(c).sum() - k.tp;
    k.tn = total - k.tp - k.fp - k.fn;
  }
  return out;
}

std::vector<ClassMetrics> class_report(std::span<const ClassCounts> counts) {
  std::vector<ClassMetrics> out;
  out.reserve(counts.size());
  for (const auto& k : counts) {
    ClassMetrics m;
    m.support = k.tp + k.fn;
    if (k.tp + k.fp > 0) {
      m.precision = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fp);
    } else {
      m.precision_undefined = true;
    }
    if (k.tp + k.fn > 0) {
      m.recall = static_cast<double>(k.tp) / static_cast<double>(k.tp + k.fn);
    } else {
      m.recall_undefined = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
      m.f1_undefined = true;
    }
    out.push_back(m);
  }
  return out;
}

AggregateReport aggregate(std::span<const ClassMetrics> report, const ConfusionMatrix& cm) {
  AggregateReport a;
  a.total = cm.sum();
  a.accuracy = a.total > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(a.total) : 0.0;
  if (report.empty()) return a;
  const double k = static_cast<double>(report.size());
  std::int64_t support = 0;
  for (const auto& m : report) {
    a.macro.precision += m.precision / k;
    a.macro.recall += m.recall / k;
    a.macro.f1 += m.f1 / k;
    support += m.support;
  }
  if (support > 0) {
    for (const auto& m : report) {
      const double w = static_cast<double>(m.support) / static_cast<double>(support);
      a.weighted.precision += w * m.precision;
      a.weighted.recall += w * m.recall;
      a.weighted.f1 += w * m.f1;
    }
  }
  return a;
}

RocCurve roc_curve_binary(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw LengthMismatch("scores and labels differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw SingleClassOnly("ROC needs both positive and negative samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.fpr.push_back(0.0);
  c.tpr.push_back(0.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (positive[order[k]]) {
      ++tp;
    } else {
      ++fp;
    }
    const bool last_of_threshold = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (last_of_threshold) {
      c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
      c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
      c.thresholds.push_back(scores[order[k]]);
    }
  }
  return c;
}

RocCurve roc_curve(const Eigen::MatrixXd& scores, std::span<const int> truth, int positive_class) {
  if (static_cast<Eigen::Index>(truth.size()) != scores.rows()) throw LengthMismatch("scores and labels differ in length");
  if (positive_class < 0 || positive_class >= scores.cols()) throw InvalidLabel("class out of range");
  std::vector<double> s(truth.size());
  std::unique_ptr<bool[]> pos(new bool[truth.size()]);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s[i] = scores(static_cast<Eigen::Index>(i), positive_class);
    pos[i] = truth[i] == positive_class;
  }
  return roc_curve_binary(s, std::span<const bool>(pos.get(), truth.size()));
}

RocCurve micro_roc_curve(const Eigen::MatrixXd& scores, std::span<const int> truth) {
  if (static_cast<Eigen::Index>(truth.size()) != scores.rows()) throw LengthMismatch("scores and labels differ in length");
  const std::size_t n = truth.size() * static_cast<std::size_t>(scores.cols());
  std::vector<double> s;
  s.reserve(n);
  std::unique_ptr<bool[]> pos(new bool[n]);
  std::size_t k = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      s.push_back(scores(static_cast<Eigen::Index>(i), c));
      pos[k++] = truth[i] == c;
    }
  }
  return roc_curve_binary(s, std::span<const bool>(pos.get(), n));
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i) {
    area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) / 2.0;
  }
  return area;
}

EvaluationReport evaluate(const Eigen::MatrixXd& probabilities, std::span<const int> truth) {
  if (static_cast<Eigen::Index>(truth.size()) != probabilities.rows()) {
    throw LengthMismatch(std::to_string(truth.size()) + " labels for " + std::to_string(probabilities.rows()) +
                         " score rows");
  }
  EvaluationReport r;
  const int classes = static_cast<int>(probabilities.cols());
  std::vector<int> predicted(truth.size());
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probabilities.cols(); ++c) {
      if (probabilities(i, c) > probabilities(i, best)) best = c;
    }
    predicted[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  r.confusion = confusion_matrix(truth, predicted, classes);
  r.counts = per_class_counts(r.confusion);
  r.classes = class_report(r.counts);
  r.aggregate = aggregate(r.classes, r.confusion);
  for (int c = 0; c < classes; ++c) {
    try {
      r.auc_per_class.push_back(auc(roc_curve(probabilities, truth, c)));
      r.auc_undefined.push_back(false);
    } catch (const SingleClassOnly&) {
      r.auc_per_class.push_back(0.0);
      r.auc_undefined.push_back(true);
    }
  }
  r.micro_auc = auc(micro_roc_curve(probabilities, truth));
  return r;
}

nlohmann::json to_json(const EvaluationReport& r, std::span<const std::string> class_names) {
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(row);
  }
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& m = r.classes[c];
    const auto& k = r.counts[c];
    nlohmann::json undefined = nlohmann::json::array();
    if (m.precision_undefined) undefined.push_back("precision");
    if (m.recall_undefined) undefined.push_back("recall");
    if (m.f1_undefined) undefined.push_back("f1");
    if (r.auc_undefined[c]) undefined.push_back("auc");
    classes.push_back({{"class", c},
                       {"name", c < class_names.size() ? class_names[c] : std::to_string(c)},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"tp", k.tp},
                       {"fp", k.fp},
                       {"fn", k.fn},
                       {"tn", k.tn},
                       {"auc", r.auc_per_class[c]},
                       {"undefined", undefined}});
  }
  const auto& a = r.aggregate;
  return {{"accuracy", a.accuracy},
          {"total", a.total},
          {"macro", {{"precision", a.macro.precision}, {"recall", a.macro.recall}, {"f1", a.macro.f1}}},
          {"weighted", {{"precision", a.weighted.precision}, {"recall", a.weighted.recall}, {"f1", a.weighted.f1}}},
          {"micro_auc", r.micro_auc},
          {"classes", classes},
          {"confusion_matrix", confusion}};
}

std::string format_table(const EvaluationReport& r, std::span<const std::string> class_names,
                         const std::string& title) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  const auto& a = r.aggregate;
  out << title << "\n";
  out << std::left << std::setw(10) << "Accuracy" << std::setw(12) << "Macro P" << std::setw(12) << "Macro R"
      << std::setw(12) << "Macro F1" << std::setw(12) << "Wtd P" << std::setw(12) << "Wtd R" << std::setw(12)
      << "Wtd F1" << "\n";
  out << std::setw(10) << a.accuracy << std::setw(12) << a.macro.precision << std::setw(12) << a.macro.recall
      << std::setw(12) << a.macro.f1 << std::setw(12) << a.weighted.precision << std::setw(12) << a.weighted.recall
      << std::setw(12) << a.weighted.f1 << "\n\n";
  out << std::setw(10) << "Class" << std::setw(11) << "Precision" << std::setw(11) << "Recall" << std::setw(11)
      << "F1" << std::setw(9) << "Support" << std::setw(9) << "TP" << std::setw(9) << "FP" << std::setw(9) << "FN"
      << std::setw(9) << "TN" << "AUC\n";
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& m = r.classes[c];
    const auto& k = r.counts[c];
    out << std::setw(10) << (c < class_names.size() ? class_names[c] : std::to_string(c)) << std::setw(11)
        << m.precision << std::setw(11) << m.recall << std::setw(11) << m.f1 << std::setw(9) << m.support
        << std::setw(9) << k.tp << std::setw(9) << k.fp << std::setw(9) << k.fn << std::setw(9) << k.tn;
    if (r.auc_undefined[c]) {
      out << "n/a";
    } else {
      out << r.auc_per_class[c];
    }
    if (m.precision_undefined || m.recall_undefined) out << "  (0/0 reported as 0)";
    out << "\n";
  }
  return out.str();
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    if (std::isinf(curve.thresholds[i])) {
      out << "inf";
    } else {
      out << curve.thresholds[i];
    }
    out << ',' << curve.fpr[i] << ',' << curve.tpr[i] << '\n';
  }
  return out.str();
}

}  // namespace xids::metrics
