#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids::metrics {

XIDS_DEFINE_ERROR(LengthMismatch);
XIDS_DEFINE_ERROR(InvalidLabel);
XIDS_DEFINE_ERROR(SingleClassOnly);

// Rows are true classes, columns predicted classes.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes = 5);

struct ClassCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
};

std::vector<ClassCounts> per_class_counts(const ConfusionMatrix& cm);

// Any 0/0 ratio is reported as 0 and flagged.
struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

std::vector<ClassMetrics> class_report(std::span<const ClassCounts> counts);

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct AggregateReport {
  double accuracy = 0.0;
  std::int64_t total = 0;
  Averages macro;     // unweighted mean over classes
  Averages weighted;  // true-support-weighted mean
};

AggregateReport aggregate(std::span<const ClassMetrics> report, const ConfusionMatrix& cm);

// One-vs-rest ROC: points at every distinct score threshold, descending,
// starting at (0, 0) and ending at (1, 1).
struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;  // +inf for the leading (0, 0) point
};

RocCurve roc_curve(const Eigen::MatrixXd& scores, std::span<const int> truth, int positive_class);
RocCurve roc_curve_binary(std::span<const double> scores, std::span<const bool> positive);

// Pools every (sample, class) pair as a binary decision.
RocCurve micro_roc_curve(const Eigen::MatrixXd& scores, std::span<const int> truth);

// Trapezoid rule over the curve.
double auc(const RocCurve& curve);

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<ClassCounts> counts;
  std::vector<ClassMetrics> classes;
  AggregateReport aggregate;
  std::vector<double> auc_per_class;  // NaN-free: classes with undefined AUC are listed in auc_undefined
  std::vector<bool> auc_undefined;
  double micro_auc = 0.0;
};

EvaluationReport evaluate(const Eigen::MatrixXd& probabilities, std::span<const int> truth);

nlohmann::json to_json(const EvaluationReport& r, std::span<const std::string> class_names);

// Aligned text: overall accuracy with macro/weighted averages, then one row
// per class with P/R/F1/support and TP/FP/FN/TN.
std::string format_table(const EvaluationReport& r, std::span<const std::string> class_names,
                         const std::string& title);

std::string roc_csv(const RocCurve& curve);

}  // namespace xids::metrics
