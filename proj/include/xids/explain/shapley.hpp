#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xids/error.hpp"

namespace xids::explain {

XIDS_DEFINE_ERROR(DegenerateCoalition);
XIDS_DEFINE_ERROR(ModelEvaluationFailure);
XIDS_DEFINE_ERROR(InsufficientCoalitions);
XIDS_DEFINE_ERROR(TooManyFeatures);
XIDS_DEFINE_ERROR(EmptyAttributionSet);

// Maps R x M feature rows to R x K class scores. Must tolerate concurrent
// calls when used with explain_batch(threads > 1).
using ModelFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// Coalition mask: true = feature taken from the explained instance.
using Mask = std::vector<bool>;

// (M - 1) / (C(M, s) * s * (M - s)) for 0 < s < M; throws
// DegenerateCoalition for s in {0, M}.
double shapley_kernel_weight(int features, int size);

// Interventional expectation: features in the coalition take x's values,
// the rest come from each background row; returns the mean model output
// over the background rows (one entry per class). The full coalition
// evaluates the model on x directly.
Eigen::VectorXd masked_prediction(const ModelFn& model, const Eigen::VectorXd& x, const Mask& coalition,
                                  const Eigen::MatrixXd& background);

double masked_prediction(const ModelFn& model, const Eigen::VectorXd& x, const Mask& coalition,
                         const Eigen::MatrixXd& background, int class_index);

struct Attribution {
  int class_index = 0;
  double base_value = 0.0;  // expected output over the background
  Eigen::VectorXd phi;      // one value per feature
  double prediction = 0.0;  // model output at x
};

struct InstanceExplanation {
  std::string instance_id;
  Eigen::VectorXd features;
  int true_label = -1;
  int predicted_label = -1;
  std::vector<Attribution> classes;  // one per model output
  int coalitions = 0;                // coalitions evaluated
  bool exact = false;                // every coalition was enumerated
  bool ridge_fallback = false;       // normal equations were singular
};

struct KernelShapOptions {
  int n_coalitions = 2048;
  std::uint64_t seed = 0;
  Eigen::Index eval_rows = 8192;  // rows per model call
};

// Kernel SHAP for every output class at once. Features whose value in x
// matches every background row get phi = 0 and are left out of the
// regression. When all 2^M - 2 proper coalitions fit in the budget they are
// enumerated (exact Shapley values); otherwise whole coalition sizes are
// enumerated from the outside in while the budget allows and the rest is
// filled by paired sampling. The weighted least-squares fit enforces
// base_value + sum(phi) = prediction exactly.
InstanceExplanation kernel_shap_all(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                                    const KernelShapOptions& options);

Attribution kernel_shap(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                        int class_index, const KernelShapOptions& options);

// Shapley values by enumerating all 2^M coalitions; M <= 12.
std::vector<Attribution> exact_shap_bruteforce_all(const ModelFn& model, const Eigen::VectorXd& x,
                                                   const Eigen::MatrixXd& background);

Attribution exact_shap_bruteforce(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                                  int class_index);

// Instance i is explained with seed options.seed + i. Results do not depend
// on the thread count.
std::vector<InstanceExplanation> explain_batch(const ModelFn& model, const Eigen::MatrixXd& instances,
                                               const Eigen::MatrixXd& background, const KernelShapOptions& options,
                                               unsigned threads = 1);

// First `size` rows of a seeded shuffle of `pool`.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& pool, Eigen::Index size, std::uint64_t seed,
                            std::vector<std::size_t>* chosen = nullptr);

struct FeatureImportance {
  std::size_t feature = 0;
  std::string name;
  double mean_abs_phi = 0.0;
};

struct ExplanationSummary {
  int class_index = 0;
  std::vector<FeatureImportance> ranking;  // descending mean |phi|, ties by feature index
  // beeswarm[f] = (feature value, phi) for every explained instance.
  std::vector<std::vector<std::pair<double, double>>> beeswarm;
};

ExplanationSummary summarize(std::span<const InstanceExplanation> explanations, int class_index,
                             std::span<const std::string> feature_names);

}  // namespace xids::explain
