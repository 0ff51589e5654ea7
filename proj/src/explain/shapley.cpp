#include "xids/explain/shapley.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <Eigen/Cholesky>

#include "xids/random.hpp"

namespace xids::explain {
namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

Eigen::MatrixXd call_model(const ModelFn& model, const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd out;
  try {
    out = model(rows);
  } catch (const std::exception& e) {
    throw ModelEvaluationFailure(e.what());
  }
  if (out.rows() != rows.rows()) {
    throw ModelEvaluationFailure("model returned " + std::to_string(out.rows()) + " rows for " +
                                 std::to_string(rows.rows()) + " inputs");
  }
  if (!out.allFinite()) throw ModelEvaluationFailure("model returned non-finite scores");
  return out;
}

// Mean model output per coalition; row j of the result belongs to
// coalitions[j]. `features` maps mask positions to columns of x. For a given
// background row only the features where it differs from x matter, so
// coalitions that agree on those share one model evaluation.
Eigen::MatrixXd evaluate_coalitions(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                                    std::span<const Mask> coalitions, std::span<const Eigen::Index> features,
                                    Eigen::Index eval_rows) {
  const Eigen::Index B = background.rows();
  const std::size_t n = coalitions.size();
  const std::size_t m = features.size();
  const bool packed = m <= 64;

  struct Eval {
    Eigen::Index background_row;
    std::size_t coalition;
  };
  std::vector<Eval> evals;
  std::vector<std::uint32_t> slot(n * static_cast<std::size_t>(B));
  if (packed) {
    std::vector<std::uint64_t> bits(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < m; ++k) {
        if (coalitions[j][k]) bits[j] |= std::uint64_t{1} << k;
      }
    }
    std::unordered_map<std::uint64_t, std::uint32_t> seen;
    for (Eigen::Index b = 0; b < B; ++b) {
      std::uint64_t differs = 0;
      for (std::size_t k = 0; k < m; ++k) {
        if (background(b, features[k]) != x(features[k])) differs |= std::uint64_t{1} << k;
      }
      seen.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const auto [it, inserted] = seen.try_emplace(bits[j] & differs, static_cast<std::uint32_t>(evals.size()));
        if (inserted) evals.push_back({b, j});
        slot[j * static_cast<std::size_t>(B) + static_cast<std::size_t>(b)] = it->second;
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      for (Eigen::Index b = 0; b < B; ++b) {
        slot[j * static_cast<std::size_t>(B) + static_cast<std::size_t>(b)] = static_cast<std::uint32_t>(evals.size());
        evals.push_back({b, j});
      }
    }
  }

  Eigen::MatrixXd results;
  Eigen::MatrixXd rows;
  const auto step = static_cast<std::size_t>(std::max<Eigen::Index>(1, eval_rows));
  for (std::size_t start = 0; start < evals.size(); start += step) {
    const std::size_t end = std::min(evals.size(), start + step);
    rows.resize(static_cast<Eigen::Index>(end - start), x.size());
    for (std::size_t e = start; e < end; ++e) {
      const auto r = static_cast<Eigen::Index>(e - start);
      rows.row(r) = background.row(evals[e].background_row);
      const Mask& z = coalitions[evals[e].coalition];
      for (std::size_t k = 0; k < m; ++k) {
        if (z[k]) rows(r, features[k]) = x(features[k]);
      }
    }
    const Eigen::MatrixXd out = call_model(model, rows);
    if (results.size() == 0) results.resize(static_cast<Eigen::Index>(evals.size()), out.cols());
    results.middleRows(static_cast<Eigen::Index>(start), out.rows()) = out;
  }

  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), results.cols());
  for (std::size_t j = 0; j < n; ++j) {
    for (Eigen::Index b = 0; b < B; ++b) {
      means.row(static_cast<Eigen::Index>(j)) += results.row(slot[j * static_cast<std::size_t>(B) + static_cast<std::size_t>(b)]);
    }
  }
  means /= static_cast<double>(B);
  return means;
}

// Coalition set with kernel weights, keyed by mask so duplicates accumulate.
class CoalitionSet {
 public:
  void add(const Mask& z, double w) {
    const auto [it, inserted] = index_.try_emplace(z, masks_.size());
    if (inserted) {
      masks_.push_back(z);
      weights_.push_back(w);
    } else {
      weights_[it->second] += w;
    }
  }
  bool contains(const Mask& z) const { return index_.count(z) != 0; }
  std::size_t size() const { return masks_.size(); }
  const std::vector<Mask>& masks() const { return masks_; }
  std::vector<double>& weights() { return weights_; }

 private:
  std::map<Mask, std::size_t> index_;
  std::vector<Mask> masks_;
  std::vector<double> weights_;
};

Mask complement(const Mask& z) {
  Mask c(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) c[i] = !z[i];
  return c;
}

template <class F>
void for_each_subset(int m, int s, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    Mask z(static_cast<std::size_t>(m), false);
    for (const int i : idx) z[static_cast<std::size_t>(i)] = true;
    f(z);
    int k = s - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == m - s + k) --k;
    if (k < 0) return;
    ++idx[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < s; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

CoalitionSet build_coalitions(int m, int budget, std::uint64_t seed, bool& exact) {
  CoalitionSet set;
  exact = false;
  if (m < 31 && (std::int64_t{1} << m) - 2 <= budget) {
    exact = true;
    for (int s = 1; s < m; ++s) {
      const double w = shapley_kernel_weight(m, s);
      for_each_subset(m, s, [&](const Mask& z) { set.add(z, w); });
    }
    return set;
  }
  if (budget < m + 2) {
    throw InsufficientCoalitions(std::to_string(budget) + " coalitions for " + std::to_string(m) +
                                 " varying features; need at least " + std::to_string(m + 2));
  }

  // Probability mass per coalition size, folding s and m - s together.
  const int num_sizes = (m - 1 + 1) / 2;  // ceil((m - 1) / 2)
  const int num_paired = (m - 1) / 2;
  std::vector<double> size_weight(static_cast<std::size_t>(num_sizes));
  for (int s = 1; s <= num_sizes; ++s) {
    double w = static_cast<double>(m - 1) / (static_cast<double>(s) * static_cast<double>(m - s));
    if (s <= num_paired) w *= 2.0;
    size_weight[static_cast<std::size_t>(s - 1)] = w;
  }
  const double total = std::accumulate(size_weight.begin(), size_weight.end(), 0.0);
  for (auto& w : size_weight) w /= total;

  // Enumerate whole sizes while the remaining budget covers them.
  double remaining = budget;
  std::vector<double> remaining_weight = size_weight;
  int full_sizes = 0;
  for (int s = 1; s <= num_sizes; ++s) {
    const bool paired = s <= num_paired;
    const double count = binomial(m, s) * (paired ? 2.0 : 1.0);
    const double share = remaining_weight[static_cast<std::size_t>(s - 1)];
    if (remaining * share / count < 1.0 - 1e-8) break;
    ++full_sizes;
    remaining -= count;
    if (share < 1.0) {
      for (auto& w : remaining_weight) w /= (1.0 - share);
    }
    double w = size_weight[static_cast<std::size_t>(s - 1)] / binomial(m, s);
    if (paired) w /= 2.0;
    for_each_subset(m, s, [&](const Mask& z) {
      set.add(z, w);
      if (paired) set.add(complement(z), w);
    });
  }
  if (full_sizes == num_sizes) return set;

  // Paired sampling over the remaining sizes.
  const std::size_t fixed = set.size();
  double weight_left = 0.0;
  for (int s = full_sizes + 1; s <= num_sizes; ++s) weight_left += size_weight[static_cast<std::size_t>(s - 1)];
  std::vector<double> draw_weight;
  for (int s = full_sizes + 1; s <= num_sizes; ++s) {
    double w = size_weight[static_cast<std::size_t>(s - 1)];
    if (s <= num_paired) w /= 2.0;
    draw_weight.push_back(w);
  }
  const double draw_total = std::accumulate(draw_weight.begin(), draw_weight.end(), 0.0);
  std::vector<double> cumulative(draw_weight.size());
  std::partial_sum(draw_weight.begin(), draw_weight.end(), cumulative.begin());
  for (auto& c : cumulative) c /= draw_total;

  Rng rng(mix_seed(seed));
  std::vector<int> order(static_cast<std::size_t>(m));
  auto samples_left = static_cast<std::int64_t>(std::llround(std::max(remaining, 0.0)));
  std::int64_t attempts = 0;
  const std::int64_t max_attempts = 50LL * budget + 1000;
  while (samples_left > 0 && attempts++ < max_attempts) {
    const double u = uniform01(rng);
    const auto pos = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const int s = full_sizes + 1 + static_cast<int>(std::min(pos, cumulative.size() - 1));
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates for a uniform s-subset.
    Mask z(static_cast<std::size_t>(m), false);
    for (int k = 0; k < s; ++k) {
      const auto j = static_cast<std::size_t>(k) + bounded(rng, static_cast<std::uint64_t>(m - k));
      std::swap(order[static_cast<std::size_t>(k)], order[j]);
      z[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
    }
    if (!set.contains(z)) --samples_left;
    set.add(z, 1.0);
    if (samples_left > 0 && s <= num_paired) {
      const Mask zc = complement(z);
      if (!set.contains(zc)) --samples_left;
      set.add(zc, 1.0);
    }
  }
  auto& w = set.weights();
  const double sampled = std::accumulate(w.begin() + static_cast<std::ptrdiff_t>(fixed), w.end(), 0.0);
  if (sampled > 0.0) {
    for (std::size_t j = fixed; j < w.size(); ++j) w[j] *= weight_left / sampled;
  }
  return set;
}

}  // namespace

double shapley_kernel_weight(int features, int size) {
  if (size <= 0 || size >= features) {
    throw DegenerateCoalition("coalition size " + std::to_string(size) + " of " + std::to_string(features));
  }
  return static_cast<double>(features - 1) /
         (binomial(features, size) * static_cast<double>(size) * static_cast<double>(features - size));
}

Eigen::VectorXd masked_prediction(const ModelFn& model, const Eigen::VectorXd& x, const Mask& coalition,
                                  const Eigen::MatrixXd& background) {
  if (static_cast<Eigen::Index>(coalition.size()) != x.size() || background.cols() != x.size()) {
    throw ShapeMismatch("mask, instance and background widths differ");
  }
  if (background.rows() == 0) throw ShapeMismatch("empty background set");
  if (std::all_of(coalition.begin(), coalition.end(), [](bool b) { return b; })) {
    return call_model(model, x.transpose()).row(0).transpose();
  }
  std::vector<Eigen::Index> features(coalition.size());
  std::iota(features.begin(), features.end(), Eigen::Index{0});
  const Mask masks[1] = {coalition};
  return evaluate_coalitions(model, x, background, masks, features, 8192).row(0).transpose();
}

double masked_prediction(const ModelFn& model, const Eigen::VectorXd& x, const Mask& coalition,
                         const Eigen::MatrixXd& background, int class_index) {
  const Eigen::VectorXd v = masked_prediction(model, x, coalition, background);
  if (class_index < 0 || class_index >= v.size()) throw ShapeMismatch("class index out of range");
  return v(class_index);
}

InstanceExplanation kernel_shap_all(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                                    const KernelShapOptions& options) {
  if (background.cols() != x.size()) throw ShapeMismatch("background width differs from instance");
  if (background.rows() == 0) throw ShapeMismatch("empty background set");
  const Eigen::Index M = x.size();

  const Eigen::VectorXd fx = call_model(model, x.transpose()).row(0).transpose();
  const Eigen::VectorXd phi0 = call_model(model, background).colwise().mean().transpose();
  const Eigen::Index K = fx.size();
  const Eigen::VectorXd delta = fx - phi0;

  std::vector<Eigen::Index> varying;
  for (Eigen::Index i = 0; i < M; ++i) {
    if ((background.col(i).array() != x(i)).any()) varying.push_back(i);
  }
  const auto Mv = static_cast<Eigen::Index>(varying.size());

  InstanceExplanation out;
  out.features = x;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(M, K);
  if (Mv == 1) {
    phi.row(varying[0]) = delta.transpose();
    out.exact = true;
  } else if (Mv >= 2) {
    bool exact = false;
    CoalitionSet set = build_coalitions(static_cast<int>(Mv), options.n_coalitions, options.seed, exact);
    out.exact = exact;
    out.coalitions = static_cast<int>(set.size());
    const auto& masks = set.masks();
    const Eigen::MatrixXd values = evaluate_coalitions(model, x, background, masks, varying, options.eval_rows);

    // Eliminate the last varying feature through the efficiency constraint.
    const Eigen::Index n = static_cast<Eigen::Index>(masks.size());
    const Eigen::Index p = Mv - 1;
    Eigen::MatrixXd A(n, p);
    Eigen::MatrixXd T(n, K);
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Mask& z = masks[static_cast<std::size_t>(j)];
      const double last = z[static_cast<std::size_t>(p)] ? 1.0 : 0.0;
      for (Eigen::Index i = 0; i < p; ++i) A(j, i) = (z[static_cast<std::size_t>(i)] ? 1.0 : 0.0) - last;
      T.row(j) = values.row(j) - phi0.transpose() - last * delta.transpose();
      w(j) = set.weights()[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd AtW = A.transpose() * w.asDiagonal();
    Eigen::MatrixXd normal = AtW * A;
    const Eigen::MatrixXd rhs = AtW * T;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
      out.ridge_fallback = true;
      normal.diagonal().array() += 1e-10;
      ldlt.compute(normal);
    }
    const Eigen::MatrixXd beta = ldlt.solve(rhs);
    for (Eigen::Index i = 0; i < p; ++i) phi.row(varying[static_cast<std::size_t>(i)]) = beta.row(i);
    phi.row(varying[static_cast<std::size_t>(p)]) = delta.transpose() - beta.colwise().sum();
  } else {
    out.exact = true;
  }

  for (Eigen::Index c = 0; c < K; ++c) {
    out.classes.push_back({static_cast<int>(c), phi0(c), phi.col(c), fx(c)});
  }
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < K; ++c) {
    if (fx(c) > fx(best)) best = c;
  }
  out.predicted_label = static_cast<int>(best);
  return out;
}

Attribution kernel_shap(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                        int class_index, const KernelShapOptions& options) {
  InstanceExplanation e = kernel_shap_all(model, x, background, options);
  if (class_index < 0 || class_index >= static_cast<int>(e.classes.size())) {
    throw ShapeMismatch("class index out of range");
  }
  return e.classes[static_cast<std::size_t>(class_index)];
}

std::vector<Attribution> exact_shap_bruteforce_all(const ModelFn& model, const Eigen::VectorXd& x,
                                                   const Eigen::MatrixXd& background) {
  const auto M = static_cast<int>(x.size());
  if (M > 12) throw TooManyFeatures(std::to_string(M) + " features; brute force supports at most 12");
  if (background.cols() != x.size()) throw ShapeMismatch("background width differs from instance");
  const std::size_t count = std::size_t{1} << M;

  std::vector<Eigen::VectorXd> value(count);
  for (std::size_t bits = 0; bits < count; ++bits) {
    Mask z(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) z[static_cast<std::size_t>(i)] = (bits >> i) & 1U;
    value[bits] = masked_prediction(model, x, z, background);
  }
  const Eigen::Index K = value[0].size();

  // |S|! (M - |S| - 1)! / M!
  std::vector<double> weight(static_cast<std::size_t>(M));
  for (int s = 0; s < M; ++s) {
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(M) * binomial(M - 1, s));
  }
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(M, K);
  for (int i = 0; i < M; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t bits = 0; bits < count; ++bits) {
      if (bits & bit) continue;
      const int s = std::popcount(bits);
      phi.row(i) += weight[static_cast<std::size_t>(s)] * (value[bits | bit] - value[bits]).transpose();
    }
  }
  std::vector<Attribution> out;
  for (Eigen::Index c = 0; c < K; ++c) {
    out.push_back({static_cast<int>(c), value[0](c), phi.col(c), value[count - 1](c)});
  }
  return out;
}

Attribution exact_shap_bruteforce(const ModelFn& model, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                                  int class_index) {
  auto all = exact_shap_bruteforce_all(model, x, background);
  if (class_index < 0 || class_index >= static_cast<int>(all.size())) throw ShapeMismatch("class index out of range");
  return all[static_cast<std::size_t>(class_index)];
}

std::vector<InstanceExplanation> explain_batch(const ModelFn& model, const Eigen::MatrixXd& instances,
                                               const Eigen::MatrixXd& background, const KernelShapOptions& options,
                                               unsigned threads) {
  const auto n = static_cast<std::size_t>(instances.rows());
  std::vector<InstanceExplanation> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        KernelShapOptions opt = options;
        opt.seed = options.seed + i;
        out[i] = kernel_shap_all(model, instances.row(static_cast<Eigen::Index>(i)).transpose(), background, opt);
        out[i].instance_id = std::to_string(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& pool, Eigen::Index size, std::uint64_t seed,
                            std::vector<std::size_t>* chosen) {
  if (size < 1) throw ShapeMismatch("selection size must be at least 1");
  Rng rng(mix_seed(seed));
  auto order = shuffled_indices(static_cast<std::size_t>(pool.rows()), rng);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(size)));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(order.size()), pool.cols());
  for (std::size_t k = 0; k < order.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = pool.row(static_cast<Eigen::Index>(order[k]));
  if (chosen) *chosen = std::move(order);
  return out;
}

ExplanationSummary summarize(std::span<const InstanceExplanation> explanations, int class_index,
                             std::span<const std::string> feature_names) {
  std::vector<const Attribution*> attributions;
  for (const auto& e : explanations) {
    for (const auto& a : e.classes) {
      if (a.class_index == class_index) attributions.push_back(&a);
    }
  }
  if (attributions.empty()) throw EmptyAttributionSet("no attributions for class " + std::to_string(class_index));
  const Eigen::Index M = attributions.front()->phi.size();

  Eigen::VectorXd mean_abs = Eigen::VectorXd::Zero(M);
  for (const auto* a : attributions) mean_abs += a->phi.cwiseAbs();
  mean_abs /= static_cast<double>(attributions.size());

  ExplanationSummary s;
  s.class_index = class_index;
  std::vector<std::size_t> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mean_abs(static_cast<Eigen::Index>(a)) > mean_abs(static_cast<Eigen::Index>(b));
  });
  for (const std::size_t f : order) {
    s.ranking.push_back({f, f < feature_names.size() ? feature_names[f] : std::to_string(f),
                         mean_abs(static_cast<Eigen::Index>(f))});
  }
  s.beeswarm.resize(static_cast<std::size_t>(M));
  for (const auto& e : explanations) {
    for (const auto& a : e.classes) {
      if (a.class_index != class_index) continue;
      for (Eigen::Index f = 0; f < M; ++f) {
        const double value = f < e.features.size() ? e.features(f) : 0.0;
        s.beeswarm[static_cast<std::size_t>(f)].emplace_back(value, a.phi(f));
      }
    }
  }
  return s;
}

}  // namespace xids::explain
