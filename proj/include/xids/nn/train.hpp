#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xids/nn/adam.hpp"
#include "xids/nn/loss.hpp"
#include "xids/nn/model.hpp"

namespace xids::nn {

XIDS_DEFINE_ERROR(NonFiniteLoss);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  AdamConfig adam;
  LossKind loss = LossKind::SparseCategorical;
  std::uint64_t seed = 42;  // shuffling and dropout masks
  bool shuffle = true;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  // on train-mode outputs
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
};

// Loss and parameter gradients for one batch.
template <class S>
struct BatchResult {
  S loss = 0;
  Mat<S> probs;
  std::vector<Mat<S>> grads;
};

template <class S>
BatchResult<S> loss_and_gradients(const Sequential<S>& model, const Tensor<S>& x, std::span<const int> targets,
                                  LossKind loss, Mode mode = Mode::Train, Rng* rng = nullptr) {
  typename Sequential<S>::Cache cache;
  BatchResult<S> r;
  r.probs = model.forward(x, mode, rng, &cache).values;
  Mat<S> dprobs;
  if (loss == LossKind::SparseCategorical) {
    r.loss = sparse_cross_entropy<S>(r.probs, targets);
    dprobs = sparse_cross_entropy_grad<S>(r.probs, targets);
  } else {
    const Mat<S> y = one_hot<S>(targets, r.probs.cols());
    r.loss = categorical_cross_entropy<S>(r.probs, y);
    dprobs = categorical_cross_entropy_grad<S>(r.probs, y);
  }
  r.grads = model.backward(cache, dprobs);
  return r;
}

// Mini-batch Adam. Deterministic for a fixed model init seed and
// config.seed; the last partial batch is trained on.
template <class S>
TrainHistory train(Sequential<S>& model, const Tensor<S>& x, std::span<const int> labels, const TrainConfig& cfg,
                   const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (x.batch == 0) throw ShapeMismatch("training set is empty");
  if (static_cast<Index>(labels.size()) != x.batch) throw ShapeMismatch("label count differs from sample count");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ShapeMismatch("epochs and batch_size must be positive");

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  Rng rng(mix_seed(cfg.seed));
  AdamState<S> adam;
  auto params = model.parameters();
  TrainHistory history;

  std::vector<std::size_t> order(static_cast<std::size_t>(x.batch));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto e0 = Clock::now();
    if (cfg.shuffle) shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor<S> xb = x.gather(idx);
      batch_labels.clear();
      for (const auto i : idx) batch_labels.push_back(labels[i]);

      BatchResult<S> r = loss_and_gradients(model, xb, batch_labels, cfg.loss, Mode::Train, &rng);
      if (!std::isfinite(static_cast<double>(r.loss))) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(start));
      }
      loss_sum += static_cast<double>(r.loss) * static_cast<double>(idx.size());
      const auto pred = predict_class(r.probs);
      for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == batch_labels[k];
      adam_update<S>(params, r.grads, adam, cfg.adam);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    stats.seconds = std::chrono::duration<double>(Clock::now() - e0).count();
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  history.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return history;
}

}  // namespace xids::nn
