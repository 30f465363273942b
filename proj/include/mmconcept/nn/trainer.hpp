#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmconcept/nn/checkpoint.hpp"
#include "mmconcept/nn/masking.hpp"
#include "mmconcept/nn/optimizer.hpp"
#include "mmconcept/nn/transformer.hpp"

namespace mmconcept::nn {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Holds out floor(fraction * n) items, chosen by a seeded shuffle.
inline ValidationSplit split_validation(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  ValidationSplit s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

/// Mean masked-token cross-entropy over `indices` with a fixed masking draw.
template <typename T>
double evaluate_mlm_loss(const MaskedLM<T>& model, const std::vector<std::vector<int>>& sequences,
                         const std::vector<std::size_t>& indices, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0;
  std::size_t labels = 0;
  for (std::size_t i : indices) {
    auto masked = apply_mlm_masking(sequences[i], model.config().mask_rate, model.config().vocab_size, rng);
    total += static_cast<double>(model.loss(masked.ids, masked.labels));
    labels += masked.labels.size();
  }
  return labels == 0 ? 0.0 : total / static_cast<double>(labels);
}

/// Trains on `split.train` with dynamic MLM masking, Adam and early stopping
/// on the loss over `split.validation` (train loss when that is empty). The
/// model is left holding the best parameters seen.
template <typename T>
Checkpoint train(MaskedLM<T>& model, const std::vector<std::vector<int>>& sequences, const ValidationSplit& split,
                 const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (split.train.empty()) throw TrainingError("train: empty corpus");
  for (const auto& s : sequences)
    if (s.size() > model.config().max_sequence_length)
      throw TrainingError("train: sequence longer than max_sequence_length");

  const bool has_validation = !split.validation.empty();
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const std::uint64_t validation_seed = cfg.seed + 1;
  Adam<T> adam(cfg.learning_rate);

  Checkpoint ckpt;
  ckpt.config = model.config();
  double best = std::numeric_limits<double>::infinity();
  ModelParams<T> best_params = model.params();
  std::size_t since_best = 0;

  std::vector<std::size_t> order = split.train;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    std::size_t epoch_labels = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<MaskedSequence> batch;
      std::size_t batch_labels = 0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(apply_mlm_masking(sequences[order[i]], model.config().mask_rate, model.config().vocab_size, rng));
        batch_labels += batch.back().labels.size();
      }
      if (batch_labels == 0) continue;
      model.zero_grad();
      const T scale = T(1) / static_cast<T>(batch_labels);
      double batch_loss = 0;
      for (const auto& m : batch) batch_loss += static_cast<double>(model.accumulate_gradients(m.ids, m.labels, scale, &rng));
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch starting at " << start << " (" << batch_labels
            << " labels); consider a lower learning rate";
        throw TrainingError(msg.str());
      }
      clip_grad_norm(model.params(), cfg.grad_clip_norm);
      adam.step(model.params());
      epoch_loss += batch_loss;
      epoch_labels += batch_labels;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_labels ? epoch_loss / static_cast<double>(epoch_labels) : 0.0;
    if (has_validation) entry.validation_loss = evaluate_mlm_loss(model, sequences, split.validation, validation_seed);
    ckpt.training_log.push_back(entry);
    if (on_epoch) on_epoch(entry);

    const double monitored = has_validation ? entry.validation_loss : entry.train_loss;
    if (monitored < best) {
      best = monitored;
      best_params = model.params();
      ckpt.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  model.params() = std::move(best_params);
  ckpt.parameters = export_parameters(model);
  return ckpt;
}

/// Holds out `cfg.validation_fraction` of `sequences` for early stopping.
template <typename T>
Checkpoint train(MaskedLM<T>& model, const std::vector<std::vector<int>>& sequences, const TrainConfig& cfg,
                 const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (sequences.empty()) throw TrainingError("train: empty corpus");
  return train(model, sequences, split_validation(sequences.size(), cfg.validation_fraction, cfg.seed), cfg, on_epoch);
}

}  // namespace mmconcept::nn
