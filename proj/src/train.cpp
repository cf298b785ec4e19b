#include <algorithm>
#include <cmath>
#include <string>

#include "churn/errors.hpp"
#include "churn/nn.hpp"
#include "churn/rng.hpp"

namespace churn::nn {
namespace {

constexpr std::uint64_t kSplitStream = 0x5EED0001;
constexpr std::uint64_t kShuffleStream = 0x5EED0002;

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double mean_loss(TrainingObjective& objective, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r : rows) total += objective.loss(r);
  return total / static_cast<double>(rows.size());
}

}  // namespace

void split_validation(std::span<const std::size_t> rows, const TrainingObjective& objective,
                      const TrainConfig& cfg, std::vector<std::size_t>& train,
                      std::vector<std::size_t>& validation) {
  train.clear();
  validation.clear();
  Rng rng(cfg.seed, kSplitStream);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t r : rows)
      if (objective.label(r) == cls) members.push_back(r);
    rng.shuffle(std::span<std::size_t>(members));
    auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(members.size())));
    if (n_val == 0 && members.size() >= 2) n_val = 1;
    validation.insert(validation.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
}

TrainHistory train(TrainingObjective& objective, std::span<const std::size_t> rows,
                   const TrainConfig& cfg, const ValidationNoise& noise) {
  cfg.validate();
  if (rows.size() < 2) throw ContractError("train: need at least 2 samples");
  TrainHistory history;
  split_validation(rows, objective, cfg, history.train_rows, history.validation_rows);
  if (history.train_rows.empty() || history.validation_rows.empty())
    throw ContractError("train: validation split left an empty side");

  auto params = objective.parameters();
  const std::size_t n_params = params.size();
  AdamState adam(n_params);
  std::vector<double> grad(n_params);
  std::vector<double> best(params.begin(), params.end());
  double best_monitored = INFINITY;
  int since_best = 0;
  std::vector<std::size_t> order = history.train_rows;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, kShuffleStream), static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) batch_loss += objective.accumulate(order[k], grad);
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           "; consider lowering learning_rate or setting clip_norm");
      epoch_loss += batch_loss;
      const double scale = 1.0 / static_cast<double>(end - start);
      for (double& g : grad) g *= scale;
      if (cfg.clip_norm > 0.0) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > cfg.clip_norm)
          for (double& g : grad) g *= cfg.clip_norm / norm;
      }
      adam_step(params, grad, adam, cfg);
    }
    if (!all_finite(params))
      throw NumericError("non-finite parameter after epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.validation_loss = mean_loss(objective, history.validation_rows);
    if (!std::isfinite(rec.validation_loss))
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    rec.monitored_loss = rec.validation_loss + (noise ? noise(epoch) : 0.0);
    history.epochs.push_back(rec);

    if (rec.monitored_loss < best_monitored) {
      best_monitored = rec.monitored_loss;
      history.best_epoch = epoch;
      std::copy(params.begin(), params.end(), best.begin());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      history.stopped_early = true;
      break;
    }
  }
  std::copy(best.begin(), best.end(), params.begin());
  return history;
}

}  // namespace churn::nn
