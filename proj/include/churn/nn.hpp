#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "churn/rng.hpp"

namespace churn::nn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * cols_, cols_); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

enum class Activation : std::uint8_t { Linear, Sigmoid, Tanh, ReLU };

std::string_view to_string(Activation a);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Piecewise-linear gate activation: clamp(0.2 x + 0.5, 0, 1).
inline double hard_sigmoid(double x) {
  const double y = 0.2 * x + 0.5;
  return y <= 0.0 ? 0.0 : (y >= 1.0 ? 1.0 : y);
}

/// 0.2 strictly inside (-2.5, 2.5); 0 on the flat parts and at the kinks.
inline double hard_sigmoid_grad(double x) { return (x > -2.5 && x < 2.5) ? 0.2 : 0.0; }

double activate(Activation a, double pre);
/// Derivative of the activation given its input and output.
double activation_grad(Activation a, double pre, double out);

/// Fully connected layer whose parameters live in a shared flat vector at
/// `offset`: weights stored input-major (in x out), followed by out biases.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act, std::size_t offset = 0)
      : in_(in), out_(out), act_(act), offset_(offset) {}

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  Activation activation() const { return act_; }
  std::size_t offset() const { return offset_; }
  std::size_t param_count() const { return out_ * (in_ + 1); }

  std::size_t weight_index(std::size_t o, std::size_t i) const { return offset_ + i * out_ + o; }
  std::size_t bias_index(std::size_t o) const { return offset_ + in_ * out_ + o; }

  /// Glorot-uniform weights, zero bias.
  void init(std::span<double> params, Rng& rng) const;

  void forward(std::span<const double> params, std::span<const double> x, std::span<double> pre,
               std::span<double> y) const;

  /// Accumulates into `dparams` (indexed like `params`). `dx` is overwritten
  /// when non-empty.
  void backward(std::span<const double> params, std::span<const double> x,
                std::span<const double> pre, std::span<const double> y,
                std::span<const double> dy, std::span<double> dparams,
                std::span<double> dx) const;

  /// Same as backward, starting from the gradient on the pre-activations.
  void backward_from_pre(std::span<const double> params, std::span<const double> x,
                         std::span<const double> dpre, std::span<double> dparams,
                         std::span<double> dx) const;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Activation act_ = Activation::Linear;
  std::size_t offset_ = 0;
};

/// LSTM with tanh cell activation and hard-sigmoid gates, returning only the
/// final hidden state. Gate order inside every block is (input, forget,
/// candidate, output). Layout at `offset`: input kernel (in x 4u, input-major),
/// recurrent kernel (u x 4u), bias (4u).
class LstmLayer {
 public:
  enum Gate : std::size_t { kInput = 0, kForget = 1, kCandidate = 2, kOutput = 3 };

  struct Cache {
    std::size_t steps = 0;
    std::vector<double> pre;     // steps x 4u gate pre-activations
    std::vector<double> gates;   // steps x 4u gate activations
    std::vector<double> cell;    // (steps + 1) x u, row 0 = c0
    std::vector<double> hidden;  // (steps + 1) x u, row 0 = h0
    std::vector<double> tanh_cell;  // steps x u
  };

  LstmLayer() = default;
  LstmLayer(std::size_t input_dim, std::size_t units, std::size_t offset = 0)
      : in_(input_dim), units_(units), offset_(offset) {}

  std::size_t input_dim() const { return in_; }
  std::size_t units() const { return units_; }
  std::size_t offset() const { return offset_; }
  std::size_t param_count() const { return 4 * units_ * (in_ + units_ + 1); }

  std::size_t kernel_index(Gate g, std::size_t unit, std::size_t input) const {
    return offset_ + input * 4 * units_ + g * units_ + unit;
  }
  std::size_t recurrent_index(Gate g, std::size_t unit, std::size_t from) const {
    return offset_ + (in_ + from) * 4 * units_ + g * units_ + unit;
  }
  std::size_t bias_index(Gate g, std::size_t unit) const {
    return offset_ + (in_ + units_) * 4 * units_ + g * units_ + unit;
  }

  /// Glorot-uniform kernels, forget bias 1, other biases 0.
  void init(std::span<double> params, Rng& rng) const;

  /// `sequence` is steps x input_dim, row-major. Empty h0/c0 mean zeros.
  void forward(std::span<const double> params, std::span<const double> sequence, std::size_t steps,
               std::span<const double> h0, std::span<const double> c0, Cache& cache) const;

  std::span<const double> final_hidden(const Cache& cache) const {
    return std::span<const double>(cache.hidden).subspan(cache.steps * units_, units_);
  }

  /// Backpropagation through time from a gradient on the final hidden state.
  /// Accumulates parameter gradients; `dsequence`, `dh0`, `dc0` are
  /// overwritten when non-empty.
  void backward(std::span<const double> params, const Cache& cache,
                std::span<const double> sequence, std::span<const double> dh_final,
                std::span<double> dparams, std::span<double> dsequence, std::span<double> dh0,
                std::span<double> dc0) const;

 private:
  std::size_t in_ = 0;
  std::size_t units_ = 0;
  std::size_t offset_ = 0;
};

inline constexpr double kProbabilityClamp = 1e-7;

struct BceResult {
  double loss = 0.0;
  std::vector<double> gradient;  // d(mean loss) / d(prediction)
};

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
BceResult bce_loss(std::span<const double> predictions, std::span<const int> labels);

/// Per-sample loss for a sigmoid output.
double bce_sample_loss(double p, int label);

/// d loss / d logit for a sigmoid output; zero where the clamp is active.
inline double bce_logit_grad(double p, int label) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return p - static_cast<double>(label);
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  int max_epochs = 100;
  int patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // 0 disables gradient clipping

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg);

/// What the trainer optimizes: a parameter vector plus per-sample BCE terms.
class TrainingObjective {
 public:
  virtual ~TrainingObjective() = default;
  virtual std::span<double> parameters() = 0;
  /// Loss of sample `row`; adds its gradient to `grad`.
  virtual double accumulate(std::size_t row, std::span<double> grad) = 0;
  virtual double loss(std::size_t row) = 0;
  virtual int label(std::size_t row) const = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double monitored_loss = 0.0;  // validation loss plus any injected noise
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  bool stopped_early = false;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
};

/// Test hook added to the monitored validation loss of each epoch.
using ValidationNoise = std::function<double(int epoch)>;

/// Stratified validation split of `validation_fraction` per class, seeded.
void split_validation(std::span<const std::size_t> rows, const TrainingObjective& objective,
                      const TrainConfig& cfg, std::vector<std::size_t>& train,
                      std::vector<std::size_t>& validation);

/// Mini-batch Adam with seeded per-epoch shuffling and early stopping on the
/// validation loss. Leaves the objective's parameters at the best epoch.
/// Throws NumericError on a non-finite loss or parameter.
TrainHistory train(TrainingObjective& objective, std::span<const std::size_t> rows,
                   const TrainConfig& cfg, const ValidationNoise& noise = {});

}  // namespace churn::nn
