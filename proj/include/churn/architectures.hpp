#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "churn/features.hpp"
#include "churn/forest.hpp"
#include "churn/nn.hpp"

namespace churn {

enum class ArchitectureId {
  BaselineRF,
  BaselineANN,
  BaselineLSTM,
  LstmPlusAggregated,
  LstmPredictPlusAggregated,
  LstmHiddenState,
  StaticInLstm,
};

inline constexpr std::array<ArchitectureId, 7> kAllArchitectures = {
    ArchitectureId::BaselineRF,           ArchitectureId::BaselineANN,
    ArchitectureId::BaselineLSTM,         ArchitectureId::LstmPlusAggregated,
    ArchitectureId::LstmPredictPlusAggregated, ArchitectureId::LstmHiddenState,
    ArchitectureId::StaticInLstm};

/// CLI identifier: rf, ann, lstm, lstm-agg, lstm-pred-agg, lstm-hidden, static-in-lstm.
std::string_view cli_name(ArchitectureId id);
/// Row label used in result tables.
std::string_view display_name(ArchitectureId id);
std::optional<ArchitectureId> parse_architecture(std::string_view text);

inline bool is_hybrid(ArchitectureId id) {
  return id == ArchitectureId::LstmPlusAggregated || id == ArchitectureId::LstmPredictPlusAggregated ||
         id == ArchitectureId::LstmHiddenState || id == ArchitectureId::StaticInLstm;
}

struct ModelDims {
  int n_t = 14;
  int n_f = kTemporalFeatures;
  int n_agg = kAggregateFeatures;
  int units = 16;
  int ann_hidden = 64;

  bool operator==(const ModelDims&) const = default;
};

/// Model input: a scaled n_t x n_f temporal block and the aggregate vector.
struct SampleView {
  std::span<const double> temporal;
  std::span<const double> aggregate;
};

/// Scratch buffers reused across samples; one per thread.
struct Workspace {
  nn::LstmLayer::Cache cache;
  std::vector<double> sequence;  // static-in-lstm input rows
  std::vector<double> h0, c0, h0_pre, c0_pre;
  std::vector<double> head_in, head_pre, head_out;
  std::vector<double> comb_in, comb_pre, comb_out;
  std::vector<double> hidden_pre, hidden_out;
  std::vector<double> scaled_temporal, scaled_aggregate;
  std::vector<double> d_hidden, d_head_in, d_comb_in, dh0, dc0, dh_final, dsequence;
};

/// One of the six neural architectures with a flat parameter vector.
class NeuralModel {
 public:
  /// Seeded initialization. Layers are laid out LSTM first, then the output
  /// head, then architecture-specific layers, so two architectures built with
  /// the same seed share their LSTM and head weights.
  static NeuralModel build(ArchitectureId id, const ModelDims& dims, std::uint64_t seed);

  /// Rebuilds the layer map for serialized parameters.
  static NeuralModel from_parameters(ArchitectureId id, const ModelDims& dims,
                                     std::vector<double> params);

  ArchitectureId id() const { return id_; }
  const ModelDims& dims() const { return dims_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  double predict(const SampleView& x, Workspace& ws) const;
  double predict(const SampleView& x) const;

  /// BCE loss of one sample; adds d loss / d parameters to `grad`. The
  /// gradient covers every parameter, including the frozen stage-1 LSTM of
  /// the prediction-combining architecture.
  double loss_and_gradient(const SampleView& x, int label, std::span<double> grad,
                           Workspace& ws) const;

  const nn::LstmLayer& lstm() const { return lstm_; }
  const nn::DenseLayer& head() const { return head_; }
  const nn::DenseLayer& combiner() const { return combiner_; }
  const nn::DenseLayer& initial_hidden() const { return init_h_; }
  const nn::DenseLayer& initial_cell() const { return init_c_; }
  const nn::DenseLayer& ann_hidden() const { return ann_hidden_; }
  const nn::DenseLayer& ann_output() const { return ann_out_; }

  /// Probability of the temporal sub-model (LSTM + head) alone.
  double temporal_probability(const SampleView& x, Workspace& ws) const;
  /// Final LSTM hidden state (zero initial state).
  std::vector<double> temporal_features(const SampleView& x, Workspace& ws) const;

  bool operator==(const NeuralModel& o) const {
    return id_ == o.id_ && dims_ == o.dims_ && params_ == o.params_;
  }

 private:
  void check_input(const SampleView& x) const;
  void layout();
  void run_lstm(const SampleView& x, Workspace& ws) const;

  ArchitectureId id_ = ArchitectureId::BaselineLSTM;
  ModelDims dims_;
  std::vector<double> params_;
  nn::LstmLayer lstm_;
  nn::DenseLayer head_;
  nn::DenseLayer combiner_;
  nn::DenseLayer init_h_, init_c_;
  nn::DenseLayer ann_hidden_, ann_out_;
};

/// Closed-form parameter count of an architecture's wiring (0 for the forest).
std::size_t expected_parameter_count(ArchitectureId id, const ModelDims& dims);

/// Stage-1 temporal models keyed by training rows, seed and config, so the
/// prediction-combining architecture can reuse an identical baseline run.
class Stage1Cache {
 public:
  const NeuralModel* find(std::uint64_t key) const;
  void store(std::uint64_t key, const NeuralModel& model);

 private:
  std::map<std::uint64_t, NeuralModel> models_;
};

struct ArchitectureOptions {
  ModelDims dims;
  nn::TrainConfig train;
  ForestConfig forest;
  // LSTM + Aggregated: true trains end-to-end; false freezes a pre-trained
  // baseline LSTM and fits only the output layer on its hidden state.
  bool lstm_agg_joint = true;
  Stage1Cache* stage1_cache = nullptr;
};

/// A trained classifier of any of the seven architectures together with the
/// scaler fitted on its training rows.
struct TrainedModel {
  ArchitectureId id = ArchitectureId::BaselineLSTM;
  ModelDims dims;
  std::optional<Scaler> scaler;  // neural architectures only
  std::optional<NeuralModel> network;
  std::optional<RandomForest> forest;
  std::vector<nn::TrainHistory> histories;  // one per training stage

  /// Probability for row `i` of an unscaled dataset.
  double predict(const Dataset& raw, std::size_t i, Workspace& ws) const;
  std::vector<double> predict(const Dataset& raw, std::span<const std::size_t> rows) const;
};

/// Trains on `rows` of an unscaled dataset. Neural architectures fit a
/// z-score scaler on those rows only; the forest consumes raw features.
TrainedModel train_architecture(ArchitectureId id, const Dataset& raw, std::span<const std::size_t> rows,
                                const ArchitectureOptions& opts);

/// Adapts a NeuralModel over a scaled dataset to the trainer interface.
class ModelObjective : public nn::TrainingObjective {
 public:
  ModelObjective(NeuralModel& model, const Dataset& scaled) : model_(model), data_(scaled) {}
  std::span<double> parameters() override { return model_.parameters(); }
  double accumulate(std::size_t row, std::span<double> grad) override;
  double loss(std::size_t row) override;
  int label(std::size_t row) const override { return data_.labels[row]; }

 private:
  NeuralModel& model_;
  const Dataset& data_;
  Workspace ws_;
};

inline SampleView view_of(const Dataset& data, std::size_t i) {
  return {data.temporal_row(i), data.aggregate_row(i)};
}

}  // namespace churn
