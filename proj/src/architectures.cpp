#include "churn/architectures.hpp"

#include <algorithm>
#include <cstring>

#include "churn/errors.hpp"
#include "churn/rng.hpp"

namespace churn {
namespace {

using nn::Activation;
using nn::DenseLayer;
using nn::LstmLayer;

struct ArchNames {
  ArchitectureId id;
  std::string_view cli;
  std::string_view display;
};

constexpr ArchNames kNames[] = {
    {ArchitectureId::BaselineRF, "rf", "Baseline RF"},
    {ArchitectureId::BaselineANN, "ann", "Baseline ANN"},
    {ArchitectureId::BaselineLSTM, "lstm", "Baseline LSTM"},
    {ArchitectureId::LstmPlusAggregated, "lstm-agg", "LSTM + Aggregated"},
    {ArchitectureId::LstmPredictPlusAggregated, "lstm-pred-agg", "LSTM Predict + Aggr."},
    {ArchitectureId::LstmHiddenState, "lstm-hidden", "LSTM Hidden State"},
    {ArchitectureId::StaticInLstm, "static-in-lstm", "Static in LSTM"},
};

std::size_t to_size(int v) { return static_cast<std::size_t>(v); }

void resize(std::vector<double>& v, std::size_t n) {
  if (v.size() != n) v.assign(n, 0.0);
}

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t stage1_key(std::span<const std::size_t> rows, const nn::TrainConfig& cfg,
                         const ModelDims& dims, std::uint64_t data_fingerprint) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv_bytes(h, rows.data(), rows.size_bytes());
  const double reals[] = {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon,
                          cfg.validation_fraction, cfg.clip_norm};
  h = fnv_bytes(h, reals, sizeof(reals));
  const std::uint64_t ints[] = {cfg.batch_size, static_cast<std::uint64_t>(cfg.max_epochs),
                                static_cast<std::uint64_t>(cfg.patience), cfg.seed,
                                static_cast<std::uint64_t>(dims.n_t), static_cast<std::uint64_t>(dims.n_f),
                                static_cast<std::uint64_t>(dims.n_agg), static_cast<std::uint64_t>(dims.units),
                                data_fingerprint};
  return fnv_bytes(h, ints, sizeof(ints));
}

std::uint64_t dataset_fingerprint(const Dataset& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv_bytes(h, data.temporal.data(), data.temporal.size() * sizeof(double));
  h = fnv_bytes(h, data.aggregate.data(), data.aggregate.size() * sizeof(double));
  return fnv_bytes(h, data.labels.data(), data.labels.size() * sizeof(int));
}

/// Logistic output layer trained on fixed per-row features (stage 2 of the
/// staged architectures).
class FrozenFeatureObjective : public nn::TrainingObjective {
 public:
  FrozenFeatureObjective(std::span<double> params, std::size_t width, const Dataset& data)
      : params_(params), layer_(width, 1, Activation::Sigmoid, 0), width_(width), data_(data),
        features_(data.size() * width, 0.0) {}

  std::span<double> row_features(std::size_t row) {
    return std::span<double>(features_).subspan(row * width_, width_);
  }

  std::span<double> parameters() override { return params_; }
  double accumulate(std::size_t row, std::span<double> grad) override {
    double pre = 0.0, p = 0.0;
    auto x = row_features(row);
    layer_.forward(params_, x, {&pre, 1}, {&p, 1});
    const double dpre = nn::bce_logit_grad(p, data_.labels[row]);
    layer_.backward_from_pre(params_, x, {&dpre, 1}, grad, {});
    return nn::bce_sample_loss(p, data_.labels[row]);
  }
  double loss(std::size_t row) override {
    double pre = 0.0, p = 0.0;
    layer_.forward(params_, row_features(row), {&pre, 1}, {&p, 1});
    return nn::bce_sample_loss(p, data_.labels[row]);
  }
  int label(std::size_t row) const override { return data_.labels[row]; }

 private:
  std::span<double> params_;
  DenseLayer layer_;
  std::size_t width_;
  const Dataset& data_;
  std::vector<double> features_;
};

}  // namespace

std::string_view cli_name(ArchitectureId id) {
  for (const auto& n : kNames)
    if (n.id == id) return n.cli;
  return "?";
}

std::string_view display_name(ArchitectureId id) {
  for (const auto& n : kNames)
    if (n.id == id) return n.display;
  return "?";
}

std::optional<ArchitectureId> parse_architecture(std::string_view text) {
  for (const auto& n : kNames)
    if (n.cli == text) return n.id;
  return std::nullopt;
}

std::size_t expected_parameter_count(ArchitectureId id, const ModelDims& d) {
  const std::size_t u = to_size(d.units), f = to_size(d.n_f), a = to_size(d.n_agg), t = to_size(d.n_t);
  auto lstm = [&](std::size_t in) { return 4 * u * (in + u + 1); };
  switch (id) {
    case ArchitectureId::BaselineRF: return 0;
    case ArchitectureId::BaselineANN: {
      const std::size_t h = to_size(d.ann_hidden);
      return h * (t * f + 1) + (h + 1);
    }
    case ArchitectureId::BaselineLSTM: return lstm(f) + (u + 1);
    case ArchitectureId::LstmPlusAggregated: return lstm(f) + (u + a + 1);
    case ArchitectureId::LstmPredictPlusAggregated: return lstm(f) + (u + 1) + (1 + a + 1);
    case ArchitectureId::LstmHiddenState: return lstm(f) + (u + 1) + 2 * u * (a + 1);
    case ArchitectureId::StaticInLstm: return lstm(f + a) + (u + 1);
  }
  return 0;
}

void NeuralModel::layout() {
  const std::size_t u = to_size(dims_.units), f = to_size(dims_.n_f), a = to_size(dims_.n_agg);
  std::size_t off = 0;
  if (id_ == ArchitectureId::BaselineANN) {
    ann_hidden_ = DenseLayer(to_size(dims_.n_t) * f, to_size(dims_.ann_hidden), Activation::ReLU, off);
    off += ann_hidden_.param_count();
    ann_out_ = DenseLayer(to_size(dims_.ann_hidden), 1, Activation::Sigmoid, off);
    off += ann_out_.param_count();
  } else {
    lstm_ = LstmLayer(id_ == ArchitectureId::StaticInLstm ? f + a : f, u, off);
    off += lstm_.param_count();
    head_ = DenseLayer(id_ == ArchitectureId::LstmPlusAggregated ? u + a : u, 1, Activation::Sigmoid, off);
    off += head_.param_count();
    if (id_ == ArchitectureId::LstmPredictPlusAggregated) {
      combiner_ = DenseLayer(1 + a, 1, Activation::Sigmoid, off);
      off += combiner_.param_count();
    }
    if (id_ == ArchitectureId::LstmHiddenState) {
      init_h_ = DenseLayer(a, u, Activation::Linear, off);
      off += init_h_.param_count();
      init_c_ = DenseLayer(a, u, Activation::Linear, off);
      off += init_c_.param_count();
    }
  }
  params_.assign(off, 0.0);
}

NeuralModel NeuralModel::build(ArchitectureId id, const ModelDims& dims, std::uint64_t seed) {
  if (id == ArchitectureId::BaselineRF) throw ContractError("NeuralModel: the forest is not a neural model");
  if (dims.n_t < 1 || dims.n_f < 1 || dims.n_agg < 1 || dims.units < 1 || dims.ann_hidden < 1)
    throw ContractError("NeuralModel: invalid dimensions");
  NeuralModel m;
  m.id_ = id;
  m.dims_ = dims;
  m.layout();
  Rng rng(seed, 0x1417);
  if (id == ArchitectureId::BaselineANN) {
    m.ann_hidden_.init(m.params_, rng);
    m.ann_out_.init(m.params_, rng);
  } else {
    m.lstm_.init(m.params_, rng);
    m.head_.init(m.params_, rng);
    if (id == ArchitectureId::LstmPredictPlusAggregated) m.combiner_.init(m.params_, rng);
    if (id == ArchitectureId::LstmHiddenState) {
      m.init_h_.init(m.params_, rng);
      m.init_c_.init(m.params_, rng);
    }
  }
  return m;
}

NeuralModel NeuralModel::from_parameters(ArchitectureId id, const ModelDims& dims, std::vector<double> params) {
  NeuralModel m = build(id, dims, 0);
  if (params.size() != m.params_.size()) throw DataError("model parameter count mismatch");
  m.params_ = std::move(params);
  return m;
}

void NeuralModel::check_input(const SampleView& x) const {
  if (x.temporal.size() != to_size(dims_.n_t) * to_size(dims_.n_f))
    throw ContractError("sample temporal block has the wrong shape for " + std::string(cli_name(id_)));
  if (id_ != ArchitectureId::BaselineANN && id_ != ArchitectureId::BaselineLSTM &&
      x.aggregate.size() != to_size(dims_.n_agg))
    throw ContractError("sample aggregate vector has the wrong length for " + std::string(cli_name(id_)));
}

void NeuralModel::run_lstm(const SampleView& x, Workspace& ws) const {
  const std::size_t steps = to_size(dims_.n_t);
  const std::size_t u = to_size(dims_.units);
  std::span<const double> h0, c0;
  std::span<const double> seq = x.temporal;
  if (id_ == ArchitectureId::StaticInLstm) {
    const std::size_t f = to_size(dims_.n_f), a = to_size(dims_.n_agg);
    resize(ws.sequence, steps * (f + a));
    for (std::size_t t = 0; t < steps; ++t) {
      std::copy_n(x.temporal.data() + t * f, f, ws.sequence.data() + t * (f + a));
      std::copy_n(x.aggregate.data(), a, ws.sequence.data() + t * (f + a) + f);
    }
    seq = ws.sequence;
  } else if (id_ == ArchitectureId::LstmHiddenState) {
    resize(ws.h0, u);
    resize(ws.c0, u);
    resize(ws.h0_pre, u);
    resize(ws.c0_pre, u);
    init_h_.forward(params_, x.aggregate, ws.h0_pre, ws.h0);
    init_c_.forward(params_, x.aggregate, ws.c0_pre, ws.c0);
    h0 = ws.h0;
    c0 = ws.c0;
  }
  lstm_.forward(params_, seq, steps, h0, c0, ws.cache);
}

double NeuralModel::temporal_probability(const SampleView& x, Workspace& ws) const {
  if (id_ == ArchitectureId::BaselineANN) throw ContractError("temporal_probability: no LSTM");
  check_input(x);
  run_lstm(x, ws);
  auto h = lstm_.final_hidden(ws.cache);
  double pre = 0.0, p = 0.0;
  if (head_.in() != h.size()) throw ContractError("temporal_probability: head does not take the hidden state alone");
  head_.forward(params_, h, {&pre, 1}, {&p, 1});
  return p;
}

std::vector<double> NeuralModel::temporal_features(const SampleView& x, Workspace& ws) const {
  if (id_ == ArchitectureId::BaselineANN) throw ContractError("temporal_features: no LSTM");
  check_input(x);
  run_lstm(x, ws);
  auto h = lstm_.final_hidden(ws.cache);
  return {h.begin(), h.end()};
}

double NeuralModel::predict(const SampleView& x) const {
  Workspace ws;
  return predict(x, ws);
}

double NeuralModel::predict(const SampleView& x, Workspace& ws) const {
  check_input(x);
  resize(ws.head_pre, 1);
  resize(ws.head_out, 1);
  if (id_ == ArchitectureId::BaselineANN) {
    resize(ws.hidden_pre, ann_hidden_.out());
    resize(ws.hidden_out, ann_hidden_.out());
    ann_hidden_.forward(params_, x.temporal, ws.hidden_pre, ws.hidden_out);
    ann_out_.forward(params_, ws.hidden_out, ws.head_pre, ws.head_out);
    return ws.head_out[0];
  }
  run_lstm(x, ws);
  auto h = lstm_.final_hidden(ws.cache);
  if (id_ == ArchitectureId::LstmPlusAggregated) {
    resize(ws.head_in, head_.in());
    std::copy(h.begin(), h.end(), ws.head_in.begin());
    std::copy(x.aggregate.begin(), x.aggregate.end(), ws.head_in.begin() + static_cast<std::ptrdiff_t>(h.size()));
    head_.forward(params_, ws.head_in, ws.head_pre, ws.head_out);
    return ws.head_out[0];
  }
  head_.forward(params_, h, ws.head_pre, ws.head_out);
  if (id_ != ArchitectureId::LstmPredictPlusAggregated) return ws.head_out[0];
  resize(ws.comb_in, combiner_.in());
  resize(ws.comb_pre, 1);
  resize(ws.comb_out, 1);
  ws.comb_in[0] = ws.head_out[0];
  std::copy(x.aggregate.begin(), x.aggregate.end(), ws.comb_in.begin() + 1);
  combiner_.forward(params_, ws.comb_in, ws.comb_pre, ws.comb_out);
  return ws.comb_out[0];
}

double NeuralModel::loss_and_gradient(const SampleView& x, int label, std::span<double> grad,
                                      Workspace& ws) const {
  if (grad.size() != params_.size()) throw ContractError("loss_and_gradient: gradient size mismatch");
  const double p = predict(x, ws);
  const double dlogit = nn::bce_logit_grad(p, label);
  const double loss = nn::bce_sample_loss(p, label);
  if (dlogit == 0.0) return loss;

  const std::size_t u = to_size(dims_.units);
  if (id_ == ArchitectureId::BaselineANN) {
    resize(ws.d_hidden, ann_hidden_.out());
    ann_out_.backward_from_pre(params_, ws.hidden_out, {&dlogit, 1}, grad, ws.d_hidden);
    ann_hidden_.backward(params_, x.temporal, ws.hidden_pre, ws.hidden_out, ws.d_hidden, grad, {});
    return loss;
  }

  resize(ws.dh_final, u);
  auto h = lstm_.final_hidden(ws.cache);
  switch (id_) {
    case ArchitectureId::LstmPlusAggregated: {
      resize(ws.d_head_in, head_.in());
      head_.backward_from_pre(params_, ws.head_in, {&dlogit, 1}, grad, ws.d_head_in);
      std::copy_n(ws.d_head_in.begin(), u, ws.dh_final.begin());
      break;
    }
    case ArchitectureId::LstmPredictPlusAggregated: {
      resize(ws.d_comb_in, combiner_.in());
      combiner_.backward_from_pre(params_, ws.comb_in, {&dlogit, 1}, grad, ws.d_comb_in);
      const double p1 = ws.head_out[0];
      const double dpre1 = ws.d_comb_in[0] * p1 * (1.0 - p1);
      head_.backward_from_pre(params_, h, {&dpre1, 1}, grad, ws.dh_final);
      break;
    }
    default:
      head_.backward_from_pre(params_, h, {&dlogit, 1}, grad, ws.dh_final);
      break;
  }

  std::span<const double> seq = id_ == ArchitectureId::StaticInLstm ? std::span<const double>(ws.sequence) : x.temporal;
  if (id_ == ArchitectureId::LstmHiddenState) {
    resize(ws.dh0, u);
    resize(ws.dc0, u);
    lstm_.backward(params_, ws.cache, seq, ws.dh_final, grad, {}, ws.dh0, ws.dc0);
    init_h_.backward(params_, x.aggregate, ws.h0_pre, ws.h0, ws.dh0, grad, {});
    init_c_.backward(params_, x.aggregate, ws.c0_pre, ws.c0, ws.dc0, grad, {});
  } else {
    lstm_.backward(params_, ws.cache, seq, ws.dh_final, grad, {}, {}, {});
  }
  return loss;
}

const NeuralModel* Stage1Cache::find(std::uint64_t key) const {
  auto it = models_.find(key);
  return it == models_.end() ? nullptr : &it->second;
}

void Stage1Cache::store(std::uint64_t key, const NeuralModel& model) { models_.insert_or_assign(key, model); }

double ModelObjective::accumulate(std::size_t row, std::span<double> grad) {
  return model_.loss_and_gradient(view_of(data_, row), data_.labels[row], grad, ws_);
}

double ModelObjective::loss(std::size_t row) {
  return nn::bce_sample_loss(model_.predict(view_of(data_, row), ws_), data_.labels[row]);
}

double TrainedModel::predict(const Dataset& raw, std::size_t i, Workspace& ws) const {
  if (forest) return forest->predict(raw.temporal_row(i));
  if (!network || !scaler) throw ContractError("TrainedModel: not trained");
  auto t = raw.temporal_row(i);
  auto a = raw.aggregate_row(i);
  ws.scaled_temporal.assign(t.begin(), t.end());
  ws.scaled_aggregate.assign(a.begin(), a.end());
  scaler->apply_temporal(ws.scaled_temporal);
  scaler->apply_aggregate(ws.scaled_aggregate);
  return network->predict({ws.scaled_temporal, ws.scaled_aggregate}, ws);
}

std::vector<double> TrainedModel::predict(const Dataset& raw, std::span<const std::size_t> rows) const {
  Workspace ws;
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(predict(raw, r, ws));
  return out;
}

namespace {

NeuralModel train_baseline_lstm(const Dataset& scaled, std::span<const std::size_t> rows,
                                const ArchitectureOptions& opts, std::uint64_t init_seed,
                                std::vector<nn::TrainHistory>& histories) {
  std::uint64_t key = 0;
  if (opts.stage1_cache) {
    key = stage1_key(rows, opts.train, opts.dims, dataset_fingerprint(scaled));
    if (const NeuralModel* hit = opts.stage1_cache->find(key)) {
      histories.push_back({});
      return *hit;
    }
  }
  NeuralModel model = NeuralModel::build(ArchitectureId::BaselineLSTM, opts.dims, init_seed);
  ModelObjective objective(model, scaled);
  histories.push_back(nn::train(objective, rows, opts.train));
  if (opts.stage1_cache) opts.stage1_cache->store(key, model);
  return model;
}

}  // namespace

TrainedModel train_architecture(ArchitectureId id, const Dataset& raw, std::span<const std::size_t> rows,
                                const ArchitectureOptions& opts) {
  TrainedModel out;
  out.id = id;
  out.dims = opts.dims;
  if (raw.days != opts.dims.n_t) throw ContractError("train_architecture: dataset day count != n_t");
  if (id == ArchitectureId::BaselineRF) {
    const std::size_t w = raw.temporal_width();
    std::vector<double> x;
    std::vector<int> y;
    x.reserve(rows.size() * w);
    for (std::size_t r : rows) {
      auto t = raw.temporal_row(r);
      x.insert(x.end(), t.begin(), t.end());
      y.push_back(raw.labels[r]);
    }
    out.forest = RandomForest::fit(x, w, y, opts.forest);
    return out;
  }

  out.scaler = fit_scaler(raw, rows);
  const Dataset scaled = apply_scaler(*out.scaler, raw);
  const std::uint64_t init_seed = derive_seed(opts.train.seed, "model-init");
  Workspace ws;

  const bool staged = id == ArchitectureId::LstmPredictPlusAggregated ||
                      (id == ArchitectureId::LstmPlusAggregated && !opts.lstm_agg_joint);
  if (id == ArchitectureId::BaselineLSTM) {
    out.network = train_baseline_lstm(scaled, rows, opts, init_seed, out.histories);
    return out;
  }
  if (!staged) {
    NeuralModel model = NeuralModel::build(id, opts.dims, init_seed);
    ModelObjective objective(model, scaled);
    out.histories.push_back(nn::train(objective, rows, opts.train));
    out.network = std::move(model);
    return out;
  }

  const NeuralModel stage1 = train_baseline_lstm(scaled, rows, opts, init_seed, out.histories);
  NeuralModel model = NeuralModel::build(id, opts.dims, init_seed);
  const auto lstm_params = stage1.lstm().param_count();
  std::copy_n(stage1.parameters().begin(), lstm_params, model.parameters().begin());
  const nn::DenseLayer& trainable = id == ArchitectureId::LstmPredictPlusAggregated ? model.combiner() : model.head();
  if (id == ArchitectureId::LstmPredictPlusAggregated) {
    // The stage-1 output head is frozen too.
    std::copy_n(stage1.parameters().begin() + static_cast<std::ptrdiff_t>(lstm_params), stage1.head().param_count(),
                model.parameters().begin() + static_cast<std::ptrdiff_t>(model.head().offset()));
  }
  FrozenFeatureObjective objective(model.parameters().subspan(trainable.offset(), trainable.param_count()),
                                   trainable.in(), scaled);
  const std::size_t u = static_cast<std::size_t>(opts.dims.units);
  for (std::size_t r : rows) {
    const SampleView v = view_of(scaled, r);
    auto feats = objective.row_features(r);
    if (id == ArchitectureId::LstmPredictPlusAggregated) {
      feats[0] = stage1.temporal_probability(v, ws);
      std::copy(v.aggregate.begin(), v.aggregate.end(), feats.begin() + 1);
    } else {
      auto h = stage1.temporal_features(v, ws);
      std::copy(h.begin(), h.end(), feats.begin());
      std::copy(v.aggregate.begin(), v.aggregate.end(), feats.begin() + static_cast<std::ptrdiff_t>(u));
    }
  }
  out.histories.push_back(nn::train(objective, rows, opts.train));
  out.network = std::move(model);
  return out;
}

}  // namespace churn
