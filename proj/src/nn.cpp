#include "churn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "churn/errors.hpp"

namespace churn::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
  }
  return "?";
}

double activate(Activation a, double pre) {
  switch (a) {
    case Activation::Linear: return pre;
    case Activation::Sigmoid: return sigmoid(pre);
    case Activation::Tanh: return std::tanh(pre);
    case Activation::ReLU: return pre > 0.0 ? pre : 0.0;
  }
  return pre;
}

double activation_grad(Activation a, double pre, double out) {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::Sigmoid: return out * (1.0 - out);
    case Activation::Tanh: return 1.0 - out * out;
    case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

void DenseLayer::init(std::span<double> params, Rng& rng) const {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_ + out_));
  for (std::size_t i = 0; i < in_; ++i)
    for (std::size_t o = 0; o < out_; ++o) params[weight_index(o, i)] = rng.uniform(-limit, limit);
  for (std::size_t o = 0; o < out_; ++o) params[bias_index(o)] = 0.0;
}

void DenseLayer::forward(std::span<const double> params, std::span<const double> x,
                         std::span<double> pre, std::span<double> y) const {
  if (x.size() != in_ || pre.size() != out_ || y.size() != out_)
    throw ContractError("DenseLayer::forward: shape mismatch");
  const double* w = params.data() + offset_;
  const double* b = params.data() + offset_ + in_ * out_;
  for (std::size_t o = 0; o < out_; ++o) pre[o] = b[o];
  for (std::size_t i = 0; i < in_; ++i) {
    const double xi = x[i];
    const double* wr = w + i * out_;
    for (std::size_t o = 0; o < out_; ++o) pre[o] += xi * wr[o];
  }
  for (std::size_t o = 0; o < out_; ++o) y[o] = activate(act_, pre[o]);
}

void DenseLayer::backward(std::span<const double> params, std::span<const double> x,
                          std::span<const double> pre, std::span<const double> y,
                          std::span<const double> dy, std::span<double> dparams,
                          std::span<double> dx) const {
  if (dy.size() != out_ || pre.size() != out_ || y.size() != out_)
    throw ContractError("DenseLayer::backward: shape mismatch");
  std::vector<double> dpre(out_);
  for (std::size_t o = 0; o < out_; ++o) dpre[o] = dy[o] * activation_grad(act_, pre[o], y[o]);
  backward_from_pre(params, x, dpre, dparams, dx);
}

void DenseLayer::backward_from_pre(std::span<const double> params, std::span<const double> x,
                                   std::span<const double> dpre, std::span<double> dparams,
                                   std::span<double> dx) const {
  if (x.size() != in_ || dpre.size() != out_ || (!dx.empty() && dx.size() != in_))
    throw ContractError("DenseLayer::backward: shape mismatch");
  const double* w = params.data() + offset_;
  double* dw = dparams.data() + offset_;
  double* db = dparams.data() + offset_ + in_ * out_;
  for (std::size_t i = 0; i < in_; ++i) {
    const double xi = x[i];
    double* dwr = dw + i * out_;
    for (std::size_t o = 0; o < out_; ++o) dwr[o] += xi * dpre[o];
  }
  for (std::size_t o = 0; o < out_; ++o) db[o] += dpre[o];
  if (!dx.empty()) {
    for (std::size_t i = 0; i < in_; ++i) {
      const double* wr = w + i * out_;
      double s = 0.0;
      for (std::size_t o = 0; o < out_; ++o) s += wr[o] * dpre[o];
      dx[i] = s;
    }
  }
}

void LstmLayer::init(std::span<double> params, Rng& rng) const {
  const std::size_t g4 = 4 * units_;
  const double kernel_limit = std::sqrt(6.0 / static_cast<double>(in_ + g4));
  const double recurrent_limit = std::sqrt(6.0 / static_cast<double>(units_ + g4));
  double* p = params.data() + offset_;
  for (std::size_t k = 0; k < in_ * g4; ++k) p[k] = rng.uniform(-kernel_limit, kernel_limit);
  p += in_ * g4;
  for (std::size_t k = 0; k < units_ * g4; ++k) p[k] = rng.uniform(-recurrent_limit, recurrent_limit);
  p += units_ * g4;
  for (std::size_t r = 0; r < g4; ++r) p[r] = (r / units_ == kForget) ? 1.0 : 0.0;
}

void LstmLayer::forward(std::span<const double> params, std::span<const double> sequence,
                        std::size_t steps, std::span<const double> h0, std::span<const double> c0,
                        Cache& cache) const {
  const std::size_t u = units_;
  const std::size_t g4 = 4 * u;
  if (sequence.size() != steps * in_) throw ContractError("LstmLayer::forward: sequence shape mismatch");
  if ((!h0.empty() && h0.size() != u) || (!c0.empty() && c0.size() != u))
    throw ContractError("LstmLayer::forward: initial state shape mismatch");
  cache.steps = steps;
  cache.pre.resize(steps * g4);
  cache.gates.resize(steps * g4);
  cache.cell.resize((steps + 1) * u);
  cache.hidden.resize((steps + 1) * u);
  cache.tanh_cell.resize(steps * u);
  for (std::size_t k = 0; k < u; ++k) {
    cache.hidden[k] = h0.empty() ? 0.0 : h0[k];
    cache.cell[k] = c0.empty() ? 0.0 : c0[k];
  }
  const double* kernel = params.data() + offset_;
  const double* recurrent = kernel + in_ * g4;
  const double* bias = recurrent + u * g4;
  for (std::size_t t = 0; t < steps; ++t) {
    double* z = cache.pre.data() + t * g4;
    double* a = cache.gates.data() + t * g4;
    const double* x = sequence.data() + t * in_;
    const double* h_prev = cache.hidden.data() + t * u;
    const double* c_prev = cache.cell.data() + t * u;
    double* c = cache.cell.data() + (t + 1) * u;
    double* h = cache.hidden.data() + (t + 1) * u;
    double* tc = cache.tanh_cell.data() + t * u;
    for (std::size_t r = 0; r < g4; ++r) z[r] = bias[r];
    for (std::size_t j = 0; j < in_; ++j) {
      const double xj = x[j];
      const double* wr = kernel + j * g4;
      for (std::size_t r = 0; r < g4; ++r) z[r] += xj * wr[r];
    }
    for (std::size_t k = 0; k < u; ++k) {
      const double hk = h_prev[k];
      const double* ur = recurrent + k * g4;
      for (std::size_t r = 0; r < g4; ++r) z[r] += hk * ur[r];
    }
    for (std::size_t k = 0; k < u; ++k) {
      const double ig = hard_sigmoid(z[kInput * u + k]);
      const double fg = hard_sigmoid(z[kForget * u + k]);
      const double gg = std::tanh(z[kCandidate * u + k]);
      const double og = hard_sigmoid(z[kOutput * u + k]);
      a[kInput * u + k] = ig;
      a[kForget * u + k] = fg;
      a[kCandidate * u + k] = gg;
      a[kOutput * u + k] = og;
      c[k] = fg * c_prev[k] + ig * gg;
      tc[k] = std::tanh(c[k]);
      h[k] = og * tc[k];
    }
  }
}

void LstmLayer::backward(std::span<const double> params, const Cache& cache,
                         std::span<const double> sequence, std::span<const double> dh_final,
                         std::span<double> dparams, std::span<double> dsequence,
                         std::span<double> dh0, std::span<double> dc0) const {
  const std::size_t u = units_;
  const std::size_t g4 = 4 * u;
  const std::size_t steps = cache.steps;
  if (dh_final.size() != u) throw ContractError("LstmLayer::backward: gradient shape mismatch");
  if (!dsequence.empty() && dsequence.size() != steps * in_)
    throw ContractError("LstmLayer::backward: input gradient shape mismatch");
  const double* kernel = params.data() + offset_;
  const double* recurrent = kernel + in_ * g4;
  double* dkernel = dparams.data() + offset_;
  double* drecurrent = dkernel + in_ * g4;
  double* dbias = drecurrent + u * g4;

  std::vector<double> dh(dh_final.begin(), dh_final.end());
  std::vector<double> dc(u, 0.0);
  std::vector<double> dz(g4);
  for (std::size_t t = steps; t-- > 0;) {
    const double* z = cache.pre.data() + t * g4;
    const double* a = cache.gates.data() + t * g4;
    const double* c_prev = cache.cell.data() + t * u;
    const double* h_prev = cache.hidden.data() + t * u;
    const double* tc = cache.tanh_cell.data() + t * u;
    const double* x = sequence.data() + t * in_;
    for (std::size_t k = 0; k < u; ++k) {
      const double ig = a[kInput * u + k];
      const double fg = a[kForget * u + k];
      const double gg = a[kCandidate * u + k];
      const double og = a[kOutput * u + k];
      const double dck = dc[k] + dh[k] * og * (1.0 - tc[k] * tc[k]);
      dz[kInput * u + k] = dck * gg * hard_sigmoid_grad(z[kInput * u + k]);
      dz[kForget * u + k] = dck * c_prev[k] * hard_sigmoid_grad(z[kForget * u + k]);
      dz[kCandidate * u + k] = dck * ig * (1.0 - gg * gg);
      dz[kOutput * u + k] = dh[k] * tc[k] * hard_sigmoid_grad(z[kOutput * u + k]);
      dc[k] = dck * fg;
    }
    for (std::size_t j = 0; j < in_; ++j) {
      const double xj = x[j];
      double* dwr = dkernel + j * g4;
      for (std::size_t r = 0; r < g4; ++r) dwr[r] += xj * dz[r];
    }
    for (std::size_t k = 0; k < u; ++k) {
      const double hk = h_prev[k];
      double* dur = drecurrent + k * g4;
      for (std::size_t r = 0; r < g4; ++r) dur[r] += hk * dz[r];
    }
    for (std::size_t r = 0; r < g4; ++r) dbias[r] += dz[r];
    if (!dsequence.empty()) {
      double* dx = dsequence.data() + t * in_;
      for (std::size_t j = 0; j < in_; ++j) {
        const double* wr = kernel + j * g4;
        double s = 0.0;
        for (std::size_t r = 0; r < g4; ++r) s += wr[r] * dz[r];
        dx[j] = s;
      }
    }
    for (std::size_t k = 0; k < u; ++k) {
      const double* ur = recurrent + k * g4;
      double s = 0.0;
      for (std::size_t r = 0; r < g4; ++r) s += ur[r] * dz[r];
      dh[k] = s;
    }
  }
  if (!dh0.empty()) std::copy(dh.begin(), dh.end(), dh0.begin());
  if (!dc0.empty()) std::copy(dc.begin(), dc.end(), dc0.begin());
}

double bce_sample_loss(double p, int label) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

BceResult bce_loss(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ContractError("bce_loss: size mismatch or empty batch");
  const double n = static_cast<double>(predictions.size());
  BceResult result;
  result.gradient.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    result.loss += bce_sample_loss(p, labels[i]);
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) {
      result.gradient[i] = 0.0;
    } else {
      result.gradient[i] = (labels[i] ? -1.0 / p : 1.0 / (1.0 - p)) / n;
    }
  }
  result.loss /= n;
  return result;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ContractError("adam_step: shape mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace churn::nn
