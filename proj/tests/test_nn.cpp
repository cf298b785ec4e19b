#include <doctest.h>

#include <cmath>

#include "churn/errors.hpp"
#include "churn/nn.hpp"
#include "support.hpp"

using namespace churn;
using namespace churn::nn;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Logistic regression over fixed rows, for exercising the trainer.
class LogisticObjective : public TrainingObjective {
 public:
  LogisticObjective(std::vector<std::vector<double>> x, std::vector<int> y)
      : x_(std::move(x)), y_(std::move(y)), layer_(x_[0].size(), 1, Activation::Sigmoid), params_(layer_.param_count()) {}

  std::span<double> parameters() override { return params_; }
  double predict(std::size_t r) const {
    double pre = 0, p = 0;
    layer_.forward(params_, x_[r], {&pre, 1}, {&p, 1});
    return p;
  }
  double accumulate(std::size_t r, std::span<double> grad) override {
    const double p = predict(r);
    const double d = bce_logit_grad(p, y_[r]);
    layer_.backward_from_pre(params_, x_[r], {&d, 1}, grad, {});
    return bce_sample_loss(p, y_[r]);
  }
  double loss(std::size_t r) override { return bce_sample_loss(predict(r), y_[r]); }
  int label(std::size_t r) const override { return y_[r]; }

 private:
  std::vector<std::vector<double>> x_;
  std::vector<int> y_;
  DenseLayer layer_;
  std::vector<double> params_;
};

LogisticObjective separable(Rng& rng, std::size_t n) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  while (x.size() < n) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const double margin = a + 0.5 * b;
    if (std::abs(margin) < 0.05) continue;
    x.push_back({a, b});
    y.push_back(margin > 0 ? 1 : 0);
  }
  return LogisticObjective(std::move(x), std::move(y));
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

}  // namespace

TEST_CASE("hard sigmoid") {
  CHECK(hard_sigmoid(0.0) == 0.5);
  CHECK(hard_sigmoid(10.0) == 1.0);
  CHECK(hard_sigmoid(-10.0) == 0.0);
  CHECK(hard_sigmoid(1.0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(hard_sigmoid_grad(0.0) == 0.2);
  CHECK(hard_sigmoid_grad(2.5) == 0.0);
  CHECK(hard_sigmoid_grad(-2.5) == 0.0);
  CHECK(hard_sigmoid_grad(3.0) == 0.0);
}

TEST_CASE("dense layer forward") {
  DenseLayer layer(3, 3, Activation::Linear);
  std::vector<double> p(layer.param_count(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) p[layer.weight_index(i, i)] = 1.0;
  std::vector<double> x{1.5, -2.0, 0.25}, pre(3), y(3);
  layer.forward(p, x, pre, y);
  CHECK(y == x);
  DenseLayer sig(3, 1, Activation::Sigmoid);
  std::vector<double> q(sig.param_count(), 0.0), out(1), pre1(1);
  sig.forward(q, x, pre1, out);
  CHECK(out[0] == 0.5);
  std::vector<double> wrong(5);
  CHECK_THROWS_AS(layer.forward(p, wrong, pre, y), ContractError);
}

TEST_CASE("dense layer gradients match finite differences") {
  Rng rng(21);
  for (auto act : {Activation::Linear, Activation::Sigmoid, Activation::Tanh, Activation::ReLU}) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t in = 1 + rng.below(6), out = 1 + rng.below(5);
      DenseLayer layer(in, out, act, 3);
      std::vector<double> params = random_vector(rng, layer.param_count() + 3);
      const auto x0 = random_vector(rng, in);
      const auto w = random_vector(rng, out);
      std::vector<double> x = x0;
      auto loss = [&] {
        std::vector<double> pre(out), y(out);
        layer.forward(params, x, pre, y);
        double s = 0;
        for (std::size_t k = 0; k < out; ++k) s += w[k] * y[k];
        return s;
      };
      std::vector<double> pre(out), y(out), grad(params.size(), 0.0), dx(in);
      layer.forward(params, x, pre, y);
      layer.backward(params, x, pre, y, w, grad, dx);
      CHECK(testing::check_gradient(params, grad, loss).max_error < 1e-4);
      CHECK(testing::check_gradient(x, dx, loss).max_error < 1e-4);
      CHECK(grad[0] == 0.0);  // parameters before the offset are untouched
    }
  }
}

TEST_CASE("lstm zero weights keep a zero state") {
  LstmLayer lstm(4, 3);
  std::vector<double> p(lstm.param_count(), 0.0);
  Rng rng(2);
  auto seq = random_vector(rng, 5 * 4);
  LstmLayer::Cache cache;
  lstm.forward(p, seq, 5, {}, {}, cache);
  for (double h : lstm.final_hidden(cache)) CHECK(h == 0.0);
  for (std::size_t i = 0; i < cache.gates.size(); i += 1) {
    const std::size_t gate = (i % 12) / 3;
    CHECK(cache.gates[i] == (gate == LstmLayer::kCandidate ? 0.0 : 0.5));
  }
}

TEST_CASE("lstm matches a scalar unrolled recurrence") {
  LstmLayer lstm(1, 1);
  std::vector<double> p(lstm.param_count());
  const double W[4] = {0.5, -0.3, 0.8, 0.2}, U[4] = {0.1, 0.4, -0.6, 0.3}, B[4] = {0.05, 1.0, -0.1, 0.2};
  for (std::size_t g = 0; g < 4; ++g) {
    p[lstm.kernel_index(static_cast<LstmLayer::Gate>(g), 0, 0)] = W[g];
    p[lstm.recurrent_index(static_cast<LstmLayer::Gate>(g), 0, 0)] = U[g];
    p[lstm.bias_index(static_cast<LstmLayer::Gate>(g), 0)] = B[g];
  }
  const double xs[2] = {1.2, -0.7};
  double h = 0.0, c = 0.0;
  for (double x : xs) {
    auto hs = [](double z) { return std::max(0.0, std::min(1.0, 0.2 * z + 0.5)); };
    const double i = hs(W[0] * x + U[0] * h + B[0]);
    const double f = hs(W[1] * x + U[1] * h + B[1]);
    const double g = std::tanh(W[2] * x + U[2] * h + B[2]);
    const double o = hs(W[3] * x + U[3] * h + B[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
  }
  LstmLayer::Cache cache;
  lstm.forward(p, std::vector<double>{xs[0], xs[1]}, 2, {}, {}, cache);
  CHECK(lstm.final_hidden(cache)[0] == doctest::Approx(h).epsilon(1e-15));
}

TEST_CASE("lstm with identical consecutive steps is order invariant") {
  Rng rng(8);
  LstmLayer lstm(3, 4);
  std::vector<double> p(lstm.param_count());
  lstm.init(p, rng);
  auto a = random_vector(rng, 3), b = random_vector(rng, 3);
  std::vector<double> seq;
  for (auto* row : {&a, &b, &b, &a}) seq.insert(seq.end(), row->begin(), row->end());
  std::vector<double> swapped;
  for (auto* row : {&a, &b, &b, &a}) swapped.insert(swapped.end(), row->begin(), row->end());
  std::swap_ranges(swapped.begin() + 3, swapped.begin() + 6, swapped.begin() + 6);
  LstmLayer::Cache c1, c2;
  lstm.forward(p, seq, 4, {}, {}, c1);
  lstm.forward(p, swapped, 4, {}, {}, c2);
  auto h1 = lstm.final_hidden(c1), h2 = lstm.final_hidden(c2);
  CHECK(std::equal(h1.begin(), h1.end(), h2.begin()));
}

TEST_CASE("lstm init") {
  Rng rng(4);
  LstmLayer lstm(10, 16);
  std::vector<double> p(lstm.param_count());
  lstm.init(p, rng);
  for (std::size_t u = 0; u < 16; ++u) {
    CHECK(p[lstm.bias_index(LstmLayer::kForget, u)] == 1.0);
    CHECK(p[lstm.bias_index(LstmLayer::kInput, u)] == 0.0);
  }
  const double a = std::sqrt(6.0 / (10 + 64));
  for (std::size_t j = 0; j < 10; ++j)
    for (std::size_t u = 0; u < 16; ++u) CHECK(std::abs(p[lstm.kernel_index(LstmLayer::kOutput, u, j)]) <= a);
}

TEST_CASE("lstm backward matches finite differences including initial state") {
  Rng rng(31);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t in = 1 + rng.below(4), units = 1 + rng.below(4), steps = 1 + rng.below(5);
    LstmLayer lstm(in, units, 2);
    auto params = random_vector(rng, lstm.param_count() + 2, 0.5);
    auto seq = random_vector(rng, steps * in);
    auto h0 = random_vector(rng, units, 0.5), c0 = random_vector(rng, units, 0.5);
    const auto w = random_vector(rng, units);
    auto loss = [&] {
      LstmLayer::Cache cache;
      lstm.forward(params, seq, steps, h0, c0, cache);
      auto h = lstm.final_hidden(cache);
      double s = 0;
      for (std::size_t k = 0; k < units; ++k) s += w[k] * h[k];
      return s;
    };
    LstmLayer::Cache cache;
    lstm.forward(params, seq, steps, h0, c0, cache);
    std::vector<double> grad(params.size(), 0.0), dseq(seq.size()), dh0(units), dc0(units);
    lstm.backward(params, cache, seq, w, grad, dseq, dh0, dc0);
    CHECK(testing::check_gradient(params, grad, loss).max_error < 1e-4);
    CHECK(testing::check_gradient(seq, dseq, loss).max_error < 1e-4);
    CHECK(testing::check_gradient(h0, dh0, loss).max_error < 1e-4);
    CHECK(testing::check_gradient(c0, dc0, loss).max_error < 1e-4);

    std::vector<double> zero(units, 0.0), g0(params.size(), 0.0), ds0(seq.size(), 1.0);
    lstm.backward(params, cache, seq, zero, g0, ds0, {}, {});
    for (double g : g0) CHECK(g == 0.0);
    for (double g : ds0) CHECK(g == 0.0);
  }
}

TEST_CASE("saturated gates pass no gradient") {
  // Every gate pre-activation is far outside (-2.5, 2.5), and the candidate
  // is saturated too, so nothing flows back to the inputs.
  LstmLayer lstm(2, 2);
  std::vector<double> p(lstm.param_count(), 0.0);
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t u = 0; u < 2; ++u) p[lstm.bias_index(static_cast<LstmLayer::Gate>(g), u)] = 40.0;
  std::vector<double> seq{0.3, -0.2, 0.1, 0.4, -0.5, 0.2};
  LstmLayer::Cache cache;
  lstm.forward(p, seq, 3, {}, {}, cache);
  std::vector<double> grad(p.size(), 0.0), dseq(seq.size()), dh{1.0, -1.0};
  lstm.backward(p, cache, seq, dh, grad, dseq, {}, {});
  for (double d : dseq) CHECK(std::abs(d) < 1e-12);
}

TEST_CASE("binary cross-entropy") {
  std::vector<double> half{0.5};
  std::vector<int> one{1};
  CHECK(std::abs(bce_loss(half, one).loss - std::log(2.0)) < 1e-12);
  std::vector<double> perfect{1.0, 0.0};
  std::vector<int> labels{1, 0};
  CHECK(bce_loss(perfect, labels).loss <= -std::log(1.0 - 1e-7) + 1e-15);

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> p(n);
    std::vector<int> y(n);
    double want = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform();
      y[i] = rng.bernoulli(0.4);
      const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
      want += -(y[i] * std::log(q) + (1 - y[i]) * std::log(1.0 - q));
    }
    auto r = bce_loss(p, y);
    CHECK(std::abs(r.loss - want / static_cast<double>(n)) < 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
      const double g = (-(y[i] / q) + (1 - y[i]) / (1.0 - q)) / static_cast<double>(n);
      CHECK(r.gradient[i] == doctest::Approx(g).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam") {
  TrainConfig cfg;
  std::vector<double> p{0.0, 1.0, 1.0};
  AdamState st(3);
  std::vector<double> g{0.0, 0.0, 0.0};
  adam_step(p, g, st, cfg);
  CHECK(p == std::vector<double>{0.0, 1.0, 1.0});
  CHECK(st.step == 1);

  std::vector<double> q{0.0, 2.0, 2.0};
  AdamState s2(3);
  std::vector<double> g2{1.0, 0.5, 0.5};
  adam_step(q, g2, s2, cfg);
  CHECK(std::abs(q[0] - (-1e-3 / (1.0 + 1e-8))) < 1e-18);
  CHECK(q[1] == q[2]);
  CHECK(s2.step == 1);
}

TEST_CASE("trainer fits a separable toy set") {
  Rng rng(17);
  auto obj = separable(rng, 200);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.max_epochs = 300;
  cfg.patience = 300;
  cfg.seed = 3;
  auto hist = train(obj, all_rows(200), cfg);
  int correct = 0;
  for (std::size_t r = 0; r < 200; ++r) correct += (obj.predict(r) > 0.5) == (obj.label(r) == 1);
  CHECK(correct >= 198);
  CHECK(hist.validation_rows.size() == 20);

  // the restored parameters reproduce the best recorded validation loss
  double best = INFINITY;
  for (const auto& e : hist.epochs) best = std::min(best, e.validation_loss);
  double v = 0;
  for (auto r : hist.validation_rows) v += obj.loss(r);
  CHECK(v / static_cast<double>(hist.validation_rows.size()) == best);

  Rng rng2(17);
  auto again = separable(rng2, 200);
  auto hist2 = train(again, all_rows(200), cfg);
  CHECK(hist2.epochs.size() == hist.epochs.size());
  for (std::size_t i = 0; i < hist.epochs.size(); ++i) CHECK(hist2.epochs[i].train_loss == hist.epochs[i].train_loss);
  CHECK(std::equal(obj.parameters().begin(), obj.parameters().end(), again.parameters().begin()));
}

TEST_CASE("stratified validation split") {
  Rng rng(1);
  auto obj = separable(rng, 200);
  TrainConfig cfg;
  cfg.seed = 9;
  std::vector<std::size_t> tr, va;
  split_validation(all_rows(200), obj, cfg, tr, va);
  std::size_t pos_all = 0, pos_val = 0;
  for (std::size_t r = 0; r < 200; ++r) pos_all += obj.label(r);
  for (auto r : va) pos_val += obj.label(r);
  CHECK(tr.size() + va.size() == 200);
  CHECK(pos_val == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(pos_all))));
}

TEST_CASE("early stopping with injected noise") {
  Rng rng(23);
  auto obj = separable(rng, 200);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.max_epochs = 100;
  cfg.patience = 4;
  auto hist = train(obj, all_rows(200), cfg, [](int epoch) { return epoch >= 5 ? 1.0 : 0.0; });
  CHECK(hist.stopped_early);
  CHECK(hist.best_epoch <= 4);
  CHECK(static_cast<int>(hist.epochs.size()) - 1 - hist.best_epoch <= cfg.patience);
  double v = 0;
  for (auto r : hist.validation_rows) v += obj.loss(r);
  v /= static_cast<double>(hist.validation_rows.size());
  CHECK(v == hist.epochs[static_cast<std::size_t>(hist.best_epoch)].validation_loss);
}

TEST_CASE("non-finite training aborts") {
  struct Exploding : TrainingObjective {
    std::vector<double> p{0.0};
    std::span<double> parameters() override { return p; }
    double accumulate(std::size_t, std::span<double> g) override {
      g[0] += 1.0;
      return std::nan("");
    }
    double loss(std::size_t) override { return 0.0; }
    int label(std::size_t r) const override { return static_cast<int>(r % 2); }
  } obj;
  TrainConfig cfg;
  cfg.validation_fraction = 0.5;
  cfg.batch_size = 2;
  CHECK_THROWS_AS(train(obj, all_rows(8), cfg), NumericError);
  TrainConfig bad;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
