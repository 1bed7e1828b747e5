#include <doctest.h>

#include <cmath>

#include "stgnrde/error.hpp"
#include "stgnrde/trainer.hpp"
#include "test_util.hpp"

using namespace stgnrde;

namespace {

ModelConfig small_model(std::size_t nodes) {
  ModelConfig c;
  c.num_nodes = nodes;
  c.in_channels = 1;
  c.horizon = 3;
  c.dim_h = 4;
  c.dim_z = 4;
  c.sig_depth = 2;
  c.subpath = 2;
  return c;
}

Normalizer identity_norm() { return {{0.0}, {1.0}}; }

PreparedData constant_data(double value, std::size_t windows) {
  Dataset d;
  d.nodes = 1;
  d.channels = 1;
  d.timesteps = 6 + 3 + windows - 1;
  d.values.assign(d.timesteps, value);
  return prepare(make_windows(d, 6, 3), identity_norm(), 2, 2);
}

PreparedData wave_data(std::size_t nodes, std::size_t timesteps, const Normalizer& norm) {
  Dataset d;
  d.nodes = nodes;
  d.channels = 1;
  d.timesteps = timesteps;
  for (std::size_t v = 0; v < nodes; ++v)
    for (std::size_t t = 0; t < timesteps; ++t) d.values.push_back(std::sin(0.5 * t + v));
  return prepare(make_windows(d, 6, 3), norm, 2, 2);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("metrics on the worked example") {
  const double y[] = {2.0, 4.0}, yhat[] = {1.0, 5.0};
  MetricReport r = compute_metrics(yhat, y, 2, 1);
  CHECK(r.mae == doctest::Approx(1.0));
  CHECK(r.rmse == doctest::Approx(1.0));
  CHECK(r.mape == doctest::Approx(0.375));
  // one sample: per-horizon MAE is the pointwise absolute error
  CHECK(r.horizon_mae == std::vector<double>{1.0, 1.0});
  CHECK(r.horizon_mape[0] == doctest::Approx(0.5));
  CHECK(r.horizon_mape[1] == doctest::Approx(0.25));
  MetricReport p = compute_metrics(y, y, 2, 1);
  CHECK(p.mae == 0.0);
  CHECK(p.rmse == 0.0);
  CHECK(p.mape == 0.0);
}

TEST_CASE("MAPE skips near-zero targets; RMSE >= MAE") {
  const double y[] = {0.0, 2.0}, yhat[] = {1.0, 3.0};
  MetricReport r = compute_metrics(yhat, y, 1, 1);
  CHECK(r.mape == doctest::Approx(0.5));
  auto a = testutil::random_values(120, 1), b = testutil::random_values(120, 2);
  MetricReport q = compute_metrics(a, b, 12, 1);
  CHECK(q.rmse >= q.mae);
  for (std::size_t s = 0; s < 12; ++s) CHECK(q.horizon_rmse[s] >= q.horizon_mae[s]);
  CHECK_THROWS_AS(compute_metrics(std::span<const double>{}, std::span<const double>{}, 1, 1), DataError);
}

TEST_CASE("l1 loss") {
  Tensor p = Tensor::from({1, 2}, {1.0, 5.0}), t = Tensor::from({1, 2}, {2.0, 4.0});
  CHECK(l1_loss(p, t).item() == doctest::Approx(1.0));
  CHECK(l1_loss(t, t).item() == 0.0);
  CHECK(l1_loss(add(t, Tensor::full({1, 2}, 1.0)), t).item() == doctest::Approx(1.0));
  CHECK_THROWS_AS(l1_loss(p, Tensor::zeros({2, 1})), DimensionError);
}

TEST_CASE("Adam against a scalar hand computation") {
  ParamStore ps;
  ps.add("w", Tensor::from({1}, {0.5}).set_requires_grad());
  AdamState st;
  const double lr = 0.1, wd = 0.01;
  double w = 0.5, m = 0.0, v = 0.0;
  for (int step = 1; step <= 3; ++step) {
    const double task = 2.0 * step;
    ps.zero_grad();
    backward(scale(sum(ps.get("w")), task));
    adam_step(ps, st, lr, wd);
    const double g = task + wd * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= lr * (m / (1 - std::pow(0.9, step))) / (std::sqrt(v / (1 - std::pow(0.999, step))) + 1e-8);
    CHECK(ps.get("w").data()[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("Adam without gradient: unchanged without decay, shrinks with decay") {
  ParamStore ps;
  ps.add("w", Tensor::from({2}, {1.0, -2.0}).set_requires_grad());
  AdamState st;
  adam_step(ps, st, 0.1, 0.0);
  CHECK(ps.get("w").data()[0] == 1.0);
  CHECK(ps.get("w").data()[1] == -2.0);
  adam_step(ps, st, 0.1, 0.5);
  CHECK(ps.get("w").data()[0] < 1.0);
  CHECK(ps.get("w").data()[1] > -2.0);
}

TEST_CASE("constant series is learned within 20 epochs") {
  PreparedData train = constant_data(0.7, 16), val = constant_data(0.7, 4);
  ModelConfig c = small_model(1);
  GraphRde m(c, 3);
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 4;
  tc.lr = 1e-2;
  tc.weight_decay = 0.0;
  FitResult r = fit(m, train, val, identity_norm(), tc, {Method::euler, 1});
  CHECK(r.history.back().train_loss < 0.05);
  CHECK(r.best_val_mae < 0.05);
}

TEST_CASE("lr = 0 keeps parameters and losses constant") {
  PreparedData train = wave_data(2, 20, identity_norm()), val = wave_data(2, 12, identity_norm());
  GraphRde m(small_model(2), 5);
  ParamStore before = m.params().clone();
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 3;
  tc.lr = 0.0;
  FitResult r = fit(m, train, val, identity_norm(), tc, {Method::euler, 1});
  REQUIRE(r.history.size() == 3);
  for (const auto& row : r.history) {
    CHECK(row.train_loss == doctest::Approx(r.history[0].train_loss).epsilon(1e-14));
    CHECK(row.val_mae == r.history[0].val_mae);
  }
  for (const auto& [name, t] : m.params()) {
    auto a = t.data(), b = before.get(name).data();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST_CASE("early stopping keeps the best epoch and runs are reproducible") {
  PreparedData train = wave_data(3, 40, identity_norm()), val = wave_data(3, 16, identity_norm());
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 8;
  tc.lr = 3e-2;
  tc.patience = 3;
  tc.seed = 9;
  GraphRde a(small_model(3), 1), b(small_model(3), 1);
  FitResult ra = fit(a, train, val, identity_norm(), tc, {Method::rk4, 1});
  FitResult rb = fit(b, train, val, identity_norm(), tc, {Method::rk4, 1});
  CHECK(history_csv(ra.history) == history_csv(rb.history));
  double best = INFINITY;
  for (const auto& row : ra.history) best = std::min(best, row.val_mae);
  CHECK(ra.best_val_mae == best);
  CHECK(ra.history.size() - ra.best_epoch <= tc.patience);
  CHECK(evaluate(a, val, identity_norm(), {Method::rk4, 1}, tc.batch_size).mae == best);
}

TEST_CASE("historical average predicts the mean of observed inputs") {
  Dataset d;
  d.nodes = 1;
  d.channels = 1;
  d.timesteps = 9;
  d.values = {1, 2, 3, 4, 5, 6, 10, 10, 10};
  WindowSet w = make_windows(d, 6, 3);
  w.windows[0].mask[2] = 0;  // drops the 3
  PreparedData p = prepare(w, identity_norm(), 2, 2);
  const double mean = (1 + 2 + 4 + 5 + 6) / 5.0;
  CHECK(historical_average(p).mae == doctest::Approx(10.0 - mean));
  CHECK(history_csv({{1, 0.5, 0.25}}) == "epoch,train_loss,val_mae\n1,0.5,0.25\n");
}

TEST_CASE("evaluation of an empty split is a data error") {
  PreparedData empty;
  GraphRde m(small_model(1), 1);
  CHECK_THROWS_AS(evaluate(m, empty, identity_norm(), {}), DataError);
}

TEST_CASE("gradcheck on the default tiny configuration") {
  ModelConfig c = small_model(4);
  CHECK(gradcheck(c, {Method::rk4, 2}, 3).max_rel_error < 1e-4);
  c.variant = Variant::temporal_only;
  CHECK(gradcheck(c, {Method::euler, 2}, 3).max_rel_error < 1e-4);
  c.variant = Variant::spatial_only;
  GradcheckResult r = gradcheck(c, {Method::euler, 2}, 3);
  CHECK(r.max_rel_error < 1e-4);
  for (const auto& [name, err] : r.per_param) CHECK(name.rfind("f.", 0) != 0);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.patience = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

}
