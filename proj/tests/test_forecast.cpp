#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tsaa/forecast.hpp>

#include <cstdio>

using namespace tsaa;

namespace {

std::vector<WindowPair> random_windows(int n, int L, int H, int C, std::uint64_t seed,
                                       bool linear_target = false) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<WindowPair> out;
  for (int i = 0; i < n; ++i) {
    WindowPair w;
    w.x = Matrix(static_cast<std::size_t>(L), static_cast<std::size_t>(C));
    w.y = Matrix(static_cast<std::size_t>(H), static_cast<std::size_t>(C));
    for (auto& v : w.x.data) v = nd(rng);
    if (linear_target) {
      // y(h,c) = mean of the last 4 inputs of channel c, plus 0.1*h
      for (int h = 0; h < H; ++h)
        for (int c = 0; c < C; ++c) {
          double acc = 0;
          for (int l = L - 4; l < L; ++l) acc += w.x(static_cast<std::size_t>(l), static_cast<std::size_t>(c));
          w.y(static_cast<std::size_t>(h), static_cast<std::size_t>(c)) = 0.25 * acc + 0.1 * h;
        }
    } else {
      for (auto& v : w.y.data) v = nd(rng);
    }
    w.origin_index = i;
    out.push_back(std::move(w));
  }
  return out;
}

double max_grad_rel_err(Forecaster& model, const std::vector<WindowPair>& batch) {
  std::vector<double> grad;
  model.loss_and_grad(batch, grad);
  const double h = 1e-6;
  double worst = 0.0;
  std::vector<double> dummy;
  for (std::size_t i = 0; i < model.params().size(); i += 7) {  // stride keeps it fast
    double saved = model.params()[i];
    model.params()[i] = saved + h;
    double up = model.loss_and_grad(batch, dummy);
    model.params()[i] = saved - h;
    double dn = model.loss_and_grad(batch, dummy);
    model.params()[i] = saved;
    double fd = (up - dn) / (2 * h);
    double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("adam first step moves each weight by about lr") {
  std::vector<double> w = {1.0, -2.0, 0.5};
  std::vector<double> g = {0.3, -4.0, 1e-3};
  AdamState st;
  adam_step(w, g, st, 0.01);
  // after bias correction mhat = g, vhat = g^2, so the step is lr * sign(g)
  // up to the eps in the denominator
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  CHECK(w[2] == doctest::Approx(0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
  CHECK(st.step == 1);
}

TEST_CASE("adam zero gradient leaves weights unchanged") {
  std::vector<double> w = {1.0, 2.0};
  std::vector<double> g = {0.0, 0.0};
  AdamState st;
  adam_step(w, g, st, 0.1);
  adam_step(w, g, st, 0.1);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 2.0);
}

TEST_CASE("adam rejects bad inputs") {
  std::vector<double> w = {1.0};
  AdamState st;
  std::vector<double> nan_g = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS(adam_step(w, nan_g, st, 0.1));
  std::vector<double> wrong = {1.0, 2.0};
  CHECK_THROWS(adam_step(w, wrong, st, 0.1));
}

TEST_CASE("linear model with zero weights forecasts zero") {
  ForecasterSpec spec;
  spec.lookback = 6;
  spec.horizon = 3;
  spec.channels = 2;
  Forecaster model(spec);
  std::fill(model.params().begin(), model.params().end(), 0.0);
  auto w = random_windows(1, 6, 3, 2, 1);
  auto y = model.predict(w[0].x);
  for (double v : y.data) CHECK(v == 0.0);
  // bias shows up additively in every channel
  model.params()[static_cast<std::size_t>(spec.horizon) * spec.lookback + 1] = 2.5;
  y = model.predict(w[0].x);
  CHECK(y(1, 0) == 2.5);
  CHECK(y(1, 1) == 2.5);
  CHECK(y(0, 0) == 0.0);
}

TEST_CASE("predict rejects shape mismatches") {
  ForecasterSpec spec;
  spec.lookback = 6;
  spec.horizon = 3;
  spec.channels = 2;
  Forecaster model(spec);
  CHECK_THROWS(model.predict(Matrix(5, 2)));
  CHECK_THROWS(model.predict(Matrix(6, 1)));
}

TEST_CASE("linear gradients match central differences") {
  ForecasterSpec spec;
  spec.lookback = 8;
  spec.horizon = 4;
  spec.channels = 2;
  spec.seed = 3;
  Forecaster model(spec);
  auto batch = random_windows(5, 8, 4, 2, 11);
  CHECK(max_grad_rel_err(model, batch) < 1e-4);
}

TEST_CASE("mlp gradients match central differences") {
  ForecasterSpec spec;
  spec.kind = ForecasterSpec::Kind::mlp;
  spec.lookback = 6;
  spec.horizon = 3;
  spec.channels = 2;
  spec.hidden = 8;
  spec.seed = 4;
  Forecaster model(spec);
  auto batch = random_windows(4, 6, 3, 2, 12);
  CHECK(max_grad_rel_err(model, batch) < 1e-4);
}

TEST_CASE("early stopping rule on a pinned loss sequence") {
  auto [ran, best] = early_stop_point({1.0, 0.9, 0.95, 0.96, 0.97, 0.5}, 3);
  CHECK(ran == 5);  // stops before reaching the sixth value
  CHECK(best == 2);
  auto [ran2, best2] = early_stop_point({1.0, 0.9, 0.95, 0.96}, 3);
  CHECK(ran2 == 4);
  CHECK(best2 == 2);
  auto [ran3, best3] = early_stop_point({3.0, 2.0, 1.0}, 2);
  CHECK(ran3 == 3);
  CHECK(best3 == 3);
}

TEST_CASE("training fits a linear relationship") {
  ForecasterSpec spec;
  spec.lookback = 8;
  spec.horizon = 2;
  spec.channels = 1;
  spec.lr = 0.02;
  spec.max_epochs = 120;
  spec.patience = 20;
  spec.batch_size = 16;
  spec.seed = 5;
  auto train = random_windows(200, 8, 2, 1, 21, true);
  auto val = random_windows(60, 8, 2, 1, 22, true);
  auto report = train_full(spec, train, val);
  REQUIRE(!report.val_losses.empty());
  double best = *std::min_element(report.val_losses.begin(), report.val_losses.end());
  CHECK(best < 1e-3);
  // early stop bookkeeping: if it stopped early, exactly patience epochs
  // passed without improvement
  if (report.active_epochs < spec.max_epochs)
    CHECK(report.active_epochs == report.best_epoch + spec.patience);
  CHECK(report.checkpoints.size() == static_cast<std::size_t>(report.active_epochs) + 1);
  CHECK(report.checkpoints[0].epoch == 0);
}

TEST_CASE("exploding step size raises a divergence error") {
  ForecasterSpec spec;
  spec.lookback = 4;
  spec.horizon = 1;
  spec.channels = 1;
  spec.lr = 1e200;
  spec.max_epochs = 5;
  spec.seed = 6;
  auto train = random_windows(40, 4, 1, 1, 31);
  auto val = random_windows(10, 4, 1, 1, 32);
  CHECK_THROWS_AS(train_full(spec, train, val), TrainingDiverged);
}

TEST_CASE("resume from a checkpoint replays uninterrupted training exactly") {
  ForecasterSpec spec;
  spec.lookback = 8;
  spec.horizon = 2;
  spec.channels = 1;
  spec.lr = 0.02;
  spec.max_epochs = 5;
  spec.patience = 10;
  spec.batch_size = 16;
  spec.seed = 7;
  auto train = random_windows(120, 8, 2, 1, 41, true);
  auto val = random_windows(40, 8, 2, 1, 42, true);
  auto full = train_full(spec, train, val);
  REQUIRE(full.active_epochs == 5);
  auto resumed = fine_tune(full.checkpoints[2], spec, train, val, nullptr, 3);
  REQUIRE(resumed.epochs_run == 3);
  // val loss on this problem decreases every epoch, so best weights are the
  // final ones; they must match the uninterrupted run bit for bit
  REQUIRE(resumed.best_weights.size() == full.checkpoints[5].weights.size());
  for (std::size_t i = 0; i < resumed.best_weights.size(); ++i)
    CHECK(resumed.best_weights[i] == full.checkpoints[5].weights[i]);
}

TEST_CASE("fine_tune honors a zero budget and rung pruning") {
  ForecasterSpec spec;
  spec.lookback = 4;
  spec.horizon = 1;
  spec.channels = 1;
  spec.max_epochs = 3;
  spec.seed = 8;
  auto train = random_windows(40, 4, 1, 1, 51, true);
  auto val = random_windows(12, 4, 1, 1, 52, true);
  auto full = train_full(spec, train, val);
  const auto& ck = full.checkpoints[1];

  auto zero = fine_tune(ck, spec, train, val, nullptr, 0);
  CHECK(zero.epochs_run == 0);
  CHECK(zero.final_loss == ck.val_loss);

  int callback_epoch = -1;
  auto pruned = fine_tune(ck, spec, train, val, nullptr, 6, {2},
                          [&](int epoch, double) {
                            callback_epoch = epoch;
                            return asha::Decision::prune;
                          });
  CHECK(pruned.pruned);
  CHECK(pruned.epochs_run == 2);
  CHECK(callback_epoch == 2);
  REQUIRE(pruned.rung_losses.size() == 1);
  CHECK(pruned.final_loss == pruned.rung_losses[0].second);
}

TEST_CASE("checkpoint files round trip bit for bit") {
  ForecasterSpec spec;
  spec.lookback = 4;
  spec.horizon = 2;
  spec.channels = 1;
  spec.max_epochs = 2;
  spec.seed = 9;
  auto train = random_windows(30, 4, 2, 1, 61);
  auto val = random_windows(10, 4, 2, 1, 62);
  auto full = train_full(spec, train, val);
  const auto& ck = full.checkpoints.back();

  const std::string path = "test_ckpt.bin";
  save_checkpoint(path, ck, spec);
  auto back = load_checkpoint(path, spec);
  CHECK(back.epoch == ck.epoch);
  CHECK(back.val_loss == ck.val_loss);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(back.optimizer.step == ck.optimizer.step);
  REQUIRE(back.weights.size() == ck.weights.size());
  for (std::size_t i = 0; i < ck.weights.size(); ++i) CHECK(back.weights[i] == ck.weights[i]);
  for (std::size_t i = 0; i < ck.optimizer.m.size(); ++i) {
    CHECK(back.optimizer.m[i] == ck.optimizer.m[i]);
    CHECK(back.optimizer.v[i] == ck.optimizer.v[i]);
  }

  // a different spec must refuse the restore
  ForecasterSpec other = spec;
  other.lr = 0.5;
  CHECK_THROWS(load_checkpoint(path, other));
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}

TEST_CASE("augment hook sees every batch and can rewrite it") {
  ForecasterSpec spec;
  spec.lookback = 4;
  spec.horizon = 1;
  spec.channels = 1;
  spec.max_epochs = 2;
  spec.patience = 5;
  spec.batch_size = 8;
  spec.seed = 10;
  auto train = random_windows(20, 4, 1, 1, 71, true);
  auto val = random_windows(8, 4, 1, 1, 72, true);
  int calls = 0;
  auto report = train_full(spec, train, val,
                           [&](int, int, const std::vector<WindowPair>& b) {
                             ++calls;
                             return b;
                           });
  // 20 windows, batch 8 -> 3 batches per epoch, 2 epochs
  CHECK(calls == 3 * report.active_epochs);

  // identity hook changes nothing
  auto plain = train_full(spec, train, val);
  auto hooked = train_full(spec, train, val,
                           [](int, int, const std::vector<WindowPair>& b) { return b; });
  for (std::size_t i = 0; i < plain.checkpoints.back().weights.size(); ++i)
    CHECK(plain.checkpoints.back().weights[i] == hooked.checkpoints.back().weights[i]);
}

TEST_CASE("evaluate averages per-window mse") {
  ForecasterSpec spec;
  spec.lookback = 2;
  spec.horizon = 1;
  spec.channels = 1;
  Forecaster model(spec);
  std::fill(model.params().begin(), model.params().end(), 0.0);
  WindowPair a, b;
  a.x = Matrix(2, 1);
  a.y = Matrix(1, 1);
  a.y(0, 0) = 2.0;  // se 4
  b.x = Matrix(2, 1);
  b.y = Matrix(1, 1);
  b.y(0, 0) = 4.0;  // se 16
  CHECK(evaluate(model, {a, b}) == doctest::Approx(10.0));
  auto [m2, m1] = evaluate_mse_mae(model, {a, b});
  CHECK(m2 == doctest::Approx(10.0));
  CHECK(m1 == doctest::Approx(3.0));
}
