#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "tsaa/asha.hpp"
#include "tsaa/series.hpp"

namespace tsaa {

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ForecasterSpec {
  enum class Kind { linear, mlp };
  Kind kind = Kind::linear;
  int lookback = 96;
  int horizon = 96;
  int channels = 1;
  int hidden = 64;  // mlp only
  double lr = 1e-3;
  int max_epochs = 10;
  int patience = 3;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (lookback < 1 || horizon < 1 || channels < 1) throw std::invalid_argument("ForecasterSpec: bad shapes");
    if (max_epochs < 1) throw std::invalid_argument("ForecasterSpec: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("ForecasterSpec: patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("ForecasterSpec: batch_size must be >= 1");
    if (kind == Kind::mlp && hidden < 1) throw std::invalid_argument("ForecasterSpec: hidden must be >= 1");
  }

  std::string serialize() const {
    return std::string(kind == Kind::linear ? "linear" : "mlp") + "|" + std::to_string(lookback) + "|" +
           std::to_string(horizon) + "|" + std::to_string(channels) + "|" +
           std::to_string(kind == Kind::mlp ? hidden : 0) + "|" + std::to_string(lr) + "|" +
           std::to_string(max_epochs) + "|" + std::to_string(patience) + "|" +
           std::to_string(batch_size) + "|" + std::to_string(seed);
  }

  std::uint64_t hash() const { return fnv1a(serialize()); }
};

// ---- Adam -----------------------------------------------------------------

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;
};

inline void adam_step(std::vector<double>& weights, const std::vector<double>& grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (weights.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(weights.size(), 0.0);
    state.v.assign(weights.size(), 0.0);
  }
  if (state.m.size() != weights.size()) throw std::invalid_argument("adam_step: state size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    weights[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// ---- models ---------------------------------------------------------------

// Flat-parameter forecaster. linear: one [horizon x lookback] affine map
// shared across channels; mlp: flatten -> hidden ReLU -> horizon*channels.
class Forecaster {
 public:
  explicit Forecaster(const ForecasterSpec& spec) : spec_(spec) {
    spec.validate();
    params_.assign(param_count(spec), 0.0);
    Rng rng(mix_seed(spec.seed, 0x1217));
    if (spec.kind == ForecasterSpec::Kind::linear) {
      init_uniform(rng, 0, static_cast<std::size_t>(spec.horizon * spec.lookback), spec.lookback);
      // bias left at zero
    } else {
      const auto in = static_cast<std::size_t>(spec.lookback * spec.channels);
      const auto hid = static_cast<std::size_t>(spec.hidden);
      const auto out = static_cast<std::size_t>(spec.horizon * spec.channels);
      std::size_t off = 0;
      init_uniform(rng, off, hid * in, static_cast<int>(in));
      off += hid * in + hid;  // skip b1
      init_uniform(rng, off, out * hid, static_cast<int>(hid));
    }
  }

  static std::size_t param_count(const ForecasterSpec& spec) {
    if (spec.kind == ForecasterSpec::Kind::linear)
      return static_cast<std::size_t>(spec.horizon) * spec.lookback + spec.horizon;
    const auto in = static_cast<std::size_t>(spec.lookback * spec.channels);
    const auto hid = static_cast<std::size_t>(spec.hidden);
    const auto out = static_cast<std::size_t>(spec.horizon * spec.channels);
    return hid * in + hid + out * hid + out;
  }

  const ForecasterSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  Matrix predict(const Matrix& x) const {
    check_input(x);
    const int L = spec_.lookback, H = spec_.horizon, C = spec_.channels;
    Matrix y(static_cast<std::size_t>(H), static_cast<std::size_t>(C));
    if (spec_.kind == ForecasterSpec::Kind::linear) {
      const double* W = params_.data();
      const double* b = W + static_cast<std::size_t>(H) * L;
      for (int h = 0; h < H; ++h)
        for (int c = 0; c < C; ++c) {
          double acc = b[h];
          for (int l = 0; l < L; ++l) acc += W[h * L + l] * x(static_cast<std::size_t>(l), static_cast<std::size_t>(c));
          y(static_cast<std::size_t>(h), static_cast<std::size_t>(c)) = acc;
        }
      return y;
    }
    std::vector<double> hidden;
    mlp_forward(x, hidden, y);
    return y;
  }

  // Mean over the batch of per-window MSE, with gradient accumulated into
  // `grad` (resized and zeroed here).
  double loss_and_grad(const std::vector<WindowPair>& batch, std::vector<double>& grad) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    grad.assign(params_.size(), 0.0);
    const int L = spec_.lookback, H = spec_.horizon, C = spec_.channels;
    const double inv = 1.0 / (static_cast<double>(batch.size()) * H * C);
    double loss = 0.0;
    if (spec_.kind == ForecasterSpec::Kind::linear) {
      const double* W = params_.data();
      double* gW = grad.data();
      double* gb = gW + static_cast<std::size_t>(H) * L;
      for (const auto& w : batch) {
        check_input(w.x);
        for (int h = 0; h < H; ++h)
          for (int c = 0; c < C; ++c) {
            double acc = params_[static_cast<std::size_t>(H) * L + h];
            for (int l = 0; l < L; ++l) acc += W[h * L + l] * w.x(static_cast<std::size_t>(l), static_cast<std::size_t>(c));
            double e = acc - w.y(static_cast<std::size_t>(h), static_cast<std::size_t>(c));
            loss += e * e * inv;
            double d = 2.0 * e * inv;
            for (int l = 0; l < L; ++l) gW[h * L + l] += d * w.x(static_cast<std::size_t>(l), static_cast<std::size_t>(c));
            gb[h] += d;
          }
      }
      return loss;
    }
    // mlp
    const auto in = static_cast<std::size_t>(L * C);
    const auto hid = static_cast<std::size_t>(spec_.hidden);
    const auto out = static_cast<std::size_t>(H * C);
    const double* W1 = params_.data();
    const double* b1 = W1 + hid * in;
    const double* W2 = b1 + hid;
    double* gW1 = grad.data();
    double* gb1 = gW1 + hid * in;
    double* gW2 = gb1 + hid;
    double* gb2 = gW2 + out * hid;
    std::vector<double> hidden, dhidden(hid);
    Matrix y(static_cast<std::size_t>(H), static_cast<std::size_t>(C));
    for (const auto& w : batch) {
      check_input(w.x);
      mlp_forward(w.x, hidden, y);
      std::fill(dhidden.begin(), dhidden.end(), 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        double e = y.data[o] - w.y.data[o];
        loss += e * e * inv;
        double d = 2.0 * e * inv;
        gb2[o] += d;
        for (std::size_t hidx = 0; hidx < hid; ++hidx) {
          gW2[o * hid + hidx] += d * hidden[hidx];
          dhidden[hidx] += d * W2[o * hid + hidx];
        }
      }
      for (std::size_t hidx = 0; hidx < hid; ++hidx) {
        if (hidden[hidx] <= 0.0) continue;  // ReLU gate
        gb1[hidx] += dhidden[hidx];
        for (std::size_t i = 0; i < in; ++i) gW1[hidx * in + i] += dhidden[hidx] * w.x.data[i];
      }
    }
    return loss;
  }

 private:
  void init_uniform(Rng& rng, std::size_t offset, std::size_t count, int fan_in) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> ud(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = ud(rng);
  }

  void check_input(const Matrix& x) const {
    if (x.rows != static_cast<std::size_t>(spec_.lookback) || x.cols != static_cast<std::size_t>(spec_.channels))
      throw std::invalid_argument("Forecaster: input shape mismatch");
  }

  void mlp_forward(const Matrix& x, std::vector<double>& hidden, Matrix& y) const {
    const auto in = static_cast<std::size_t>(spec_.lookback * spec_.channels);
    const auto hid = static_cast<std::size_t>(spec_.hidden);
    const auto out = static_cast<std::size_t>(spec_.horizon * spec_.channels);
    const double* W1 = params_.data();
    const double* b1 = W1 + hid * in;
    const double* W2 = b1 + hid;
    const double* b2 = W2 + out * hid;
    hidden.assign(hid, 0.0);
    for (std::size_t h = 0; h < hid; ++h) {
      double acc = b1[h];
      for (std::size_t i = 0; i < in; ++i) acc += W1[h * in + i] * x.data[i];
      hidden[h] = acc > 0.0 ? acc : 0.0;
    }
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b2[o];
      for (std::size_t h = 0; h < hid; ++h) acc += W2[o * hid + h] * hidden[h];
      y.data[o] = acc;
    }
  }

  ForecasterSpec spec_;
  std::vector<double> params_;
};

inline double evaluate(const Forecaster& model, const std::vector<WindowPair>& windows) {
  if (windows.empty()) throw std::invalid_argument("evaluate: empty window set");
  double acc = 0.0;
  for (const auto& w : windows) acc += mse(model.predict(w.x), w.y);
  return acc / static_cast<double>(windows.size());
}

inline std::pair<double, double> evaluate_mse_mae(const Forecaster& model,
                                                  const std::vector<WindowPair>& windows) {
  if (windows.empty()) throw std::invalid_argument("evaluate: empty window set");
  double se = 0.0, ae = 0.0;
  for (const auto& w : windows) {
    auto pred = model.predict(w.x);
    se += mse(pred, w.y);
    ae += mae(pred, w.y);
  }
  auto n = static_cast<double>(windows.size());
  return {se / n, ae / n};
}

// ---- training -------------------------------------------------------------

// Weights plus optimizer and RNG state; restoring and resuming replays the
// exact seed stream of uninterrupted training.
struct Checkpoint {
  int epoch = 0;
  std::vector<double> weights;
  AdamState optimizer;
  std::string rng_state;
  double val_loss = 0.0;
};

struct TrainReport {
  int active_epochs = 0;  // K: epochs actually run before early stopping
  std::vector<double> train_losses;
  std::vector<double> val_losses;
  std::vector<Checkpoint> checkpoints;  // index == epoch, [0] is the init
  int best_epoch = 0;
};

// Called once per batch before the forward pass.
using AugmentFn = std::function<std::vector<WindowPair>(int epoch, int batch_index, const std::vector<WindowPair>&)>;

// Patience-based stopping over a 1-based per-epoch validation loss sequence:
// returns (epochs run, best epoch). Improvement is strict.
inline std::pair<int, int> early_stop_point(const std::vector<double>& val_losses, int patience,
                                            double init_val = std::numeric_limits<double>::infinity()) {
  double best = init_val;
  int best_epoch = 0, since = 0, ran = 0;
  for (std::size_t i = 0; i < val_losses.size(); ++i) {
    ran = static_cast<int>(i) + 1;
    if (val_losses[i] < best) {
      best = val_losses[i];
      best_epoch = ran;
      since = 0;
    } else if (++since >= patience) {
      break;
    }
  }
  return {ran, best_epoch};
}

namespace detail {

inline double run_epoch(Forecaster& model, AdamState& opt, Rng& rng,
                        const std::vector<WindowPair>& train, const ForecasterSpec& spec,
                        const AugmentFn& augment, int epoch) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  double epoch_loss = 0.0;
  int batches = 0;
  std::vector<double> grad;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
    std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
    std::vector<WindowPair> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
    if (augment) batch = augment(epoch, batches, batch);
    double loss = model.loss_and_grad(batch, grad);
    if (!std::isfinite(loss))
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batches));
    adam_step(model.params(), grad, opt, spec.lr);
    epoch_loss += loss;
    ++batches;
  }
  return batches ? epoch_loss / batches : 0.0;
}

inline Checkpoint snapshot(const Forecaster& model, const AdamState& opt, const Rng& rng, int epoch,
                           double val_loss) {
  Checkpoint ck;
  ck.epoch = epoch;
  ck.weights = model.params();
  ck.optimizer = opt;
  ck.rng_state = save_rng(rng);
  ck.val_loss = val_loss;
  return ck;
}

}  // namespace detail

inline TrainReport train_full(const ForecasterSpec& spec, const std::vector<WindowPair>& train,
                              const std::vector<WindowPair>& val, const AugmentFn& augment = nullptr) {
  spec.validate();
  if (train.empty() || val.empty()) throw std::invalid_argument("train_full: empty window sets");
  Forecaster model(spec);
  AdamState opt;
  Rng rng(mix_seed(spec.seed, 0x7e1));
  TrainReport report;
  double init_val = evaluate(model, val);
  report.checkpoints.push_back(detail::snapshot(model, opt, rng, 0, init_val));
  double best = init_val;
  report.best_epoch = 0;
  int since_improvement = 0;
  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    double train_loss = detail::run_epoch(model, opt, rng, train, spec, augment, epoch);
    double val_loss = evaluate(model, val);
    report.train_losses.push_back(train_loss);
    report.val_losses.push_back(val_loss);
    report.checkpoints.push_back(detail::snapshot(model, opt, rng, epoch, val_loss));
    report.active_epochs = epoch;
    if (val_loss < best) {
      best = val_loss;
      report.best_epoch = epoch;
      since_improvement = 0;
    } else {
      ++since_improvement;
      if (since_improvement >= spec.patience) break;
    }
  }
  return report;
}

struct FineTuneReport {
  std::vector<std::pair<int, double>> rung_losses;  // (epoch, val loss)
  double final_loss = 0.0;
  int epochs_run = 0;
  bool pruned = false;
  std::vector<double> best_weights;
};

using RungCallback = std::function<asha::Decision(int epoch, double val_loss)>;

// Resumes training from a checkpoint: optimizer state and RNG stream are
// restored, not reinitialized.
inline FineTuneReport fine_tune(const Checkpoint& from, const ForecasterSpec& spec,
                                const std::vector<WindowPair>& train, const std::vector<WindowPair>& val,
                                const AugmentFn& augment, int epoch_budget,
                                const std::vector<int>& rung_epochs = {},
                                const RungCallback& rung_callback = nullptr) {
  spec.validate();
  Forecaster model(spec);
  if (from.weights.size() != model.params().size())
    throw std::invalid_argument("fine_tune: checkpoint incompatible with spec");
  model.params() = from.weights;
  AdamState opt = from.optimizer;
  Rng rng;
  load_rng(rng, from.rng_state);

  FineTuneReport report;
  report.final_loss = from.val_loss;
  report.best_weights = from.weights;
  double best = from.val_loss;
  int since_improvement = 0;
  for (int step = 1; step <= epoch_budget; ++step) {
    int epoch = from.epoch + step;
    detail::run_epoch(model, opt, rng, train, spec, augment, epoch);
    double val_loss = evaluate(model, val);
    report.epochs_run = step;
    if (val_loss < best) {
      best = val_loss;
      report.best_weights = model.params();
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    bool is_rung = std::find(rung_epochs.begin(), rung_epochs.end(), step) != rung_epochs.end();
    if (is_rung && rung_callback) {
      report.rung_losses.emplace_back(step, val_loss);
      if (rung_callback(step, val_loss) == asha::Decision::prune) {
        report.pruned = true;
        report.final_loss = val_loss;  // a pruned policy is evidence of badness
        return report;
      }
    }
    if (since_improvement >= spec.patience) break;
  }
  report.final_loss = best;
  return report;
}

// ---- checkpoint files -----------------------------------------------------

inline void save_checkpoint(const std::string& path, const Checkpoint& ck, const ForecasterSpec& spec) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const char magic[8] = {'T', 'S', 'A', 'A', 'C', 'K', 'P', 'T'};
    out.write(magic, 8);
    auto write_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto write_vec = [&](const std::vector<double>& v) {
      write_u64(v.size());
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    };
    write_u64(static_cast<std::uint64_t>(ck.epoch));
    write_u64(static_cast<std::uint64_t>(ck.optimizer.step));
    write_vec(ck.weights);
    write_vec(ck.optimizer.m);
    write_vec(ck.optimizer.v);
    write_u64(ck.rng_state.size());
    out.write(ck.rng_state.data(), static_cast<std::streamsize>(ck.rng_state.size()));
  }
  nlohmann::json side;
  side["spec_hash"] = spec.hash();
  side["epoch"] = ck.epoch;
  side["val_loss"] = ck.val_loss;
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path, const ForecasterSpec& spec) {
  nlohmann::json side;
  {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("load_checkpoint: missing sidecar for " + path);
    js >> side;
  }
  if (side.at("spec_hash").get<std::uint64_t>() != spec.hash())
    throw std::runtime_error("load_checkpoint: spec hash mismatch for " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "TSAACKPT") throw std::runtime_error("load_checkpoint: bad magic in " + path);
  auto read_u64 = [&]() {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto read_vec = [&](std::vector<double>& v) {
    v.resize(read_u64());
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  };
  Checkpoint ck;
  ck.epoch = static_cast<int>(read_u64());
  ck.optimizer.step = static_cast<long long>(read_u64());
  read_vec(ck.weights);
  read_vec(ck.optimizer.m);
  read_vec(ck.optimizer.v);
  ck.rng_state.resize(read_u64());
  in.read(ck.rng_state.data(), static_cast<std::streamsize>(ck.rng_state.size()));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  ck.val_loss = side.at("val_loss").get<double>();
  return ck;
}

}  // namespace tsaa
