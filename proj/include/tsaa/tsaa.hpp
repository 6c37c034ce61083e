#pragma once

#include <atomic>
#include <thread>

#include "tsaa/asha.hpp"
#include "tsaa/augment.hpp"
#include "tsaa/forecast.hpp"
#include "tsaa/tpe.hpp"

namespace tsaa {

struct TsaaConfig {
  double beta = 0.5;
  int T_max = 100;
  int k = 3;
  int n = 2;
  int eta = 3;
  int r = 1;
  double exploration_fraction = 0.3;
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("TsaaConfig: beta must be in [0,1)");
    if (T_max < 1) throw std::invalid_argument("TsaaConfig: T_max must be >= 1");
    if (k < 1) throw std::invalid_argument("TsaaConfig: k must be >= 1");
    if (n < 1) throw std::invalid_argument("TsaaConfig: n must be >= 1");
    if (eta < 2) throw std::invalid_argument("TsaaConfig: eta must be >= 2");
    if (r < 1) throw std::invalid_argument("TsaaConfig: r must be >= 1");
    if (!(exploration_fraction >= 0.0 && exploration_fraction <= 1.0))
      throw std::invalid_argument("TsaaConfig: exploration_fraction must be in [0,1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("TsaaConfig: epsilon must be in (0,1)");
    if (workers < 1) throw std::invalid_argument("TsaaConfig: workers must be >= 1");
  }

  std::size_t startup_trials() const {
    return static_cast<std::size_t>(std::ceil(exploration_fraction * static_cast<double>(T_max)));
  }
};

inline nlohmann::json config_to_json(const TsaaConfig& c) {
  return {{"beta", c.beta},       {"T_max", c.T_max},
          {"k", c.k},             {"n", c.n},
          {"eta", c.eta},         {"r", c.r},
          {"exploration_fraction", c.exploration_fraction},
          {"epsilon", c.epsilon}, {"seed", c.seed},
          {"workers", c.workers}};
}

inline TsaaConfig config_from_json(const nlohmann::json& j) {
  TsaaConfig c;
  c.beta = j.value("beta", c.beta);
  c.T_max = j.value("T_max", c.T_max);
  c.k = j.value("k", c.k);
  c.n = j.value("n", c.n);
  c.eta = j.value("eta", c.eta);
  c.r = j.value("r", c.r);
  c.exploration_fraction = j.value("exploration_fraction", c.exploration_fraction);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  c.validate();
  return c;
}

// ---- data preparation -----------------------------------------------------

// Standardized splits plus the decomposition the structural transforms read.
// The decomposition covers the train region only, in standardized units, so
// augmentation sees the same scale the model does and never touches held-out
// rows.
struct Dataset {
  std::size_t period = 0;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  Standardizer scaler;
  Decomposition decomposition;
  std::vector<WindowPair> train_windows;
  std::vector<WindowPair> val_windows;
  std::vector<WindowPair> test_windows;
};

inline Dataset prepare_dataset(const TimeSeries& series, std::size_t period, std::size_t lookback,
                               std::size_t horizon, const SplitSpec& split = {}, bool warn = true) {
  series.validate();
  Dataset d;
  d.period = period;
  d.lookback = lookback;
  d.horizon = horizon;
  auto ranges = split_series(series.timesteps(), split);

  TimeSeries train_slice;
  train_slice.values = Matrix(ranges.train_end - ranges.train_begin, series.channels());
  for (std::size_t t = ranges.train_begin; t < ranges.train_end; ++t)
    for (std::size_t c = 0; c < series.channels(); ++c)
      train_slice.values(t - ranges.train_begin, c) = series.values(t, c);
  train_slice.channel_names = series.channel_names;
  d.scaler = Standardizer::fit(train_slice, warn);

  TimeSeries std_train = d.scaler.apply(train_slice);
  std_train.frequency = series.frequency;
  d.decomposition = stl_decompose(std_train, period);

  TimeSeries standardized = d.scaler.apply(series);
  d.train_windows = make_windows_in_range(standardized, ranges.train_begin, ranges.train_end, lookback, horizon);
  d.val_windows = make_windows_in_range(standardized, ranges.val_begin, ranges.val_end, lookback, horizon);
  d.test_windows = make_windows_in_range(standardized, ranges.test_begin, ranges.test_end, lookback, horizon);
  if (d.train_windows.empty() || d.val_windows.empty() || d.test_windows.empty())
    throw std::invalid_argument("prepare_dataset: a split is too short for lookback+horizon");
  return d;
}

// ---- step 1 ---------------------------------------------------------------

struct Step1Result {
  Checkpoint omega_share;
  int K = 0;  // active baseline epochs
  int R = 0;  // fine-tune budget, K - floor(beta*K)
  double baseline_val = 0.0;
  double baseline_test_mse = 0.0;
  double baseline_test_mae = 0.0;
  std::vector<double> best_weights;  // baseline weights at the best epoch
  TrainReport report;
};

inline Step1Result step1_shared_weights(const ForecasterSpec& fspec, const Dataset& data,
                                        const TsaaConfig& cfg) {
  cfg.validate();
  Step1Result out;
  out.report = train_full(fspec, data.train_windows, data.val_windows);
  out.K = out.report.active_epochs;
  auto share_epoch = static_cast<int>(std::floor(cfg.beta * out.K));
  if (share_epoch == 0 && cfg.beta > 0.0)
    std::cerr << "step1: floor(beta*K) == 0, sharing the initialization checkpoint\n";
  out.omega_share = out.report.checkpoints[static_cast<std::size_t>(share_epoch)];
  out.R = out.K - share_epoch;
  out.baseline_val = out.report.checkpoints[static_cast<std::size_t>(out.report.best_epoch)].val_loss;
  out.best_weights = out.report.checkpoints[static_cast<std::size_t>(out.report.best_epoch)].weights;

  Forecaster best(fspec);
  best.params() = out.best_weights;
  auto [tmse, tmae] = evaluate_mse_mae(best, data.test_windows);
  out.baseline_test_mse = tmse;
  out.baseline_test_mae = tmae;
  return out;
}

// ---- step 2 ---------------------------------------------------------------

namespace detail {

inline SubPolicy params_to_subpolicy(const tpe::ParamVector& p) {
  SubPolicy sp;
  for (std::size_t j = 0; j < p.kinds.size(); ++j) {
    OpSpec op;
    op.kind = static_cast<TransformKind>(p.kinds[j]);
    op.m = p.mags[j];
    sp.ops.push_back(op);
  }
  return sp;
}

inline tpe::ParamVector subpolicy_to_params(const SubPolicy& sp) {
  tpe::ParamVector p;
  for (const auto& op : sp.ops) {
    p.kinds.push_back(static_cast<int>(op.kind));
    p.mags.push_back(op.m);
  }
  return p;
}

// Batch hook that applies one policy distribution; all randomness is derived
// from `stream_seed`, (epoch, batch) and the pair index, never from the
// trainer's shuffle stream.
inline AugmentFn make_augment_fn(const PolicyDistribution dist, const Decomposition* dec,
                                 std::uint64_t stream_seed) {
  if (dist.empty()) return nullptr;
  return [dist, dec, stream_seed](int epoch, int batch, const std::vector<WindowPair>& b) {
    AugmentContext ctx;
    ctx.decomposition = dec;
    ctx.rng_seed = mix_seed(stream_seed, (static_cast<std::uint64_t>(epoch) << 20) ^
                                             static_cast<std::uint64_t>(batch));
    return sample_and_apply(dist, b, ctx);
  };
}

}  // namespace detail

inline std::vector<asha::Trial> step2_search(const Step1Result& s1, const ForecasterSpec& fspec,
                                             const Dataset& data, const TsaaConfig& cfg) {
  cfg.validate();
  if (s1.R < 1) throw std::invalid_argument("step2_search: R must be >= 1");
  const auto schedule = asha::make_schedule(cfg.r, s1.R, cfg.eta);
  const tpe::SearchSpace space{cfg.n, kNumTransformKinds, cfg.epsilon, 1.0};
  tpe::TpeConfig tpe_cfg;
  tpe_cfg.n_candidates = 24;
  tpe_cfg.startup = cfg.startup_trials();

  asha::RungTable table(cfg.eta);
  tpe::ObservationHistory history;
  std::mutex history_mu;
  std::vector<asha::Trial> trials(static_cast<std::size_t>(cfg.T_max));

  auto run_trial = [&](int t) {
    Rng trial_rng(mix_seed(cfg.seed, 0xA000u + static_cast<std::uint64_t>(t)));
    tpe::ParamVector params;
    if (static_cast<std::size_t>(t) < tpe_cfg.startup) {
      params = tpe::sample_uniform(space, trial_rng);
    } else {
      tpe::ObservationHistory snapshot;
      {
        std::lock_guard<std::mutex> lock(history_mu);
        snapshot = history;
      }
      params = tpe::suggest(snapshot, space, tpe_cfg, trial_rng);
    }
    asha::Trial trial;
    trial.trial_id = t;
    trial.subpolicy = detail::params_to_subpolicy(params);

    PolicyDistribution single;
    single.subpolicies = {trial.subpolicy};
    single.n = cfg.n;
    single.epsilon = cfg.epsilon;
    auto augment = detail::make_augment_fn(single, &data.decomposition,
                                           mix_seed(cfg.seed, 0xB000u + static_cast<std::uint64_t>(t)));
    try {
      auto ft = fine_tune(s1.omega_share, fspec, data.train_windows, data.val_windows, augment, s1.R,
                          schedule.rung_epochs, [&](int epoch, double val_loss) {
                            return table.decide(epoch, t, val_loss);
                          });
      trial.rung_losses = ft.rung_losses;
      trial.final_loss = ft.final_loss;
      trial.epochs_spent = ft.epochs_run;
      if (ft.pruned) {
        trial.status = asha::TrialStatus::pruned;
        trial.pruned_at_rung = ft.rung_losses.back().first;
      } else {
        trial.status = asha::TrialStatus::completed;
      }
    } catch (const TrainingDiverged&) {
      trial.status = asha::TrialStatus::failed;
      trial.final_loss = std::numeric_limits<double>::infinity();
      trial.epochs_spent = s1.R;  // conservative accounting for the aborted run
    }
    {
      std::lock_guard<std::mutex> lock(history_mu);
      tpe::Observation obs;
      obs.params = params;
      obs.loss = trial.final_loss;
      obs.trial_id = t;
      history.append(std::move(obs));
    }
    trials[static_cast<std::size_t>(t)] = std::move(trial);
  };

  if (cfg.workers == 1) {
    for (int t = 0; t < cfg.T_max; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.workers; ++w)
      pool.emplace_back([&]() {
        for (int t = next.fetch_add(1); t < cfg.T_max; t = next.fetch_add(1)) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }
  return trials;
}

// ---- selection & finalization ---------------------------------------------

inline PolicyDistribution select_policy(const std::vector<asha::Trial>& trials, double baseline_val,
                                        const TsaaConfig& cfg) {
  if (trials.empty()) throw std::invalid_argument("select_policy: no trials");
  std::vector<const asha::Trial*> improving;
  for (const auto& t : trials)
    if (t.status == asha::TrialStatus::completed && std::isfinite(t.final_loss) &&
        t.final_loss < baseline_val)
      improving.push_back(&t);
  std::sort(improving.begin(), improving.end(), [](const asha::Trial* a, const asha::Trial* b) {
    if (a->final_loss != b->final_loss) return a->final_loss < b->final_loss;
    return a->trial_id < b->trial_id;
  });
  PolicyDistribution dist;
  dist.n = cfg.n;
  dist.epsilon = cfg.epsilon;
  for (std::size_t i = 0; i < improving.size() && i < static_cast<std::size_t>(cfg.k); ++i)
    dist.subpolicies.push_back(improving[i]->subpolicy);
  return dist;
}

struct TsaaResult {
  PolicyDistribution p_star;
  double baseline_val = 0.0;
  double baseline_test_mse = 0.0;
  double baseline_test_mae = 0.0;
  std::vector<asha::Trial> trials;
  double final_val = 0.0;
  double final_test_mse = 0.0;
  double final_test_mae = 0.0;
  double relative_improvement_mse = 0.0;
  long long epochs_spent = 0;  // search-phase epochs across all trials
  int K = 0;
  int R = 0;
};

inline TsaaResult finalize(const Step1Result& s1, const PolicyDistribution& p_star,
                           const std::vector<asha::Trial>& trials, const ForecasterSpec& fspec,
                           const Dataset& data, const TsaaConfig& cfg) {
  TsaaResult out;
  out.p_star = p_star;
  out.trials = trials;
  out.baseline_val = s1.baseline_val;
  out.baseline_test_mse = s1.baseline_test_mse;
  out.baseline_test_mae = s1.baseline_test_mae;
  out.K = s1.K;
  out.R = s1.R;
  out.epochs_spent = asha::budget_spent(trials);

  std::vector<double> final_weights;
  if (p_star.empty()) {
    out.final_val = s1.baseline_val;
    final_weights = s1.best_weights;
  } else {
    auto augment = detail::make_augment_fn(p_star, &data.decomposition, mix_seed(cfg.seed, 0xF17ull));
    auto ft = fine_tune(s1.omega_share, fspec, data.train_windows, data.val_windows, augment, s1.R);
    out.final_val = ft.final_loss;
    final_weights = ft.best_weights;
  }
  Forecaster model(fspec);
  model.params() = final_weights;
  auto [tmse, tmae] = evaluate_mse_mae(model, data.test_windows);
  out.final_test_mse = tmse;
  out.final_test_mae = tmae;
  out.relative_improvement_mse = relative_improvement(out.baseline_test_mse, out.final_test_mse);
  return out;
}

// Algorithm end to end. Set cfg.exploration_fraction to 1.0 for the
// random-search comparison mode.
inline TsaaResult run_tsaa(const TimeSeries& series, std::size_t period, const ForecasterSpec& fspec,
                           const TsaaConfig& cfg, const SplitSpec& split = {}, bool warn = true) {
  auto data = prepare_dataset(series, period, static_cast<std::size_t>(fspec.lookback),
                              static_cast<std::size_t>(fspec.horizon), split, warn);
  auto s1 = step1_shared_weights(fspec, data, cfg);
  std::vector<asha::Trial> trials;
  PolicyDistribution p_star;
  p_star.n = cfg.n;
  p_star.epsilon = cfg.epsilon;
  if (s1.R >= 1) {
    trials = step2_search(s1, fspec, data, cfg);
    p_star = select_policy(trials, s1.baseline_val, cfg);
  }
  return finalize(s1, p_star, trials, fspec, data, cfg);
}

}  // namespace tsaa
