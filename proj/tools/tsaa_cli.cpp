#include <CLI11.hpp>

#include <tsaa/run_io.hpp>

namespace {

bool verbose() {
  const char* v = std::getenv("TSAA_LOG");
  return v && *v && std::string(v) != "0";
}

void log(const std::string& msg) {
  if (verbose()) std::cerr << "[tsaa] " << msg << "\n";
}

// ingestion problems are usage errors (exit 2), not compute failures
tsaa::TimeSeries read_csv_or_usage(const std::string& path) {
  try {
    return tsaa::read_csv(path);
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(e.what());
  }
}

tsaa::TimeSeries load_series(const tsaa::RunConfig& cfg) {
  if (cfg.has_synth) return tsaa::generate_variant(cfg.synth_spec, cfg.synth_variant);
  return read_csv_or_usage(cfg.csv_path);
}

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::string mode_override;
  long long seed_override = -1;
  int workers_override = 0;
};

tsaa::RunConfig resolve(const CommonOpts& opts) {
  auto cfg = tsaa::load_runconfig(opts.config_path);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (!opts.mode_override.empty()) cfg.mode = tsaa::mode_from_string(opts.mode_override);
  if (opts.seed_override >= 0) {
    cfg.tsaa.seed = static_cast<std::uint64_t>(opts.seed_override);
    cfg.forecaster.seed = static_cast<std::uint64_t>(opts.seed_override);
  }
  if (opts.workers_override > 0) cfg.tsaa.workers = opts.workers_override;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool need_config = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "run configuration JSON");
  if (need_config) c->required();
  cmd->add_option("--out", opts.out_override, "output directory (overrides config)");
  cmd->add_option("--mode", opts.mode_override, "tsaa | random-search | baseline-only");
  cmd->add_option("--seed", opts.seed_override, "seed override");
  cmd->add_option("--workers", opts.workers_override, "concurrent trial workers");
}

int cmd_generate(const CommonOpts& opts) {
  auto cfg = resolve(opts);
  if (!cfg.has_synth) throw std::invalid_argument("generate needs a data.synth block in the config");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto ts = tsaa::generate_variant(cfg.synth_spec, cfg.synth_variant);
  tsaa::write_csv(cfg.out_dir + "/data.csv", ts);
  // components sidecar so composites can be recomputed and byte-compared
  auto comp = tsaa::synth::gen_components(cfg.synth_spec);
  tsaa::Matrix side(comp.x_s.timesteps(), 3);
  for (std::size_t t = 0; t < side.rows; ++t) {
    side(t, 0) = comp.x_s.values(t, 0);
    side(t, 1) = comp.x_rw[t];
    side(t, 2) = comp.x_rw_hat[t];
  }
  tsaa::write_csv(cfg.out_dir + "/components.csv", side, {"x_s", "x_rw", "x_rw_hat"});
  log("wrote " + cfg.out_dir + "/data.csv (" + std::to_string(ts.timesteps()) + " rows)");
  return 0;
}

int cmd_baseline(const CommonOpts& opts) {
  auto cfg = resolve(opts);
  auto series = load_series(cfg);
  auto data = tsaa::prepare_dataset(series, cfg.period, static_cast<std::size_t>(cfg.forecaster.lookback),
                                    static_cast<std::size_t>(cfg.forecaster.horizon), cfg.split);
  auto s1 = tsaa::step1_shared_weights(cfg.forecaster, data, cfg.tsaa);
  tsaa::TsaaResult result;
  result.baseline_val = s1.baseline_val;
  result.baseline_test_mse = s1.baseline_test_mse;
  result.baseline_test_mae = s1.baseline_test_mae;
  result.final_val = s1.baseline_val;
  result.final_test_mse = s1.baseline_test_mse;
  result.final_test_mae = s1.baseline_test_mae;
  result.K = s1.K;
  result.R = s1.R;
  tsaa::write_run_dir(cfg.out_dir, cfg, result, &s1);
  log("baseline K=" + std::to_string(s1.K) + " val=" + std::to_string(s1.baseline_val));
  std::cout << "baseline test MSE " << s1.baseline_test_mse << " MAE " << s1.baseline_test_mae << "\n";
  return 0;
}

int cmd_search(const CommonOpts& opts) {
  auto cfg = resolve(opts);
  auto series = load_series(cfg);
  auto run_cfg = cfg.tsaa;
  if (cfg.mode == tsaa::RunMode::random_search) run_cfg.exploration_fraction = 1.0;

  auto data = tsaa::prepare_dataset(series, cfg.period, static_cast<std::size_t>(cfg.forecaster.lookback),
                                    static_cast<std::size_t>(cfg.forecaster.horizon), cfg.split);
  auto s1 = tsaa::step1_shared_weights(cfg.forecaster, data, run_cfg);
  log("step1 done: K=" + std::to_string(s1.K) + " R=" + std::to_string(s1.R));

  tsaa::TsaaResult result;
  if (cfg.mode == tsaa::RunMode::baseline_only || s1.R < 1) {
    result = tsaa::finalize(s1, tsaa::PolicyDistribution{}, {}, cfg.forecaster, data, run_cfg);
  } else {
    auto trials = tsaa::step2_search(s1, cfg.forecaster, data, run_cfg);
    log("step2 done: " + std::to_string(trials.size()) + " trials, " +
        std::to_string(tsaa::asha::budget_spent(trials)) + " epochs");
    auto p_star = tsaa::select_policy(trials, s1.baseline_val, run_cfg);
    result = tsaa::finalize(s1, p_star, trials, cfg.forecaster, data, run_cfg);
  }
  tsaa::write_run_dir(cfg.out_dir, cfg, result, &s1);
  std::cout << "baseline test MSE " << result.baseline_test_mse << ", final test MSE "
            << result.final_test_mse << " (" << result.relative_improvement_mse << "% improvement), "
            << result.p_star.subpolicies.size() << " policies\n";
  return 0;
}

int cmd_augment(const std::string& policy_path, const std::string& data_path,
                const std::string& out_path, std::size_t period, std::uint64_t seed) {
  nlohmann::json pj;
  {
    std::ifstream in(policy_path);
    if (!in) throw std::invalid_argument("cannot open policy file " + policy_path);
    try {
      in >> pj;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("malformed policy JSON: " + std::string(e.what()));
    }
  }
  auto policy = tsaa::policy_from_json(pj);
  if (policy.empty()) throw std::invalid_argument("policy has no subpolicies");
  auto series = read_csv_or_usage(data_path);
  auto dec = tsaa::stl_decompose(series, period);
  std::size_t lookback = 2 * period, horizon = period;
  auto windows = tsaa::make_windows(series, lookback, horizon);
  tsaa::AugmentContext ctx;
  ctx.decomposition = &dec;
  ctx.rng_seed = seed;
  auto augmented = tsaa::sample_and_apply(policy, windows, ctx);
  // long format: one row per (window, step)
  tsaa::Matrix out(augmented.size() * (lookback + horizon), series.channels() + 2);
  std::size_t row = 0;
  for (std::size_t w = 0; w < augmented.size(); ++w) {
    auto cat = tsaa::vconcat(augmented[w].x, augmented[w].y);
    for (std::size_t r = 0; r < cat.rows; ++r, ++row) {
      out(row, 0) = static_cast<double>(w);
      out(row, 1) = static_cast<double>(r);
      for (std::size_t c = 0; c < cat.cols; ++c) out(row, c + 2) = cat(r, c);
    }
  }
  std::vector<std::string> header = {"window", "step"};
  for (const auto& n : series.channel_names) header.push_back(n);
  tsaa::write_csv(out_path, out, header);
  log("wrote " + std::to_string(augmented.size()) + " augmented windows to " + out_path);
  return 0;
}

int cmd_report(const std::string& run_dir) {
  auto md = tsaa::make_report(run_dir);
  std::ofstream out(run_dir + "/report.md");
  if (!out) throw std::runtime_error("cannot write report into " + run_dir);
  out << md;
  std::cout << md;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-series augmentation policy search"};
  app.require_subcommand(1);

  CommonOpts gen_opts, base_opts, search_opts;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset CSV");
  add_common(gen, gen_opts);
  auto* base = app.add_subcommand("baseline", "train the no-augmentation baseline");
  add_common(base, base_opts);
  auto* search = app.add_subcommand("search", "run the full policy search");
  add_common(search, search_opts);

  std::string policy_path, data_path, aug_out = "augmented.csv";
  std::size_t aug_period = 24;
  std::uint64_t aug_seed = 0;
  auto* aug = app.add_subcommand("augment", "apply a policy file to a CSV");
  aug->add_option("--policy", policy_path, "policy JSON")->required();
  aug->add_option("--data", data_path, "input series CSV")->required();
  aug->add_option("--out", aug_out, "output CSV");
  aug->add_option("--period", aug_period, "seasonal period");
  aug->add_option("--seed", aug_seed, "augmentation seed");

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "regenerate the report from a run directory");
  rep->add_option("--out", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_opts);
    if (base->parsed()) return cmd_baseline(base_opts);
    if (search->parsed()) return cmd_search(search_opts);
    if (aug->parsed()) return cmd_augment(policy_path, data_path, aug_out, aug_period, aug_seed);
    if (rep->parsed()) return cmd_report(report_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
