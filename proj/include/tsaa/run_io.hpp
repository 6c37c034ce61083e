#pragma once

#include <filesystem>

#include "tsaa/csv.hpp"
#include "tsaa/synth.hpp"
#include "tsaa/tsaa.hpp"

namespace tsaa {

// ---- forecaster spec json -------------------------------------------------

inline nlohmann::json fspec_to_json(const ForecasterSpec& f) {
  return {{"kind", f.kind == ForecasterSpec::Kind::linear ? "linear" : "mlp"},
          {"lookback", f.lookback},
          {"horizon", f.horizon},
          {"channels", f.channels},
          {"hidden", f.hidden},
          {"lr", f.lr},
          {"max_epochs", f.max_epochs},
          {"patience", f.patience},
          {"batch_size", f.batch_size},
          {"seed", f.seed}};
}

inline ForecasterSpec fspec_from_json(const nlohmann::json& j) {
  ForecasterSpec f;
  if (j.contains("kind")) {
    auto k = j.at("kind").get<std::string>();
    if (k == "linear")
      f.kind = ForecasterSpec::Kind::linear;
    else if (k == "mlp")
      f.kind = ForecasterSpec::Kind::mlp;
    else
      throw std::invalid_argument("forecaster kind must be 'linear' or 'mlp', got '" + k + "'");
  }
  f.lookback = j.value("lookback", f.lookback);
  f.horizon = j.value("horizon", f.horizon);
  f.channels = j.value("channels", f.channels);
  f.hidden = j.value("hidden", f.hidden);
  f.lr = j.value("lr", f.lr);
  f.max_epochs = j.value("max_epochs", f.max_epochs);
  f.patience = j.value("patience", f.patience);
  f.batch_size = j.value("batch_size", f.batch_size);
  f.seed = j.value("seed", f.seed);
  f.validate();
  return f;
}

// ---- synth spec json ------------------------------------------------------

inline nlohmann::json synth_to_json(const synth::SynthSpec& s, const std::string& variant) {
  return {{"variant", variant},    {"length", s.length},
          {"period", s.period},    {"amplitude", s.amplitude},
          {"trend_slope", s.trend_slope},
          {"noise_sigma", s.noise_sigma},
          {"rw_sigma", s.rw_sigma}, {"seed", s.seed}};
}

inline synth::SynthSpec synth_from_json(const nlohmann::json& j) {
  synth::SynthSpec s;
  s.length = j.value("length", s.length);
  s.period = j.value("period", s.period);
  s.amplitude = j.value("amplitude", s.amplitude);
  s.trend_slope = j.value("trend_slope", s.trend_slope);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.rw_sigma = j.value("rw_sigma", s.rw_sigma);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

inline TimeSeries generate_variant(const synth::SynthSpec& spec, const std::string& variant) {
  if (variant == "seasonal") return synth::gen_seasonal(spec);
  if (variant == "trend-mismatch") return synth::gen_trend_mismatch(spec);
  if (variant == "wo-rw") return synth::compose_wo_rw(spec);
  if (variant == "with-rw") return synth::compose_with_rw(spec);
  throw std::invalid_argument("unknown synth variant '" + variant + "'");
}

// ---- run configuration ----------------------------------------------------

enum class RunMode { tsaa, random_search, baseline_only };

inline RunMode mode_from_string(const std::string& s) {
  if (s == "tsaa") return RunMode::tsaa;
  if (s == "random-search") return RunMode::random_search;
  if (s == "baseline-only") return RunMode::baseline_only;
  throw std::invalid_argument("mode must be tsaa, random-search, or baseline-only, got '" + s + "'");
}

inline const char* mode_to_string(RunMode m) {
  switch (m) {
    case RunMode::tsaa: return "tsaa";
    case RunMode::random_search: return "random-search";
    case RunMode::baseline_only: return "baseline-only";
  }
  return "tsaa";
}

struct RunConfig {
  std::string csv_path;  // one of csv_path / synth is set
  bool has_synth = false;
  synth::SynthSpec synth_spec;
  std::string synth_variant = "trend-mismatch";
  std::size_t period = 24;
  ForecasterSpec forecaster;
  TsaaConfig tsaa;
  SplitSpec split;
  RunMode mode = RunMode::tsaa;
  std::string out_dir = "run";

  void validate() const {
    if (csv_path.empty() && !has_synth)
      throw std::invalid_argument("RunConfig: set either data.csv or data.synth");
    if (!csv_path.empty() && has_synth)
      throw std::invalid_argument("RunConfig: data.csv and data.synth are mutually exclusive");
    if (period < 2) throw std::invalid_argument("RunConfig: period must be >= 2");
    forecaster.validate();
    tsaa.validate();
    split.validate();
  }
};

inline nlohmann::json runconfig_to_json(const RunConfig& c) {
  nlohmann::json j;
  if (c.has_synth)
    j["data"] = {{"synth", synth_to_json(c.synth_spec, c.synth_variant)}, {"period", c.period}};
  else
    j["data"] = {{"csv", c.csv_path}, {"period", c.period}};
  j["forecaster"] = fspec_to_json(c.forecaster);
  j["tsaa"] = config_to_json(c.tsaa);
  j["split"] = {{"train", c.split.train_fraction},
                {"val", c.split.val_fraction},
                {"test", c.split.test_fraction}};
  j["mode"] = mode_to_string(c.mode);
  j["out"] = c.out_dir;
  return j;
}

inline RunConfig runconfig_from_json(const nlohmann::json& j) {
  RunConfig c;
  const auto& data = j.at("data");
  if (data.contains("synth")) {
    c.has_synth = true;
    c.synth_spec = synth_from_json(data.at("synth"));
    c.synth_variant = data.at("synth").value("variant", c.synth_variant);
  } else {
    c.csv_path = data.at("csv").get<std::string>();
  }
  c.period = data.value("period", c.period);
  if (j.contains("forecaster")) c.forecaster = fspec_from_json(j.at("forecaster"));
  if (j.contains("tsaa")) c.tsaa = config_from_json(j.at("tsaa"));
  if (j.contains("split")) {
    c.split.train_fraction = j.at("split").value("train", c.split.train_fraction);
    c.split.val_fraction = j.at("split").value("val", c.split.val_fraction);
    c.split.test_fraction = j.at("split").value("test", c.split.test_fraction);
  }
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  c.out_dir = j.value("out", c.out_dir);
  c.validate();
  return c;
}

inline RunConfig load_runconfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
  return runconfig_from_json(j);
}

// ---- trial / result serialization -----------------------------------------

inline nlohmann::json trial_to_json(const asha::Trial& t) {
  nlohmann::json j;
  j["trial_id"] = t.trial_id;
  switch (t.status) {
    case asha::TrialStatus::running: j["status"] = "running"; break;
    case asha::TrialStatus::pruned: j["status"] = "pruned"; break;
    case asha::TrialStatus::completed: j["status"] = "completed"; break;
    case asha::TrialStatus::failed: j["status"] = "failed"; break;
  }
  j["ops"] = nlohmann::json::array();
  for (const auto& op : t.subpolicy.ops)
    j["ops"].push_back({{"kind", transform_name(op.kind)}, {"m", op.m}});
  j["final_loss"] = std::isfinite(t.final_loss) ? nlohmann::json(t.final_loss) : nlohmann::json();
  j["epochs_spent"] = t.epochs_spent;
  j["pruned_at_rung"] = t.pruned_at_rung;
  j["rung_losses"] = nlohmann::json::array();
  for (const auto& [e, l] : t.rung_losses) j["rung_losses"].push_back({{"epoch", e}, {"loss", l}});
  return j;
}

inline asha::Trial trial_from_json(const nlohmann::json& j) {
  asha::Trial t;
  t.trial_id = j.at("trial_id").get<int>();
  auto s = j.at("status").get<std::string>();
  if (s == "running") t.status = asha::TrialStatus::running;
  else if (s == "pruned") t.status = asha::TrialStatus::pruned;
  else if (s == "completed") t.status = asha::TrialStatus::completed;
  else if (s == "failed") t.status = asha::TrialStatus::failed;
  else throw std::invalid_argument("unknown trial status '" + s + "'");
  for (const auto& jop : j.at("ops")) {
    OpSpec op;
    op.kind = transform_from_name(jop.at("kind").get<std::string>());
    op.m = jop.at("m").get<double>();
    t.subpolicy.ops.push_back(op);
  }
  t.final_loss = j.at("final_loss").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("final_loss").get<double>();
  t.epochs_spent = j.at("epochs_spent").get<int>();
  t.pruned_at_rung = j.value("pruned_at_rung", -1);
  if (j.contains("rung_losses"))
    for (const auto& jr : j.at("rung_losses"))
      t.rung_losses.emplace_back(jr.at("epoch").get<int>(), jr.at("loss").get<double>());
  return t;
}

inline nlohmann::json result_to_json(const TsaaResult& r) {
  nlohmann::json j;
  j["baseline"] = {{"val_mse", r.baseline_val},
                   {"test_mse", r.baseline_test_mse},
                   {"test_mae", r.baseline_test_mae}};
  j["final"] = {{"val_mse", r.final_val},
                {"test_mse", r.final_test_mse},
                {"test_mae", r.final_test_mae}};
  j["relative_improvement_mse"] = r.relative_improvement_mse;
  j["epochs_spent"] = r.epochs_spent;
  j["K"] = r.K;
  j["R"] = r.R;
  j["num_trials"] = r.trials.size();
  j["num_policies"] = r.p_star.subpolicies.size();
  return j;
}

// ---- run directory --------------------------------------------------------

inline void write_ops_histogram_csv(const std::string& path,
                                    const std::map<TransformKind, double>& hist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "transform,percent\n";
  for (const auto& [k, pct] : hist) out << transform_name(k) << "," << pct << "\n";
}

// Everything needed to regenerate the report lives inside the directory.
inline void write_run_dir(const std::string& dir, const RunConfig& config, const TsaaResult& result,
                          const Step1Result* s1 = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(dir + "/config.json");
    out << runconfig_to_json(config).dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/trials.jsonl");
    for (const auto& t : result.trials) out << trial_to_json(t).dump() << "\n";
  }
  {
    std::ofstream out(dir + "/policy.json");
    out << policy_to_json(result.p_star).dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/result.json");
    out << result_to_json(result).dump(2) << "\n";
  }
  if (!result.trials.empty()) {
    std::vector<std::pair<SubPolicy, double>> scored;
    for (const auto& t : result.trials)
      if (t.status == asha::TrialStatus::completed && std::isfinite(t.final_loss))
        scored.emplace_back(t.subpolicy, t.final_loss);
    if (!scored.empty())
      write_ops_histogram_csv(dir + "/ops_histogram.csv", ops_histogram(scored, 0.25));
  }
  if (s1) {
    fs::create_directories(dir + "/baseline");
    save_checkpoint(dir + "/baseline/omega_share.bin", s1->omega_share, config.forecaster);
    nlohmann::json rep;
    rep["K"] = s1->K;
    rep["R"] = s1->R;
    rep["best_epoch"] = s1->report.best_epoch;
    rep["val_losses"] = s1->report.val_losses;
    rep["train_losses"] = s1->report.train_losses;
    rep["baseline_val"] = s1->baseline_val;
    rep["test_mse"] = s1->baseline_test_mse;
    rep["test_mae"] = s1->baseline_test_mae;
    std::ofstream out(dir + "/baseline/report.json");
    out << rep.dump(2) << "\n";
  }
}

// Markdown report regenerated purely from the run directory.
inline std::string make_report(const std::string& dir) {
  std::ifstream rin(dir + "/result.json");
  if (!rin) throw std::invalid_argument("no result.json in " + dir + " (not a finished run?)");
  nlohmann::json res;
  rin >> res;
  double eb = res.at("baseline").at("test_mse").get<double>();
  double en = res.at("final").at("test_mse").get<double>();
  std::ostringstream md;
  md << "# Run report\n\n";
  md << "| metric | baseline | final |\n|---|---|---|\n";
  md << "| test MSE | " << eb << " | " << en << " |\n";
  md << "| test MAE | " << res.at("baseline").at("test_mae").get<double>() << " | "
     << res.at("final").at("test_mae").get<double>() << " |\n";
  md << "| val MSE | " << res.at("baseline").at("val_mse").get<double>() << " | "
     << res.at("final").at("val_mse").get<double>() << " |\n\n";
  md << "Relative improvement (test MSE): " << relative_improvement(eb, en) << "%\n\n";
  md << "Epochs spent in search: " << res.at("epochs_spent").get<long long>() << " (K="
     << res.at("K").get<int>() << ", R=" << res.at("R").get<int>() << ")\n";
  std::ifstream hin(dir + "/ops_histogram.csv");
  if (hin) {
    md << "\n## Operations histogram (top quartile of trials)\n\n| transform | % of ops |\n|---|---|\n";
    std::string line;
    std::getline(hin, line);  // header
    while (std::getline(hin, line)) {
      auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      md << "| " << line.substr(0, comma) << " | " << line.substr(comma + 1) << " |\n";
    }
  }
  return md.str();
}

}  // namespace tsaa
