#pragma once

#include "tsaa/series.hpp"

namespace tsaa {
namespace synth {

struct SynthSpec {
  std::size_t length = 3000;
  std::size_t period = 24;
  double amplitude = 1.0;
  double trend_slope = 0.0;
  double noise_sigma = 0.05;
  double rw_sigma = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (period < 2) throw std::invalid_argument("SynthSpec: period must be >= 2");
    if (length < 4 * period) throw std::invalid_argument("SynthSpec: length must be >= 4*period");
    if (noise_sigma < 0 || rw_sigma < 0) throw std::invalid_argument("SynthSpec: sigmas must be >= 0");
  }
};

namespace detail {
constexpr double kTau = 6.283185307179586;

inline TimeSeries wrap(std::vector<double> values, std::size_t period) {
  TimeSeries ts;
  ts.values = Matrix(values.size(), 1);
  ts.values.data = std::move(values);
  ts.frequency = "p" + std::to_string(period);
  ts.channel_names = {"value"};
  return ts;
}
}  // namespace detail

// x_s: sinusoid of the given period and amplitude, plus a linear trend and
// additive Gaussian noise.
inline TimeSeries gen_seasonal(const SynthSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, 0x5ea5));
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::vector<double> v(spec.length);
  for (std::size_t t = 0; t < spec.length; ++t) {
    v[t] = spec.amplitude * std::sin(detail::kTau * static_cast<double>(t) / static_cast<double>(spec.period)) +
           spec.trend_slope * static_cast<double>(t);
    if (spec.noise_sigma > 0) v[t] += noise(rng);
  }
  return detail::wrap(std::move(v), spec.period);
}

// Gaussian random walk started at 1 and shifted up if needed so min >= 0.5;
// keeps multiplicative composition sign-stable. With rw_sigma 0 the walk is
// the constant 1.
inline std::vector<double> gen_random_walk(std::size_t length, double rw_sigma, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("gen_random_walk: length must be >= 1");
  if (rw_sigma < 0) throw std::invalid_argument("gen_random_walk: rw_sigma must be >= 0");
  Rng rng(mix_seed(seed, 0x0a1c));
  std::normal_distribution<double> step(0.0, rw_sigma);
  std::vector<double> w(length);
  w[0] = 1.0;
  for (std::size_t t = 1; t < length; ++t) w[t] = w[t - 1] + (rw_sigma > 0 ? step(rng) : 0.0);
  double lo = *std::min_element(w.begin(), w.end());
  if (lo < 0.5)
    for (auto& x : w) x += 0.5 - lo;
  return w;
}

// The two paired composites share the same component realizations so that
// their comparison isolates the extra walk.
struct Components {
  TimeSeries x_s;
  std::vector<double> x_rw;
  std::vector<double> x_rw_hat;
};

inline Components gen_components(const SynthSpec& spec) {
  spec.validate();
  Components c;
  c.x_s = gen_seasonal(spec);
  c.x_rw = gen_random_walk(spec.length, spec.rw_sigma, mix_seed(spec.seed, 0x11));
  c.x_rw_hat = gen_random_walk(spec.length, spec.rw_sigma, mix_seed(spec.seed, 0x22));
  return c;
}

// x_s * x_rw
inline TimeSeries compose_wo_rw(const Components& c) {
  std::vector<double> v(c.x_s.timesteps());
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = c.x_s.values(t, 0) * c.x_rw[t];
  TimeSeries out = detail::wrap(std::move(v), 1);
  out.frequency = c.x_s.frequency;
  return out;
}

// (x_s + x_rw) * x_rw_hat
inline TimeSeries compose_with_rw(const Components& c) {
  std::vector<double> v(c.x_s.timesteps());
  for (std::size_t t = 0; t < v.size(); ++t)
    v[t] = (c.x_s.values(t, 0) + c.x_rw[t]) * c.x_rw_hat[t];
  TimeSeries out = detail::wrap(std::move(v), 1);
  out.frequency = c.x_s.frequency;
  return out;
}

inline TimeSeries compose_wo_rw(const SynthSpec& spec) { return compose_wo_rw(gen_components(spec)); }
inline TimeSeries compose_with_rw(const SynthSpec& spec) { return compose_with_rw(gen_components(spec)); }

// A seasonal series whose trend slope drops at the train/rest boundary: the
// train split climbs `ratio` times as fast as the remainder, so a model fit
// on the train split systematically overestimates the later trend.
inline TimeSeries gen_trend_mismatch(const SynthSpec& spec, double train_fraction = 0.7,
                                     double ratio = 1.5) {
  spec.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("gen_trend_mismatch: train_fraction must be in (0,1)");
  if (ratio <= 0.0) throw std::invalid_argument("gen_trend_mismatch: ratio must be > 0");
  Rng rng(mix_seed(spec.seed, 0x7d1f));
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  const auto t_break = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(spec.length)));
  const double s_train = spec.trend_slope * ratio;
  const double s_rest = spec.trend_slope;
  std::vector<double> v(spec.length);
  for (std::size_t t = 0; t < spec.length; ++t) {
    double trend = t < t_break
                       ? s_train * static_cast<double>(t)
                       : s_train * static_cast<double>(t_break) + s_rest * static_cast<double>(t - t_break);
    v[t] = spec.amplitude * std::sin(detail::kTau * static_cast<double>(t) / static_cast<double>(spec.period)) +
           trend;
    if (spec.noise_sigma > 0) v[t] += noise(rng);
  }
  return detail::wrap(std::move(v), spec.period);
}

}  // namespace synth
}  // namespace tsaa
