#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tsaa/stl.hpp>
#include <tsaa/synth.hpp>

using namespace tsaa;
using namespace tsaa::synth;

namespace {
double variance(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

// least-squares slope of v over [begin, end)
double fit_slope(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double n = static_cast<double>(end - begin), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = begin; t < end; ++t) {
    double x = static_cast<double>(t), y = v[t];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
}  // namespace

TEST_CASE("noiseless seasonal is an exact sinusoid") {
  SynthSpec spec;
  spec.length = 120;
  spec.period = 12;
  spec.noise_sigma = 0;
  spec.rw_sigma = 0;
  auto ts = gen_seasonal(spec);
  REQUIRE(ts.timesteps() == 120);
  double peak = 0;
  for (double v : ts.values.data) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ts.values(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ts.values(3, 0) == doctest::Approx(1.0).epsilon(1e-12));  // quarter period
  CHECK(ts.values(12, 0) == doctest::Approx(ts.values(0, 0)).epsilon(1e-12));
}

TEST_CASE("decomposing a sloped seasonal recovers the slope") {
  SynthSpec spec;
  spec.length = 600;
  spec.period = 12;
  spec.trend_slope = 0.1;
  spec.noise_sigma = 0.05;
  spec.seed = 3;
  auto ts = gen_seasonal(spec);
  auto dec = stl_decompose(ts, 12);
  const std::size_t margin = 24;
  for (std::size_t t = margin; t < spec.length - margin; ++t)
    CHECK(std::abs(dec.trend(t, 0) - 0.1 * static_cast<double>(t)) < 0.05);
}

TEST_CASE("seeding changes the noise, not the deterministic part") {
  SynthSpec clean;
  clean.length = 200;
  clean.period = 24;
  clean.noise_sigma = 0;
  clean.seed = 1;
  auto a = gen_seasonal(clean);
  clean.seed = 2;
  auto b = gen_seasonal(clean);
  CHECK(a.values.data == b.values.data);

  SynthSpec noisy = clean;
  noisy.noise_sigma = 0.05;
  noisy.seed = 1;
  auto na = gen_seasonal(noisy);
  auto na2 = gen_seasonal(noisy);
  noisy.seed = 2;
  auto nb = gen_seasonal(noisy);
  CHECK(na.values.data == na2.values.data);  // reproducible
  CHECK(na.values.data != nb.values.data);
}

TEST_CASE("random walk basics") {
  auto flat = gen_random_walk(100, 0.0, 7);
  for (double v : flat) CHECK(v == 1.0);

  auto w = gen_random_walk(10000, 0.05, 7);
  auto w2 = gen_random_walk(10000, 0.05, 7);
  CHECK(w == w2);
  for (double v : w) CHECK(v >= 0.5);
  std::vector<double> incr(w.size() - 1);
  for (std::size_t t = 1; t < w.size(); ++t) incr[t - 1] = w[t] - w[t - 1];
  double sd = std::sqrt(variance(incr));
  CHECK(sd == doctest::Approx(0.05).epsilon(0.05));
  double mean_incr = 0;
  for (double v : incr) mean_incr += v;
  mean_incr /= static_cast<double>(incr.size());
  CHECK(std::abs(mean_incr) < 0.002);
}

TEST_CASE("neutral walk makes the composite equal the seasonal part") {
  SynthSpec spec;
  spec.length = 200;
  spec.period = 24;
  spec.rw_sigma = 0;
  spec.noise_sigma = 0.05;
  spec.seed = 4;
  auto c = gen_components(spec);
  auto composed = compose_wo_rw(c);
  CHECK(composed.values.data == c.x_s.values.data);
}

TEST_CASE("composites recompute exactly from stored components") {
  SynthSpec spec;
  spec.length = 500;
  spec.period = 24;
  spec.seed = 11;
  auto c = gen_components(spec);
  auto v1 = compose_wo_rw(c);
  auto v2 = compose_with_rw(c);
  // elementwise formulas, checked directly against the components
  for (std::size_t t = 0; t < spec.length; ++t) {
    CHECK(v1.values(t, 0) == c.x_s.values(t, 0) * c.x_rw[t]);
    CHECK(v2.values(t, 0) == (c.x_s.values(t, 0) + c.x_rw[t]) * c.x_rw_hat[t]);
  }
  // convenience overloads reproduce the same series from the spec alone
  CHECK(compose_wo_rw(spec).values.data == v1.values.data);
  CHECK(compose_with_rw(spec).values.data == v2.values.data);
}

TEST_CASE("the extra walk adds variance") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec spec;
    spec.length = 3000;
    spec.period = 24;
    spec.rw_sigma = 0.05;
    spec.seed = 100 + seed;
    auto c = gen_components(spec);
    if (variance(compose_with_rw(c).values.data) >= variance(compose_wo_rw(c).values.data)) ++wins;
  }
  CHECK(wins == 5);
}

TEST_CASE("trend mismatch breaks the slope at the train boundary") {
  SynthSpec spec;
  spec.length = 1000;
  spec.period = 24;
  spec.trend_slope = 0.01;
  spec.noise_sigma = 0;
  spec.seed = 5;
  auto ts = gen_trend_mismatch(spec, 0.7, 1.5);
  const std::size_t t_break = 700;
  // slopes fitted over whole multiples of the period so the sinusoid cancels
  double early = fit_slope(ts.values.data, 0, 696);
  double late = fit_slope(ts.values.data, t_break + 4, t_break + 4 + 288);
  CHECK(early == doctest::Approx(0.015).epsilon(0.02));
  CHECK(late == doctest::Approx(0.01).epsilon(0.02));
  // the series is continuous across the break
  double jump = std::abs(ts.values(t_break, 0) - ts.values(t_break - 1, 0));
  CHECK(jump < 0.5);
}

TEST_CASE("spec validation") {
  SynthSpec bad;
  bad.length = 10;
  bad.period = 24;
  CHECK_THROWS(gen_seasonal(bad));
  SynthSpec neg;
  neg.noise_sigma = -1;
  CHECK_THROWS(gen_seasonal(neg));
  CHECK_THROWS(gen_random_walk(0, 0.1, 1));
  SynthSpec ok;
  CHECK_THROWS(gen_trend_mismatch(ok, 1.5, 1.5));
}
