#pragma once

#include <fstream>
#include <map>

#include "tsaa/series.hpp"

namespace tsaa {

struct StlConfig {
  int seasonal_span = 7;  // loess span over cycle-subseries points
  int trend_span = 0;     // 0 = auto: next odd >= 1.5*p / (1 - 1.5/seasonal_span)
  int inner_iterations = 2;
  int outer_iterations = 1;

  std::uint64_t hash() const {
    std::string s = std::to_string(seasonal_span) + "|" + std::to_string(trend_span) + "|" +
                    std::to_string(inner_iterations) + "|" + std::to_string(outer_iterations);
    return fnv1a(s);
  }
};

// Additive trend/seasonal/remainder split. Remainder is the residual, so
// trend + seasonal + remainder reconstructs the input exactly.
struct Decomposition {
  Matrix trend;
  Matrix seasonal;
  Matrix remainder;
  int period = 0;
};

namespace detail {

inline int next_odd(double x) {
  int n = static_cast<int>(std::ceil(x));
  if (n % 2 == 0) ++n;
  return std::max(n, 3);
}

// Weighted local linear regression at position g over points (0..n-1, y)
// using the q nearest points with tricube weights. `rw` are optional
// robustness weights.
inline double loess_at(const std::vector<double>& y, const std::vector<double>* rw, int q, double g) {
  const int n = static_cast<int>(y.size());
  if (n == 1) return y[0];
  q = std::min(q, n);
  // window of q indices nearest to g
  int i0 = static_cast<int>(std::floor(g)) - q / 2;
  i0 = std::max(0, std::min(i0, n - q));
  // slide so the window really holds the nearest points
  while (i0 > 0 && g - (i0 - 1) < (i0 + q - 1) - g) --i0;
  while (i0 + q < n && (i0 + q) - g < g - i0) ++i0;

  double dmax = std::max(std::abs(g - i0), std::abs(g - (i0 + q - 1)));
  if (dmax <= 0) dmax = 1.0;
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (int i = i0; i < i0 + q; ++i) {
    double d = std::abs(static_cast<double>(i) - g) / dmax;
    if (d >= 1.0) d = 1.0;
    double u = 1.0 - d * d * d;
    double w = u * u * u;
    if (rw) w *= (*rw)[static_cast<std::size_t>(i)];
    if (w <= 0) continue;
    double x = static_cast<double>(i) - g;
    sw += w;
    swx += w * x;
    swy += w * y[static_cast<std::size_t>(i)];
    swxx += w * x * x;
    swxy += w * x * y[static_cast<std::size_t>(i)];
  }
  if (sw <= 0) {
    // all weights vanished (heavy robustness downweighting); fall back to plain mean
    double m = 0;
    for (int i = i0; i < i0 + q; ++i) m += y[static_cast<std::size_t>(i)];
    return m / q;
  }
  double det = sw * swxx - swx * swx;
  if (std::abs(det) < 1e-12 * std::max(1.0, sw * swxx)) return swy / sw;
  // intercept of the local line at x = 0 (i.e. at position g)
  return (swxx * swy - swx * swxy) / det;
}

inline std::vector<double> loess_series(const std::vector<double>& y, const std::vector<double>* rw, int q) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = loess_at(y, rw, q, static_cast<double>(i));
  return out;
}

inline std::vector<double> moving_average(const std::vector<double>& y, int w) {
  const int n = static_cast<int>(y.size());
  std::vector<double> out;
  if (n < w) return out;
  out.resize(static_cast<std::size_t>(n - w + 1));
  double acc = 0;
  for (int i = 0; i < w; ++i) acc += y[static_cast<std::size_t>(i)];
  out[0] = acc / w;
  for (int i = w; i < n; ++i) {
    acc += y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i - w)];
    out[static_cast<std::size_t>(i - w + 1)] = acc / w;
  }
  return out;
}

// One channel of classical STL.
inline void stl_channel(const std::vector<double>& y, int p, const StlConfig& cfg,
                        std::vector<double>& trend, std::vector<double>& seasonal) {
  const int n = static_cast<int>(y.size());
  const int ns = std::max(3, cfg.seasonal_span | 1);
  const int nl = (p % 2 == 1) ? p : p + 1;
  const int nt = cfg.trend_span > 0 ? (cfg.trend_span | 1)
                                    : next_odd(1.5 * p / (1.0 - 1.5 / ns));

  trend.assign(y.size(), 0.0);
  seasonal.assign(y.size(), 0.0);
  std::vector<double> rweights(y.size(), 1.0);
  const std::vector<double>* rw = nullptr;

  for (int outer = 0; outer <= cfg.outer_iterations; ++outer) {
    for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
      // 1. detrend
      std::vector<double> det(y.size());
      for (int t = 0; t < n; ++t) det[static_cast<std::size_t>(t)] = y[static_cast<std::size_t>(t)] - trend[static_cast<std::size_t>(t)];

      // 2. cycle-subseries loess, extended one period at each end
      std::vector<double> C(static_cast<std::size_t>(n + 2 * p), 0.0);
      for (int k = 0; k < p; ++k) {
        std::vector<double> sub, subw;
        for (int t = k; t < n; t += p) {
          sub.push_back(det[static_cast<std::size_t>(t)]);
          subw.push_back(rweights[static_cast<std::size_t>(t)]);
        }
        const int mk = static_cast<int>(sub.size());
        const std::vector<double>* srw = rw ? &subw : nullptr;
        for (int j = -1; j <= mk; ++j) {
          double v = loess_at(sub, srw, std::min(ns, mk), static_cast<double>(j));
          int t = k + (j + 1) * p;  // position in the extended array
          if (t >= 0 && t < n + 2 * p) C[static_cast<std::size_t>(t)] = v;
        }
      }

      // 3. low-pass the extended seasonal: MA(p), MA(p), MA(3), loess(nl)
      auto L = moving_average(moving_average(moving_average(C, p), p), 3);
      L = loess_series(L, nullptr, nl);

      // 4. seasonal = centered cycle-subseries minus low-pass
      for (int t = 0; t < n; ++t)
        seasonal[static_cast<std::size_t>(t)] = C[static_cast<std::size_t>(t + p)] - L[static_cast<std::size_t>(t)];

      // 5-6. deseasonalize and re-estimate trend
      std::vector<double> des(y.size());
      for (int t = 0; t < n; ++t)
        des[static_cast<std::size_t>(t)] = y[static_cast<std::size_t>(t)] - seasonal[static_cast<std::size_t>(t)];
      trend = loess_series(des, rw, nt);
    }
    if (outer < cfg.outer_iterations) {
      // robustness weights from the remainder (bisquare)
      std::vector<double> absr(y.size());
      for (int t = 0; t < n; ++t)
        absr[static_cast<std::size_t>(t)] =
            std::abs(y[static_cast<std::size_t>(t)] - trend[static_cast<std::size_t>(t)] - seasonal[static_cast<std::size_t>(t)]);
      std::vector<double> sorted = absr;
      std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
      double h = 6.0 * sorted[static_cast<std::size_t>(n / 2)];
      if (h < 1e-12) {
        std::fill(rweights.begin(), rweights.end(), 1.0);
      } else {
        for (int t = 0; t < n; ++t) {
          double u = absr[static_cast<std::size_t>(t)] / h;
          double w = u >= 1.0 ? 0.0 : (1.0 - u * u) * (1.0 - u * u);
          rweights[static_cast<std::size_t>(t)] = w;
        }
      }
      rw = &rweights;
    }
  }

  // Shift per-period block means from the seasonal into the trend so every
  // full period of the seasonal averages to ~0.
  const int blocks = n / p;
  for (int b = 0; b < blocks; ++b) {
    double m = 0;
    for (int t = b * p; t < (b + 1) * p; ++t) m += seasonal[static_cast<std::size_t>(t)];
    m /= p;
    for (int t = b * p; t < (b + 1) * p; ++t) {
      seasonal[static_cast<std::size_t>(t)] -= m;
      trend[static_cast<std::size_t>(t)] += m;
    }
  }
  if (blocks * p < n) {
    double m = 0;
    int cnt = 0;
    for (int t = blocks * p; t < n; ++t, ++cnt) m += seasonal[static_cast<std::size_t>(t)];
    if (cnt > 0) m /= cnt;
    for (int t = blocks * p; t < n; ++t) {
      seasonal[static_cast<std::size_t>(t)] -= m;
      trend[static_cast<std::size_t>(t)] += m;
    }
  }
}

}  // namespace detail

inline Decomposition stl_decompose(const TimeSeries& series, int period, const StlConfig& cfg = {}) {
  if (period < 2) throw std::invalid_argument("stl_decompose: period must be >= 2");
  const int n = static_cast<int>(series.timesteps());
  if (n < 2 * period)
    throw std::invalid_argument("stl_decompose: need at least 2*period = " +
                                std::to_string(2 * period) + " timesteps, got " + std::to_string(n));
  const std::size_t C = series.channels();
  Decomposition d;
  d.period = period;
  d.trend = Matrix(series.timesteps(), C);
  d.seasonal = Matrix(series.timesteps(), C);
  d.remainder = Matrix(series.timesteps(), C);
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> y(series.timesteps());
    for (std::size_t t = 0; t < series.timesteps(); ++t) y[t] = series.values(t, c);
    std::vector<double> trend, seasonal;
    detail::stl_channel(y, period, cfg, trend, seasonal);
    for (std::size_t t = 0; t < series.timesteps(); ++t) {
      d.trend(t, c) = trend[t];
      d.seasonal(t, c) = seasonal[t];
      d.remainder(t, c) = y[t] - trend[t] - seasonal[t];
    }
  }
  return d;
}

inline int infer_period(const std::string& frequency_label) {
  static const std::map<std::string, int> table = {
      {"hourly", 24}, {"15min", 96}, {"15 minutes", 96}, {"10min", 144},
      {"10 minutes", 144}, {"daily", 7}, {"weekly", 52},
  };
  auto it = table.find(frequency_label);
  if (it == table.end()) {
    std::string known;
    for (const auto& [k, v] : table) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("infer_period: unknown frequency label '" + frequency_label +
                                "'; accepted labels: " + known + " (or pass an explicit period)");
  }
  return it->second;
}

// ---- decomposition cache --------------------------------------------------

inline void save_decomposition(const std::string& path, const Decomposition& d, std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_decomposition: cannot open " + path);
  out << std::setprecision(17);
  out << "# tsaa-stl-cache period=" << d.period << " hash=" << config_hash
      << " rows=" << d.trend.rows << " cols=" << d.trend.cols << "\n";
  for (const Matrix* m : {&d.trend, &d.seasonal, &d.remainder}) {
    for (std::size_t r = 0; r < m->rows; ++r) {
      for (std::size_t c = 0; c < m->cols; ++c) out << (c ? "," : "") << (*m)(r, c);
      out << "\n";
    }
  }
}

// Returns false if the cache is missing or was written with a different config.
inline bool load_decomposition(const std::string& path, std::uint64_t config_hash, Decomposition& d) {
  std::ifstream in(path);
  if (!in) return false;
  std::string tag;
  int period = 0;
  std::uint64_t hash = 0;
  std::size_t rows = 0, cols = 0;
  std::string header;
  if (!std::getline(in, header)) return false;
  {
    std::istringstream hs(header);
    std::string word;
    hs >> word >> word;  // "#" "tsaa-stl-cache"
    while (hs >> word) {
      auto eq = word.find('=');
      if (eq == std::string::npos) continue;
      auto key = word.substr(0, eq);
      auto val = word.substr(eq + 1);
      if (key == "period") period = std::stoi(val);
      else if (key == "hash") hash = std::stoull(val);
      else if (key == "rows") rows = std::stoull(val);
      else if (key == "cols") cols = std::stoull(val);
    }
  }
  if (hash != config_hash || rows == 0 || cols == 0) return false;
  d.period = period;
  for (Matrix* m : {&d.trend, &d.seasonal, &d.remainder}) {
    *m = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      std::string line;
      if (!std::getline(in, line)) return false;
      std::istringstream ls(line);
      std::string field;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!std::getline(ls, field, ',')) return false;
        (*m)(r, c) = std::stod(field);
      }
    }
  }
  return true;
}

}  // namespace tsaa
