#pragma once

#include <algorithm>
#include <iostream>
#include <numeric>

#include "tsaa/common.hpp"

namespace tsaa {

// Multichannel series with frequency metadata. Values are [timesteps x channels].
struct TimeSeries {
  Matrix values;
  std::string frequency;
  std::vector<std::string> channel_names;

  std::size_t timesteps() const { return values.rows; }
  std::size_t channels() const { return values.cols; }

  void validate() const {
    if (values.rows < 1 || values.cols < 1)
      throw std::invalid_argument("TimeSeries: need at least 1 timestep and 1 channel");
    if (!values.all_finite())
      throw std::invalid_argument("TimeSeries: non-finite values after ingestion");
  }
};

// One (lookback, horizon) training example. y starts where x ends.
struct WindowPair {
  Matrix x;  // [lookback x channels]
  Matrix y;  // [horizon x channels]
  std::size_t origin_index = 0;  // offset of x's first row in the parent series
};

struct SplitSpec {
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;

  void validate() const {
    auto ok = [](double f) { return f > 0.0 && f < 1.0; };
    if (!ok(train_fraction) || !ok(val_fraction) || !ok(test_fraction))
      throw std::invalid_argument("SplitSpec: each fraction must be in (0,1)");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
      throw std::invalid_argument("SplitSpec: fractions must sum to 1");
  }
};

// Half-open row ranges of the chronological splits.
struct SplitRanges {
  std::size_t train_begin = 0, train_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t test_begin = 0, test_end = 0;
};

inline SplitRanges split_series(std::size_t timesteps, const SplitSpec& spec) {
  spec.validate();
  SplitRanges r;
  auto t = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(timesteps)));
  auto v = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(timesteps)));
  r.train_begin = 0;
  r.train_end = t;
  r.val_begin = t;
  r.val_end = t + v;
  r.test_begin = t + v;
  r.test_end = timesteps;
  return r;
}

inline std::vector<WindowPair> make_windows(const TimeSeries& series, std::size_t lookback,
                                            std::size_t horizon, std::size_t stride = 1) {
  if (lookback == 0 || horizon == 0) throw std::invalid_argument("make_windows: lookback and horizon must be positive");
  if (stride == 0) throw std::invalid_argument("make_windows: stride must be >= 1");
  const std::size_t T = series.timesteps();
  if (lookback + horizon > T)
    throw std::invalid_argument("make_windows: series of length " + std::to_string(T) +
                                " is shorter than lookback+horizon = " +
                                std::to_string(lookback + horizon));
  const std::size_t C = series.channels();
  std::vector<WindowPair> out;
  for (std::size_t o = 0; o + lookback + horizon <= T; o += stride) {
    WindowPair w;
    w.origin_index = o;
    w.x = Matrix(lookback, C);
    w.y = Matrix(horizon, C);
    for (std::size_t i = 0; i < lookback; ++i)
      for (std::size_t c = 0; c < C; ++c) w.x(i, c) = series.values(o + i, c);
    for (std::size_t i = 0; i < horizon; ++i)
      for (std::size_t c = 0; c < C; ++c) w.y(i, c) = series.values(o + lookback + i, c);
    out.push_back(std::move(w));
  }
  return out;
}

// Windows restricted to one split. Windows whose horizon would cross past
// `end` are dropped so no example straddles a split boundary.
inline std::vector<WindowPair> make_windows_in_range(const TimeSeries& series, std::size_t begin,
                                                     std::size_t end, std::size_t lookback,
                                                     std::size_t horizon, std::size_t stride = 1) {
  if (end > series.timesteps()) throw std::invalid_argument("make_windows_in_range: range exceeds series");
  const std::size_t C = series.channels();
  std::vector<WindowPair> out;
  if (end < begin || end - begin < lookback + horizon) return out;
  for (std::size_t o = begin; o + lookback + horizon <= end; o += stride) {
    WindowPair w;
    w.origin_index = o;
    w.x = Matrix(lookback, C);
    w.y = Matrix(horizon, C);
    for (std::size_t i = 0; i < lookback; ++i)
      for (std::size_t c = 0; c < C; ++c) w.x(i, c) = series.values(o + i, c);
    for (std::size_t i = 0; i < horizon; ++i)
      for (std::size_t c = 0; c < C; ++c) w.y(i, c) = series.values(o + lookback + i, c);
    out.push_back(std::move(w));
  }
  return out;
}

// Per-channel z-score statistics fit on the train split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Standardizer fit(const TimeSeries& train_slice, bool warn = true) {
    if (train_slice.timesteps() == 0) throw std::invalid_argument("Standardizer::fit: empty slice");
    const std::size_t T = train_slice.timesteps(), C = train_slice.channels();
    Standardizer s;
    s.mean.assign(C, 0.0);
    s.std.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (std::size_t t = 0; t < T; ++t) m += train_slice.values(t, c);
      m /= static_cast<double>(T);
      double var = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double d = train_slice.values(t, c) - m;
        var += d * d;
      }
      var /= static_cast<double>(T);  // population variance
      s.mean[c] = m;
      double sd = std::sqrt(var);
      if (sd < 1e-12) {
        if (warn) std::cerr << "standardizer: channel " << c << " is constant, forcing std=1\n";
        sd = 1.0;
      }
      s.std[c] = sd;
    }
    return s;
  }

  Matrix apply(const Matrix& m) const {
    check(m);
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = (m(r, c) - mean[c]) / std[c];
    return out;
  }

  Matrix invert(const Matrix& m) const {
    check(m);
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = m(r, c) * std[c] + mean[c];
    return out;
  }

  TimeSeries apply(const TimeSeries& s) const {
    TimeSeries out = s;
    out.values = apply(s.values);
    return out;
  }

 private:
  void check(const Matrix& m) const {
    if (m.cols != mean.size()) throw std::invalid_argument("Standardizer: channel count mismatch");
  }
};

inline double mse(const Matrix& pred, const Matrix& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("mse: shape mismatch");
  if (pred.data.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    double d = pred.data[i] - truth.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.data.size());
}

inline double mae(const Matrix& pred, const Matrix& truth) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("mae: shape mismatch");
  if (pred.data.empty()) throw std::invalid_argument("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) acc += std::abs(pred.data[i] - truth.data[i]);
  return acc / static_cast<double>(pred.data.size());
}

// Percent error reduction of the new model over the baseline.
inline double relative_improvement(double e_b, double e_n) {
  if (!(e_b > 0.0)) throw std::invalid_argument("relative_improvement: baseline error must be > 0");
  return 100.0 * (e_b - e_n) / e_b;
}

}  // namespace tsaa
