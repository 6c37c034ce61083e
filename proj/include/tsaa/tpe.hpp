#pragma once

#include <limits>

#include "tsaa/common.hpp"

namespace tsaa {
namespace tpe {

// Mixed categorical/continuous search space: per sub-policy slot one kind
// dimension and one magnitude dimension over (epsilon, 1].
struct SearchSpace {
  int slots = 2;
  int categories = 17;
  double m_lo = 1e-3;  // epsilon, exclusive
  double m_hi = 1.0;
};

// One point of the space: kinds[j] in [0, categories), mags[j] in (m_lo, m_hi].
struct ParamVector {
  std::vector<int> kinds;
  std::vector<double> mags;
};

struct Observation {
  ParamVector params;
  double loss = 0.0;
  int trial_id = 0;
};

struct ObservationHistory {
  std::vector<Observation> observations;
  double gamma = 0.25;

  void append(Observation obs) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("ObservationHistory: gamma must be in (0,1)");
    observations.push_back(std::move(obs));
  }
  std::size_t size() const { return observations.size(); }
};

// Splits the history into the gamma-quantile best observations and the rest.
// Failed trials (non-finite loss) always land in the bad set.
inline void split(const ObservationHistory& history, std::vector<const Observation*>& good,
                  std::vector<const Observation*>& bad) {
  const auto& obs = history.observations;
  if (obs.size() < 2) throw std::invalid_argument("tpe::split: need at least 2 observations");
  std::vector<const Observation*> finite, failed;
  for (const auto& o : obs)
    (std::isfinite(o.loss) ? finite : failed).push_back(&o);
  if (finite.empty()) throw std::invalid_argument("tpe::split: all observations failed");
  std::sort(finite.begin(), finite.end(), [](const Observation* a, const Observation* b) {
    if (a->loss != b->loss) return a->loss < b->loss;
    return a->trial_id < b->trial_id;  // earlier trial wins ties
  });
  auto n_good = static_cast<std::size_t>(
      std::ceil(history.gamma * static_cast<double>(obs.size())));
  n_good = std::clamp<std::size_t>(n_good, 1, finite.size() - (finite.size() > 1 ? 1 : 0));
  good.assign(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(n_good));
  bad.assign(finite.begin() + static_cast<std::ptrdiff_t>(n_good), finite.end());
  bad.insert(bad.end(), failed.begin(), failed.end());
  if (bad.empty()) bad = good;  // degenerate two-point histories
}

namespace detail {
inline double norm_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }
}  // namespace detail

// Truncated Gaussian Parzen mixture over (lo, hi]: one component per value
// plus a wide prior at the domain midpoint. Integrates to 1 over the domain.
class ContinuousParzen {
 public:
  ContinuousParzen(const std::vector<double>& values, double lo, double hi) : lo_(lo), hi_(hi) {
    if (values.empty()) throw std::invalid_argument("ContinuousParzen: empty values");
    const double width = hi - lo;
    mus_ = values;
    sigmas_.resize(values.size());
    if (values.size() == 1) {
      sigmas_[0] = width / 10.0;
    } else {
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        double nn = std::numeric_limits<double>::infinity();
        auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
        if (it != sorted.begin()) nn = std::min(nn, v - *(it - 1));
        if (it + 1 != sorted.end()) nn = std::min(nn, *(it + 1) - v);
        if (!std::isfinite(nn)) nn = width;
        // floor keeps duplicate values from collapsing the bandwidth
        sigmas_[i] = std::max(width / 100.0, 0.25 * nn);
      }
    }
    // prior component
    mus_.push_back(lo + 0.5 * width);
    sigmas_.push_back(width);
    zs_.resize(mus_.size());
    for (std::size_t i = 0; i < mus_.size(); ++i) {
      zs_[i] = detail::norm_cdf((hi_ - mus_[i]) / sigmas_[i]) - detail::norm_cdf((lo_ - mus_[i]) / sigmas_[i]);
      if (zs_[i] < 1e-12) zs_[i] = 1e-12;
    }
  }

  double pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < mus_.size(); ++i)
      acc += detail::norm_pdf((x - mus_[i]) / sigmas_[i]) / sigmas_[i] / zs_[i];
    return acc / static_cast<double>(mus_.size());
  }

  double sample(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, mus_.size() - 1);
    std::size_t i = pick(rng);
    std::normal_distribution<double> nd(mus_[i], sigmas_[i]);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      double x = nd(rng);
      if (x > lo_ && x <= hi_) return x;
    }
    std::uniform_real_distribution<double> ud(lo_, hi_);
    return std::nextafter(ud(rng), hi_);
  }

 private:
  double lo_, hi_;
  std::vector<double> mus_, sigmas_, zs_;
};

inline double density_continuous(const std::vector<double>& values, double query, double lo, double hi) {
  return ContinuousParzen(values, lo, hi).pdf(query);
}

// Smoothed categorical frequency with unit prior mass on each category.
inline double density_categorical(const std::vector<int>& choices, int query, int categories) {
  double count = 0;
  for (int c : choices)
    if (c == query) ++count;
  return (count + 1.0) / (static_cast<double>(choices.size()) + static_cast<double>(categories));
}

struct TpeConfig {
  double gamma = 0.25;
  int n_candidates = 24;
  std::size_t startup = 0;  // below this many observations, sample uniformly
};

inline ParamVector sample_uniform(const SearchSpace& space, Rng& rng) {
  ParamVector p;
  std::uniform_int_distribution<int> kd(0, space.categories - 1);
  std::uniform_real_distribution<double> md(space.m_lo, space.m_hi);
  for (int j = 0; j < space.slots; ++j) {
    p.kinds.push_back(kd(rng));
    double m = md(rng);
    if (m <= space.m_lo) m = std::nextafter(space.m_lo, space.m_hi);
    p.mags.push_back(m);
  }
  return p;
}

// EI-optimal proposal: draw candidates from l per dimension and keep the one
// maximizing l/g. Falls back to uniform sampling during the startup phase.
inline ParamVector suggest(const ObservationHistory& history, const SearchSpace& space,
                           const TpeConfig& cfg, Rng& rng) {
  if (history.size() < std::max<std::size_t>(cfg.startup, 2)) return sample_uniform(space, rng);
  std::vector<const Observation*> good, bad;
  split(history, good, bad);

  ParamVector out;
  for (int j = 0; j < space.slots; ++j) {
    // categorical dimension
    std::vector<int> gk, bk;
    for (const auto* o : good) gk.push_back(o->params.kinds[static_cast<std::size_t>(j)]);
    for (const auto* o : bad) bk.push_back(o->params.kinds[static_cast<std::size_t>(j)]);
    {
      // sample candidates from the smoothed good distribution
      std::vector<double> weights(static_cast<std::size_t>(space.categories));
      for (int k = 0; k < space.categories; ++k)
        weights[static_cast<std::size_t>(k)] = density_categorical(gk, k, space.categories);
      std::discrete_distribution<int> dd(weights.begin(), weights.end());
      int best = 0;
      double best_score = -1.0;
      for (int c = 0; c < cfg.n_candidates; ++c) {
        int cand = dd(rng);
        double score = density_categorical(gk, cand, space.categories) /
                       density_categorical(bk, cand, space.categories);
        if (score > best_score) {
          best_score = score;
          best = cand;
        }
      }
      out.kinds.push_back(best);
    }
    // continuous dimension
    std::vector<double> gm, bm;
    for (const auto* o : good) gm.push_back(o->params.mags[static_cast<std::size_t>(j)]);
    for (const auto* o : bad) bm.push_back(o->params.mags[static_cast<std::size_t>(j)]);
    {
      ContinuousParzen l(gm, space.m_lo, space.m_hi);
      ContinuousParzen g(bm, space.m_lo, space.m_hi);
      double best = space.m_hi;
      double best_score = -1.0;
      for (int c = 0; c < cfg.n_candidates; ++c) {
        double cand = l.sample(rng);
        double score = l.pdf(cand) / std::max(g.pdf(cand), 1e-300);
        if (score > best_score) {
          best_score = score;
          best = cand;
        }
      }
      out.mags.push_back(best);
    }
  }
  return out;
}

}  // namespace tpe
}  // namespace tsaa
