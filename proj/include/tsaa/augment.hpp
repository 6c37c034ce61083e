#pragma once

#include <array>
#include <map>

#include <json.hpp>

#include "tsaa/series.hpp"
#include "tsaa/stl.hpp"

namespace tsaa {

enum class TransformKind : int {
  Identity = 0,
  Jitter,
  TrendUp,
  TrendDown,
  ScaleUp,
  ScaleDown,
  SeasonUp,
  SeasonDown,
  Smooth,
  NoiseScale,
  Permutation,
  DTS,
  WarpUp,
  WarpDown,
  Mixup,
  Flip,
  Reverse,
};

inline constexpr int kNumTransformKinds = 17;

inline const char* transform_name(TransformKind k) {
  static constexpr std::array<const char*, kNumTransformKinds> names = {
      "Identity", "Jitter", "TrendUp", "TrendDown", "ScaleUp", "ScaleDown",
      "SeasonUp", "SeasonDown", "Smooth", "NoiseScale", "Permutation", "DTS",
      "WarpUp", "WarpDown", "Mixup", "Flip", "Reverse"};
  return names[static_cast<std::size_t>(k)];
}

inline TransformKind transform_from_name(const std::string& name) {
  for (int i = 0; i < kNumTransformKinds; ++i)
    if (name == transform_name(static_cast<TransformKind>(i))) return static_cast<TransformKind>(i);
  throw std::invalid_argument("unknown transform kind '" + name + "'");
}

enum class IdentityAt { lo, hi };

// Native parameter range of one transform and where its identity sits.
struct MagnitudeSpec {
  double native_lo = 0.0;
  double native_hi = 1.0;
  IdentityAt identity_at = IdentityAt::lo;
  double epsilon = 1e-3;
  bool binary = false;  // Flip/Reverse: m is thresholded at 0.5
};

inline const MagnitudeSpec& magnitude_spec(TransformKind k) {
  static const std::array<MagnitudeSpec, kNumTransformKinds> specs = {{
      {0.0, 1.0, IdentityAt::lo, 1e-3, false},   // Identity (magnitude unused)
      {0.0, 0.1, IdentityAt::lo, 1e-3, false},   // Jitter
      {1.0, 10.0, IdentityAt::lo, 1e-3, false},  // TrendUp
      {0.0, 1.0, IdentityAt::hi, 1e-3, false},   // TrendDown
      {1.0, 3.0, IdentityAt::lo, 1e-3, false},   // ScaleUp
      {0.3, 1.0, IdentityAt::hi, 1e-3, false},   // ScaleDown
      {1.0, 3.0, IdentityAt::lo, 1e-3, false},   // SeasonUp
      {0.0, 1.0, IdentityAt::hi, 1e-3, false},   // SeasonDown
      {0.0, 11.0, IdentityAt::lo, 1e-3, false},  // Smooth
      {0.0, 1.0, IdentityAt::hi, 1e-3, false},   // NoiseScale
      {0.0, 0.3, IdentityAt::lo, 1e-3, false},   // Permutation
      {1.0, 5.0, IdentityAt::lo, 1e-3, false},   // DTS
      {1.0, 1.5, IdentityAt::lo, 1e-3, false},   // WarpUp
      {0.5, 1.0, IdentityAt::hi, 1e-3, false},   // WarpDown
      {0.0, 0.5, IdentityAt::lo, 1e-3, false},   // Mixup
      {0.0, 1.0, IdentityAt::lo, 1e-3, true},    // Flip
      {0.0, 1.0, IdentityAt::lo, 1e-3, true},    // Reverse
  }};
  return specs[static_cast<std::size_t>(k)];
}

// Maps m in (eps,1] onto the native range, oriented so m -> 0 approaches the
// identity endpoint.
inline double map_magnitude(const MagnitudeSpec& spec, double m) {
  if (!(m > spec.epsilon) || !(m <= 1.0))
    throw std::invalid_argument("map_magnitude: m must be in (epsilon, 1]");
  if (spec.identity_at == IdentityAt::lo) return spec.native_lo + m * (spec.native_hi - spec.native_lo);
  return spec.native_hi - m * (spec.native_hi - spec.native_lo);
}

struct OpSpec {
  TransformKind kind = TransformKind::Identity;
  double m = 1.0;

  void validate() const {
    const auto& spec = magnitude_spec(kind);
    if (!(m > spec.epsilon) || !(m <= 1.0))
      throw std::invalid_argument(std::string("OpSpec: magnitude out of (epsilon,1] for ") + transform_name(kind));
  }
};

// Ordered chain of (transform, magnitude) ops applied left-to-right.
struct SubPolicy {
  std::vector<OpSpec> ops;
};

// Up to k sub-policies sampled uniformly per batch.
struct PolicyDistribution {
  std::vector<SubPolicy> subpolicies;
  int n = 2;
  double epsilon = 1e-3;

  bool empty() const { return subpolicies.empty(); }
};

struct AugmentContext {
  const Decomposition* decomposition = nullptr;
  std::uint64_t rng_seed = 0;
  std::size_t origin_index = 0;                     // window offset into the decomposed series
  const std::vector<WindowPair>* pair_source = nullptr;  // batch view for Mixup
  std::size_t self_index = 0;
};

namespace detail {

// Linear-interpolation resample of rows to a new length. Same length in and
// out is an exact copy.
inline Matrix resample_rows(const Matrix& in, std::size_t new_len) {
  if (new_len == in.rows) return in;
  Matrix out(new_len, in.cols);
  if (in.rows == 1) {
    for (std::size_t r = 0; r < new_len; ++r)
      for (std::size_t c = 0; c < in.cols; ++c) out(r, c) = in(0, c);
    return out;
  }
  const double scale = static_cast<double>(in.rows - 1) / static_cast<double>(std::max<std::size_t>(new_len - 1, 1));
  for (std::size_t r = 0; r < new_len; ++r) {
    double pos = static_cast<double>(r) * scale;
    auto i = static_cast<std::size_t>(pos);
    if (i >= in.rows - 1) i = in.rows - 2;
    double frac = pos - static_cast<double>(i);
    for (std::size_t c = 0; c < in.cols; ++c)
      out(r, c) = (1.0 - frac) * in(i, c) + frac * in(i + 1, c);
  }
  return out;
}

inline std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    if (n == 1) return 0;
  }
  return static_cast<std::size_t>(i);
}

inline void component_slice(const Matrix& comp, std::size_t origin, std::size_t len, Matrix& out) {
  if (origin + len > comp.rows)
    throw std::invalid_argument("augment: window extends past the stored decomposition");
  out = Matrix(len, comp.cols);
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = 0; c < comp.cols; ++c) out(r, c) = comp(origin + r, c);
}

}  // namespace detail

inline Matrix apply_op(const OpSpec& op, const Matrix& window, const AugmentContext& ctx) {
  op.validate();
  const std::size_t L = window.rows, C = window.cols;
  if (L == 0 || C == 0) throw std::invalid_argument("apply_op: empty window");
  const auto& mspec = magnitude_spec(op.kind);
  Rng rng(mix_seed(ctx.rng_seed, static_cast<std::uint64_t>(op.kind)));

  switch (op.kind) {
    case TransformKind::Identity:
      return window;

    case TransformKind::Jitter: {
      double sigma = map_magnitude(mspec, op.m);
      Matrix out = window;
      std::normal_distribution<double> nd(0.0, 1.0);
      for (std::size_t c = 0; c < C; ++c) {
        double mn = window(0, c), mx = window(0, c);
        for (std::size_t r = 1; r < L; ++r) {
          mn = std::min(mn, window(r, c));
          mx = std::max(mx, window(r, c));
        }
        double range = mx - mn;
        if (range < 1e-12) continue;  // flat channel, min-max scale undefined
        for (std::size_t r = 0; r < L; ++r) {
          double scaled = (window(r, c) - mn) / range;
          out(r, c) = (scaled + sigma * nd(rng)) * range + mn;
        }
      }
      return out;
    }

    case TransformKind::TrendUp:
    case TransformKind::TrendDown: {
      if (!ctx.decomposition) throw std::invalid_argument("apply_op: trend scaling needs a decomposition");
      double factor = map_magnitude(mspec, op.m);
      Matrix trend;
      detail::component_slice(ctx.decomposition->trend, ctx.origin_index, L, trend);
      Matrix out = window;
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += (factor - 1.0) * trend.data[i];
      return out;
    }

    case TransformKind::ScaleUp:
    case TransformKind::ScaleDown: {
      double factor = map_magnitude(mspec, op.m);
      Matrix out = window;
      for (double& v : out.data) v *= factor;
      return out;
    }

    case TransformKind::SeasonUp:
    case TransformKind::SeasonDown: {
      if (!ctx.decomposition) throw std::invalid_argument("apply_op: seasonality scaling needs a decomposition");
      double factor = map_magnitude(mspec, op.m);
      Matrix seasonal;
      detail::component_slice(ctx.decomposition->seasonal, ctx.origin_index, L, seasonal);
      Matrix out = window;
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += (factor - 1.0) * seasonal.data[i];
      return out;
    }

    case TransformKind::Smooth: {
      double native = map_magnitude(mspec, op.m);
      auto w = static_cast<std::size_t>(2 * static_cast<long>(native / 2) + 1);
      if (w > L) w = (L % 2 == 1) ? L : L - 1;
      if (w <= 1) return window;
      auto half = static_cast<std::ptrdiff_t>(w / 2);
      Matrix out(L, C);
      for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0;
          for (std::ptrdiff_t k = -half; k <= half; ++k)
            acc += window(detail::reflect_index(static_cast<std::ptrdiff_t>(r) + k, static_cast<std::ptrdiff_t>(L)), c);
          out(r, c) = acc / static_cast<double>(w);
        }
      }
      return out;
    }

    case TransformKind::NoiseScale: {
      double factor = map_magnitude(mspec, op.m);
      // high-pass extract h = conv(w, (-1, 2, -1)/2); output = w + (factor-1)*h
      Matrix out = window;
      auto n = static_cast<std::ptrdiff_t>(L);
      for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
          double prev = window(detail::reflect_index(static_cast<std::ptrdiff_t>(r) - 1, n), c);
          double next = window(detail::reflect_index(static_cast<std::ptrdiff_t>(r) + 1, n), c);
          double h = (2.0 * window(r, c) - prev - next) / 2.0;
          out(r, c) = window(r, c) + (factor - 1.0) * h;
        }
      }
      return out;
    }

    case TransformKind::Permutation: {
      double native = map_magnitude(mspec, op.m);
      auto len = static_cast<std::size_t>(std::lround(native * static_cast<double>(L)));
      if (len == 0) return window;  // magnitude too small to move anything
      if (2 * len > L) len = L / 2;
      if (len == 0) return window;
      Matrix out = window;
      for (int shrink = 0; shrink < 8 && len >= 1; ++shrink) {
        std::uniform_int_distribution<std::size_t> pick(0, L - len);
        for (int attempt = 0; attempt < 100; ++attempt) {
          std::size_t a = pick(rng), b = pick(rng);
          if (a > b) std::swap(a, b);
          if (b >= a + len) {  // disjoint
            for (std::size_t r = 0; r < len; ++r)
              for (std::size_t c = 0; c < C; ++c) std::swap(out(a + r, c), out(b + r, c));
            return out;
          }
        }
        len /= 2;
      }
      return out;
    }

    case TransformKind::DTS: {
      double native = map_magnitude(mspec, op.m);
      auto segments = static_cast<std::size_t>(std::ceil(native)) + 1;
      segments = std::min(segments, L);
      if (segments < 2) return window;
      std::vector<std::size_t> bounds(segments + 1);
      for (std::size_t s = 0; s <= segments; ++s) bounds[s] = s * L / segments;
      std::uniform_real_distribution<double> sd(1.0, native);
      Matrix out(0, C);
      for (std::size_t s = 0; s < segments; s += 2) {
        std::size_t l0 = bounds[s + 1] - bounds[s];
        if (s + 1 >= segments) {
          // odd leftover segment, kept as-is
          Matrix seg(l0, C);
          for (std::size_t r = 0; r < l0; ++r)
            for (std::size_t c = 0; c < C; ++c) seg(r, c) = window(bounds[s] + r, c);
          out = out.rows ? vconcat(out, seg) : seg;
          break;
        }
        std::size_t l1 = bounds[s + 2] - bounds[s + 1];
        double stretch = sd(rng);
        auto n0 = static_cast<std::size_t>(std::lround(static_cast<double>(l0) * stretch));
        n0 = std::clamp<std::size_t>(n0, 1, l0 + l1 - 1);
        std::size_t n1 = l0 + l1 - n0;
        Matrix seg0(l0, C), seg1(l1, C);
        for (std::size_t r = 0; r < l0; ++r)
          for (std::size_t c = 0; c < C; ++c) seg0(r, c) = window(bounds[s] + r, c);
        for (std::size_t r = 0; r < l1; ++r)
          for (std::size_t c = 0; c < C; ++c) seg1(r, c) = window(bounds[s + 1] + r, c);
        auto r0 = detail::resample_rows(seg0, n0);
        auto r1 = detail::resample_rows(seg1, n1);
        auto pair = vconcat(r0, r1);
        out = out.rows ? vconcat(out, pair) : pair;
      }
      return out;
    }

    case TransformKind::WarpUp:
    case TransformKind::WarpDown: {
      double factor = map_magnitude(mspec, op.m);
      auto warped = static_cast<std::size_t>(std::lround(factor * static_cast<double>(L)));
      warped = std::max<std::size_t>(warped, 2);
      if (warped == L) return window;
      return detail::resample_rows(detail::resample_rows(window, warped), L);
    }

    case TransformKind::Mixup: {
      double lambda = map_magnitude(mspec, op.m);
      if (!ctx.pair_source || ctx.pair_source->empty()) return window;
      std::uniform_int_distribution<std::size_t> pick(0, ctx.pair_source->size() - 1);
      std::size_t partner = pick(rng);
      if (partner == ctx.self_index) return window;  // same pair, identity fallback
      auto other = vconcat((*ctx.pair_source)[partner].x, (*ctx.pair_source)[partner].y);
      if (!other.same_shape(window))
        throw std::invalid_argument("apply_op: mixup partner shape mismatch");
      Matrix out = window;
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (1.0 - lambda) * window.data[i] + lambda * other.data[i];
      return out;
    }

    case TransformKind::Flip: {
      if (op.m < 0.5) return window;
      Matrix out = window;
      for (std::size_t c = 0; c < C; ++c) {
        double mn = window(0, c), mx = window(0, c);
        for (std::size_t r = 1; r < L; ++r) {
          mn = std::min(mn, window(r, c));
          mx = std::max(mx, window(r, c));
        }
        for (std::size_t r = 0; r < L; ++r) out(r, c) = mx + mn - window(r, c);
      }
      return out;
    }

    case TransformKind::Reverse: {
      if (op.m < 0.5) return window;
      Matrix out(L, C);
      for (std::size_t r = 0; r < L; ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = window(L - 1 - r, c);
      return out;
    }
  }
  throw std::logic_error("apply_op: unhandled transform kind");
}

// Applies the chain to the concatenated [x;y] window, then re-splits at the
// lookback boundary so input and target are transformed together.
inline WindowPair apply_subpolicy(const SubPolicy& sp, const WindowPair& pair, const AugmentContext& ctx) {
  Matrix cat = vconcat(pair.x, pair.y);
  AugmentContext op_ctx = ctx;
  op_ctx.origin_index = pair.origin_index;
  for (std::size_t i = 0; i < sp.ops.size(); ++i) {
    op_ctx.rng_seed = mix_seed(ctx.rng_seed, i);
    cat = apply_op(sp.ops[i], cat, op_ctx);
  }
  WindowPair out;
  out.origin_index = pair.origin_index;
  const std::size_t lookback = pair.x.rows;
  out.x = Matrix(lookback, cat.cols);
  out.y = Matrix(pair.y.rows, cat.cols);
  std::copy(cat.data.begin(), cat.data.begin() + static_cast<std::ptrdiff_t>(lookback * cat.cols), out.x.data.begin());
  std::copy(cat.data.begin() + static_cast<std::ptrdiff_t>(lookback * cat.cols), cat.data.end(), out.y.data.begin());
  return out;
}

// Draws one sub-policy uniformly for the whole batch and applies it to every
// pair. Seeded and reproducible.
inline std::vector<WindowPair> sample_and_apply(const PolicyDistribution& dist,
                                                const std::vector<WindowPair>& batch,
                                                const AugmentContext& ctx) {
  if (dist.empty()) throw std::invalid_argument("sample_and_apply: empty policy distribution");
  Rng rng(mix_seed(ctx.rng_seed, 0x5a5a5a5aull));
  std::uniform_int_distribution<std::size_t> pick(0, dist.subpolicies.size() - 1);
  const SubPolicy& sp = dist.subpolicies[pick(rng)];
  std::vector<WindowPair> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    AugmentContext c = ctx;
    c.rng_seed = mix_seed(ctx.rng_seed, i + 1);
    c.pair_source = &batch;
    c.self_index = i;
    out.push_back(apply_subpolicy(sp, batch[i], c));
  }
  return out;
}

// %ops analysis over the best fraction of scored sub-policies.
inline std::map<TransformKind, double> ops_histogram(std::vector<std::pair<SubPolicy, double>> scored,
                                                     double top_fraction) {
  if (scored.empty()) throw std::invalid_argument("ops_histogram: no trials");
  if (!(top_fraction > 0.0) || top_fraction > 1.0)
    throw std::invalid_argument("ops_histogram: top_fraction must be in (0,1]");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  auto keep = static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(scored.size())));
  keep = std::max<std::size_t>(keep, 1);
  std::map<TransformKind, std::size_t> counts;
  std::size_t total = 0;
  for (std::size_t i = 0; i < keep; ++i)
    for (const auto& op : scored[i].first.ops) {
      ++counts[op.kind];
      ++total;
    }
  if (total == 0) throw std::invalid_argument("ops_histogram: trials carry no ops");
  std::map<TransformKind, double> out;
  for (const auto& [k, c] : counts) out[k] = 100.0 * static_cast<double>(c) / static_cast<double>(total);
  return out;
}

// ---- policy JSON ----------------------------------------------------------

inline nlohmann::json policy_to_json(const PolicyDistribution& dist) {
  nlohmann::json j;
  j["subpolicies"] = nlohmann::json::array();
  for (const auto& sp : dist.subpolicies) {
    nlohmann::json jsp;
    jsp["ops"] = nlohmann::json::array();
    for (const auto& op : sp.ops)
      jsp["ops"].push_back({{"kind", transform_name(op.kind)}, {"m", op.m}});
    j["subpolicies"].push_back(jsp);
  }
  j["n"] = dist.n;
  j["epsilon"] = dist.epsilon;
  return j;
}

inline PolicyDistribution policy_from_json(const nlohmann::json& j) {
  PolicyDistribution dist;
  dist.n = j.at("n").get<int>();
  dist.epsilon = j.at("epsilon").get<double>();
  for (const auto& jsp : j.at("subpolicies")) {
    SubPolicy sp;
    for (const auto& jop : jsp.at("ops")) {
      OpSpec op;
      op.kind = transform_from_name(jop.at("kind").get<std::string>());
      op.m = jop.at("m").get<double>();
      op.validate();
      sp.ops.push_back(op);
    }
    dist.subpolicies.push_back(std::move(sp));
  }
  return dist;
}

}  // namespace tsaa
