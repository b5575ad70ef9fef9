#pragma once

// Stability tooling: Monte-Carlo and exact values of φ_n = E exp(−α‖Ξ_n‖),
// monotonicity tables, regenerative cycle lengths, threshold search along a
// ray of arrival vectors, and a star-shaped scan of the stability region.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnet/exact.hpp"
#include "qnet/parallel.hpp"

namespace qnet {

struct PhiEstimate {
  double mean = 0;
  double std_error = 0;
  long reps = 0;
  int n = 0;
  double alpha = 1;
};

struct MeanEstimate {
  double mean = 0;
  double std_error = 0;
  long reps = 0;
};

inline MeanEstimate finish_mean(double sum, double sumsq, long reps) {
  MeanEstimate e{0, 0, reps};
  if (reps == 0) return e;
  e.mean = sum / reps;
  if (reps > 1) {
    const double var = std::max(0.0, (sumsq - sum * e.mean) / (reps - 1));
    e.std_error = std::sqrt(var / reps);
  }
  return e;
}

namespace detail {
inline constexpr long kChunk = 512;
}

/// Runs `reps` independent paths from `start` (path r uses rng.substream(r))
/// and returns the sample mean and standard error of fn(Ξ_n) at every
/// checkpoint n. Checkpoints must be ascending.
template <class Fn>
std::vector<MeanEstimate> path_statistics(const Network& net, const NetworkState& start,
                                          const std::vector<int>& checkpoints, long reps,
                                          const CounterStream& rng, unsigned threads, Fn fn) {
  check_state(net, start);
  if (reps < 1) throw InvalidArgument("need at least one replication");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      (!checkpoints.empty() && checkpoints.front() < 0))
    throw InvalidArgument("checkpoints must be nonnegative and ascending");
  const std::size_t cps = checkpoints.size();
  const EmbeddedChain chain(net);
  const long chunks = (reps + detail::kChunk - 1) / detail::kChunk;
  auto partial = parallel_map(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
    std::vector<double> sums(2 * cps, 0.0);
    const long lo = static_cast<long>(c) * detail::kChunk;
    const long hi = std::min(reps, lo + detail::kChunk);
    for (long r = lo; r < hi; ++r) {
      CounterStream s = rng.substream(static_cast<std::uint64_t>(r));
      NetworkState x = start;
      int step = 0;
      for (std::size_t j = 0; j < cps; ++j) {
        for (; step < checkpoints[j]; ++step) chain.step(x, s);
        const double v = fn(x);
        sums[2 * j] += v;
        sums[2 * j + 1] += v * v;
      }
    }
    return sums;
  });
  std::vector<MeanEstimate> out;
  for (std::size_t j = 0; j < cps; ++j) {
    double sum = 0, sumsq = 0;
    for (auto& p : partial) {
      sum += p[2 * j];
      sumsq += p[2 * j + 1];
    }
    out.push_back(finish_mean(sum, sumsq, reps));
  }
  return out;
}

inline std::vector<PhiEstimate> phi_estimates(const Network& net, const NetworkState& start,
                                              const std::vector<int>& checkpoints, double alpha, long reps,
                                              const CounterStream& rng, unsigned threads = default_threads()) {
  if (!(alpha > 0)) throw InvalidArgument("alpha must be positive");
  const auto m = path_statistics(net, start, checkpoints, reps, rng, threads,
                                 [alpha](const NetworkState& s) { return exp_norm(s, alpha); });
  std::vector<PhiEstimate> out;
  for (std::size_t j = 0; j < m.size(); ++j) out.push_back({m[j].mean, m[j].std_error, reps, checkpoints[j], alpha});
  return out;
}

/// Estimate of E exp(−α‖Ξ_n‖) from the empty network.
inline PhiEstimate phi_estimate(const Network& net, int n, double alpha, long reps, const CounterStream& rng,
                                unsigned threads = default_threads()) {
  return phi_estimates(net, empty_state(net), {n}, alpha, reps, rng, threads).front();
}

/// E‖Ξ_n‖ from the empty network at each checkpoint.
inline std::vector<MeanEstimate> mean_norm_growth(const Network& net, const std::vector<int>& checkpoints, long reps,
                                                  const CounterStream& rng, unsigned threads = default_threads()) {
  return path_statistics(net, empty_state(net), checkpoints, reps, rng, threads,
                         [](const NetworkState& s) { return static_cast<double>(s.total()); });
}

/// Time average of exp(−α‖Ξ_m‖) over one long path after a burn-in, with a
/// batch-means standard error. Estimates the equilibrium value ⟨π, e^{−α‖·‖}⟩.
inline PhiEstimate long_run_average(const Network& net, long steps, long burn_in, int batches, double alpha,
                                    CounterStream rng) {
  if (batches < 2 || steps < batches) throw InvalidArgument("need at least two nonempty batches");
  const EmbeddedChain chain(net);
  NetworkState x = empty_state(net);
  for (long m = 0; m < burn_in; ++m) chain.step(x, rng);
  const long per = steps / batches;
  double sum = 0, sumsq = 0;
  for (int b = 0; b < batches; ++b) {
    double acc = 0;
    for (long m = 0; m < per; ++m) {
      chain.step(x, rng);
      acc += exp_norm(x, alpha);
    }
    const double mean = acc / per;
    sum += mean;
    sumsq += mean * mean;
  }
  const auto e = finish_mean(sum, sumsq, batches);
  return {e.mean, e.std_error, per * batches, static_cast<int>(std::min<long>(per * batches, std::numeric_limits<int>::max())), alpha};
}

// ---------------------------------------------------------------------------
// Monotonicity tables

enum class TableMode { exact, mc };

struct TableViolation {
  std::size_t row = 0;  // θ-scale index
  std::size_t col = 0;  // step index
  enum class Direction { in_n, in_theta } direction = Direction::in_n;
  double excess = 0;  // amount by which the later entry exceeds the earlier one
};

struct MonotonicityTable {
  std::vector<double> scales;
  std::vector<int> steps;
  std::vector<std::vector<double>> value;      // [scale][step]
  std::vector<std::vector<double>> std_error;  // zero in exact mode
  std::vector<TableViolation> violations;
  TableMode mode = TableMode::exact;
};

inline constexpr double kExactTableTolerance = 1e-10;
inline constexpr double kTableStdErrors = 3.0;

inline void find_violations(MonotonicityTable& t) {
  const auto allowed = [&](std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2) {
    if (t.mode == TableMode::exact) return kExactTableTolerance;
    const double a = t.std_error[r1][c1], b = t.std_error[r2][c2];
    return kTableStdErrors * std::sqrt(a * a + b * b);
  };
  for (std::size_t r = 0; r < t.scales.size(); ++r)
    for (std::size_t c = 0; c < t.steps.size(); ++c) {
      if (c > 0) {
        const double ex = t.value[r][c] - t.value[r][c - 1];
        if (ex > allowed(r, c, r, c - 1)) t.violations.push_back({r, c, TableViolation::Direction::in_n, ex});
      }
      if (r > 0) {
        const double ex = t.value[r][c] - t.value[r - 1][c];
        if (ex > allowed(r, c, r - 1, c)) t.violations.push_back({r, c, TableViolation::Direction::in_theta, ex});
      }
    }
}

/// φ_n(a·θ) from the empty network for every scale a and step count n, with
/// violations of non-increase in n (along a row) and in a (down a column).
inline MonotonicityTable monotonicity_table(const Network& net, std::vector<double> scales, std::vector<int> steps,
                                            double alpha, TableMode mode, long reps, const CounterStream& rng,
                                            unsigned threads = default_threads(), ExactOptions options = {}) {
  if (!std::is_sorted(scales.begin(), scales.end())) throw InvalidArgument("scales must be ascending");
  if (!std::is_sorted(steps.begin(), steps.end())) throw InvalidArgument("step counts must be ascending");
  if (!(alpha > 0)) throw InvalidArgument("alpha must be positive");
  MonotonicityTable t;
  t.scales = scales;
  t.steps = steps;
  t.mode = mode;
  for (double a : scales) {
    const Network scaled = net.scaled(a);
    std::vector<double> row, err;
    if (mode == TableMode::exact) {
      DistributionEngine engine(scaled, empty_state(scaled), options);
      for (int n : steps) {
        engine.advance(n - engine.steps());
        row.push_back(engine.current().expectation([&](const NetworkState& s) { return exp_norm(s, alpha); }));
        err.push_back(0);
      }
    } else {
      for (auto& e : phi_estimates(scaled, empty_state(scaled), steps, alpha, reps, rng, threads)) {
        row.push_back(e.mean);
        err.push_back(e.std_error);
      }
    }
    t.value.push_back(std::move(row));
    t.std_error.push_back(std::move(err));
  }
  find_violations(t);
  return t;
}

// ---------------------------------------------------------------------------
// Regenerative cycles

struct CycleEstimate {
  double mean_return = 0;  // over uncensored cycles, in embedded steps
  double std_error = 0;
  double censor_fraction = 0;
  long cycles = 0;
  bool degenerate = false;  // no arrivals: the chain never leaves ∅
};

/// Steps from ∅ until the chain has left ∅ and come back, censored at `cap`.
inline CycleEstimate cycle_estimate(const Network& net, long cap, long reps, const CounterStream& rng,
                                    unsigned threads = default_threads()) {
  if (cap < 1) throw InvalidArgument("cycle cap must be at least 1");
  if (reps < 1) throw InvalidArgument("need at least one replication");
  CycleEstimate out;
  out.cycles = reps;
  double arrivals = 0;
  for (ClassId k = 1; k <= net.classes(); ++k) arrivals += net.theta(k);
  if (arrivals <= 0) {
    out.degenerate = true;
    return out;
  }
  const EmbeddedChain chain(net);
  const auto lengths = parallel_map(static_cast<std::size_t>(reps), threads, [&](std::size_t r) -> long {
    CounterStream s = rng.substream(r);
    NetworkState x = empty_state(net);
    bool left = false;
    for (long m = 1; m <= cap; ++m) {
      chain.step(x, s);
      if (!x.empty()) {
        left = true;
      } else if (left) {
        return m;
      }
    }
    return -1;
  });
  double sum = 0, sumsq = 0;
  long done = 0;
  for (long l : lengths) {
    if (l < 0) continue;
    ++done;
    sum += static_cast<double>(l);
    sumsq += static_cast<double>(l) * static_cast<double>(l);
  }
  const auto e = finish_mean(sum, sumsq, done);
  out.mean_return = e.mean;
  out.std_error = e.std_error;
  out.censor_fraction = static_cast<double>(reps - done) / static_cast<double>(reps);
  return out;
}

struct RayProfilePoint {
  double scale = 0;
  double censor_fraction = 0;
  bool stable = false;  // censor fraction below one half
};

/// Cycle censoring along a·v for each scale a (ascending), plus whether the
/// stable indicator is monotone: no stable point beyond an unstable one.
inline std::pair<std::vector<RayProfilePoint>, bool> ray_stability_profile(
    const Network& net, const std::vector<double>& direction, const std::vector<double>& scales, long cap, long reps,
    const CounterStream& rng, unsigned threads = default_threads()) {
  std::vector<RayProfilePoint> pts;
  bool monotone = true, seen_unstable = false;
  for (double a : scales) {
    std::vector<double> theta(direction);
    for (double& x : theta) x *= a;
    const auto c = cycle_estimate(net.with_theta(theta), cap, reps, rng, threads);
    RayProfilePoint p{a, c.censor_fraction, c.censor_fraction < 0.5};
    if (p.stable && seen_unstable) monotone = false;
    if (!p.stable) seen_unstable = true;
    pts.push_back(p);
  }
  return {pts, monotone};
}

// ---------------------------------------------------------------------------
// Threshold search

enum class SearchMethod { bisection, robbins_monro };

inline const char* method_name(SearchMethod m) {
  return m == SearchMethod::bisection ? "bisection" : "robbins-monro";
}

struct TracePoint {
  double scale = 0;
  double value = 0;
};

struct RaySearchResult {
  std::vector<double> direction;
  double threshold = 0;  // scale a* with θ* = a*·v
  SearchMethod method = SearchMethod::bisection;
  double epsilon = 0;
  int horizon = 0;  // n used by the estimator; 0 for synthetic oracles
  std::vector<TracePoint> trace;
};

struct BisectionOptions {
  double initial_scale = 1.0;
  int iterations = 30;
  int max_doublings = 40;
};

inline void check_epsilon(double eps) {
  if (!(eps > 0 && eps < 1)) throw InvalidArgument("epsilon must lie in (0, 1)");
}

/// Root of the non-increasing scale ↦ φ(scale) at level ε: double the scale
/// until φ < ε, then halve the bracket.
inline RaySearchResult bisect_threshold(const std::function<double(double)>& phi, double eps,
                                        BisectionOptions opt = {}) {
  check_epsilon(eps);
  if (!(opt.initial_scale > 0)) throw InvalidArgument("initial scale must be positive");
  RaySearchResult r;
  r.method = SearchMethod::bisection;
  r.epsilon = eps;
  double lo = 0, hi = opt.initial_scale;
  for (int d = 0;; ++d) {
    const double v = phi(hi);
    r.trace.push_back({hi, v});
    if (v < eps) break;
    if (d >= opt.max_doublings) throw BracketFailure("estimate never fell below epsilon while doubling the scale");
    lo = hi;
    hi *= 2;
  }
  for (int it = 0; it < opt.iterations; ++it) {
    const double mid = (lo + hi) / 2;
    const double v = phi(mid);
    r.trace.push_back({mid, v});
    (v < eps ? hi : lo) = mid;
  }
  r.threshold = (lo + hi) / 2;
  return r;
}

struct RobbinsMonroOptions {
  double c = 1.0;
  double m0 = 10.0;
  double initial_scale = 1.0;
  double scale_min = 1e-6;
  int iterations = 10'000;
  double tail_fraction = 0.5;  // share of the trace averaged for the estimate
};

/// scale ← max(scale_min, scale + c/(m0+m)·(φ̂(scale) − ε)); returns the
/// average of the trace tail. The oracle gets the iteration index so it can
/// draw fresh noise.
inline RaySearchResult robbins_monro_threshold(const std::function<double(double, int)>& noisy_phi, double eps,
                                               RobbinsMonroOptions opt = {}) {
  check_epsilon(eps);
  if (opt.iterations < 1) throw InvalidArgument("need at least one iteration");
  RaySearchResult r;
  r.method = SearchMethod::robbins_monro;
  r.epsilon = eps;
  double scale = opt.initial_scale;
  for (int m = 0; m < opt.iterations; ++m) {
    const double v = noisy_phi(scale, m);
    r.trace.push_back({scale, v});
    scale = std::max(opt.scale_min, scale + opt.c / (opt.m0 + m) * (v - eps));
  }
  const auto first = static_cast<std::size_t>(std::floor((1 - opt.tail_fraction) * r.trace.size()));
  double sum = 0;
  for (std::size_t j = first; j < r.trace.size(); ++j) sum += r.trace[j].scale;
  r.threshold = sum / static_cast<double>(r.trace.size() - first);
  return r;
}

inline void check_direction(const Network& net, const std::vector<double>& v) {
  if (static_cast<int>(v.size()) != net.classes())
    throw InvalidArgument("direction needs one entry per class");
  bool nonzero = false;
  for (double x : v) {
    if (!(x >= 0)) throw InvalidArgument("direction entries must be nonnegative");
    nonzero |= x > 0;
  }
  if (!nonzero) throw InvalidArgument("direction must be nonzero");
}

inline Network along_ray(const Network& net, const std::vector<double>& v, double scale) {
  std::vector<double> theta(v);
  for (double& x : theta) x *= scale;
  return net.with_theta(std::move(theta));
}

/// Scale at which the most loaded station reaches ρ = 1 along v.
inline double subcritical_scale(const Network& net, const std::vector<double>& v) {
  check_direction(net, v);
  const auto w = net.with_theta(v).analysis().workload;
  const double worst = *std::max_element(w.begin(), w.end());
  return worst > 0 ? 1.0 / worst : std::numeric_limits<double>::infinity();
}

struct StatisticalSearch {
  int horizon = 1000;
  double alpha = 1.0;
  long reps = 1000;  // per bisection probe
  unsigned threads = default_threads();
};

/// Bisection with φ̂_n(a·v) as the statistic. Every probe reuses the same
/// random numbers, so the estimated curve is itself monotone in practice.
inline RaySearchResult threshold_bisection(const Network& net, const std::vector<double>& v, double eps,
                                           const StatisticalSearch& s, const CounterStream& rng,
                                           BisectionOptions opt = {}) {
  check_direction(net, v);
  check_epsilon(eps);
  auto phi = [&](double a) {
    return phi_estimate(along_ray(net, v, a), s.horizon, s.alpha, s.reps, rng, s.threads).mean;
  };
  auto r = bisect_threshold(phi, eps, opt);
  r.direction = v;
  r.horizon = s.horizon;
  return r;
}

/// Robbins–Monro with a single path per iterate.
inline RaySearchResult threshold_robbins_monro(const Network& net, const std::vector<double>& v, double eps,
                                               const StatisticalSearch& s, const CounterStream& rng,
                                               RobbinsMonroOptions opt = {}) {
  check_direction(net, v);
  check_epsilon(eps);
  auto phi = [&](double a, int m) {
    const Network at = along_ray(net, v, a);
    const EmbeddedChain chain(at);
    CounterStream st = rng.substream(static_cast<std::uint64_t>(m));
    NetworkState x = empty_state(at);
    for (int j = 0; j < s.horizon; ++j) chain.step(x, st);
    return exp_norm(x, s.alpha);
  };
  auto r = robbins_monro_threshold(phi, eps, opt);
  r.direction = v;
  r.horizon = s.horizon;
  return r;
}

// ---------------------------------------------------------------------------
// Region scan

struct RegionRay {
  RaySearchResult search;
  double subcritical_scale = 0;
};

struct RegionScan {
  std::vector<int> coordinates;  // the two classes spanning the scanned plane (1-based)
  std::vector<RegionRay> rays;
  /// Vertices of the star-shaped under-approximation: the origin followed by
  /// the threshold point of every ray, in angular order.
  std::vector<std::vector<double>> polygon;
  /// Vertices of {θ : ρ_i(θ) < 1 for all i} in the same plane, found along the same rays.
  std::vector<std::vector<double>> subcritical_polygon;
};

/// `count` unit directions spread over the positive quadrant spanned by
/// classes a and b; a single ray points along class a.
inline std::vector<std::vector<double>> quadrant_rays(const Network& net, int count, int a = 1, int b = 2) {
  if (count < 1) throw InvalidArgument("need at least one ray");
  if (a < 1 || a > net.classes() || (count > 1 && (b < 1 || b > net.classes() || a == b)))
    throw InvalidArgument("scan coordinates out of range");
  std::vector<std::vector<double>> rays;
  const double half_pi = std::acos(0.0);
  for (int j = 0; j < count; ++j) {
    std::vector<double> v(static_cast<std::size_t>(net.classes()), 0.0);
    const double ang = count == 1 ? 0.0 : half_pi * j / (count - 1);
    v[a - 1] = std::cos(ang);
    if (count > 1) v[b - 1] = std::sin(ang);
    for (double& x : v)
      if (std::abs(x) < 1e-15) x = 0;
    rays.push_back(std::move(v));
  }
  return rays;
}

inline RegionScan region_scan(const Network& net, const std::vector<std::vector<double>>& rays, double eps,
                              const StatisticalSearch& s, const CounterStream& rng, BisectionOptions opt = {}) {
  check_epsilon(eps);
  if (rays.empty()) throw InvalidArgument("need at least one ray");
  RegionScan out;
  for (std::size_t k = 0; k < rays[0].size(); ++k) {
    bool used = false;
    for (auto& v : rays) used |= k < v.size() && v[k] > 0;
    if (used) out.coordinates.push_back(static_cast<int>(k) + 1);
  }
  out.polygon.push_back(std::vector<double>(static_cast<std::size_t>(net.classes()), 0.0));
  out.subcritical_polygon = out.polygon;
  // Rays are searched in sequence; each one already runs its replications in parallel.
  for (std::size_t j = 0; j < rays.size(); ++j) {
    RegionRay ray;
    ray.subcritical_scale = subcritical_scale(net, rays[j]);
    ray.search = threshold_bisection(net, rays[j], eps, s, rng.substream(j), opt);
    std::vector<double> p(rays[j]), q(rays[j]);
    for (double& x : p) x *= ray.search.threshold;
    for (double& x : q) x *= ray.subcritical_scale;
    out.polygon.push_back(std::move(p));
    out.subcritical_polygon.push_back(std::move(q));
    out.rays.push_back(std::move(ray));
  }
  return out;
}

}  // namespace qnet
