#pragma once

// Dual side of the G-expectation: each adapted volatility control
// sigma_t in [sigma_low, sigma_high] induces one law P of the canonical
// process, and E^[X] = sup_P E_P[X]. A finite family of controls therefore
// yields Monte Carlo lower bounds for E^[X] and for the capacity
// v(A) = sup_P P(A).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/cylinder.hpp"
#include "gexp/error.hpp"
#include "gexp/gheat.hpp"
#include "gexp/parallel.hpp"
#include "gexp/payoff.hpp"

namespace gexp {

/// Two-sided 99% normal quantile.
inline constexpr double z99 = 2.5758293035489004;

struct ControlPolicy {
  enum class Kind { constant, piecewise_constant, feedback_bangbang };

  Kind kind = Kind::constant;
  double sigma = 0.0;
  /// Piecewise constant: sigmas[i] on [breakpoints[i-1], breakpoints[i]).
  std::vector<double> breakpoints;
  std::vector<double> sigmas;
  /// Feedback: sigma_high when the predicate holds at (x1 = t, x2 = B_t), else sigma_low.
  std::optional<EventPredicate> predicate;

  static ControlPolicy constant(double s) {
    ControlPolicy p;
    p.sigma = s;
    return p;
  }

  static ControlPolicy piecewise(std::vector<double> breaks, std::vector<double> values) {
    ControlPolicy p;
    p.kind = Kind::piecewise_constant;
    p.breakpoints = std::move(breaks);
    p.sigmas = std::move(values);
    if (p.sigmas.size() != p.breakpoints.size() + 1)
      throw PreconditionError("piecewise policy needs one more sigma than breakpoints");
    if (!std::is_sorted(p.breakpoints.begin(), p.breakpoints.end()))
      throw PreconditionError("piecewise policy breakpoints must be increasing");
    return p;
  }

  static ControlPolicy feedback(EventPredicate pred) {
    if (pred.arity() > 2)
      throw PreconditionError("feedback predicate may only use x1 (time) and x2 (B_t)");
    ControlPolicy p;
    p.kind = Kind::feedback_bangbang;
    p.predicate = std::move(pred);
    return p;
  }

  double sigma_at(double t, double b, const VolatilityBand& band) const {
    switch (kind) {
      case Kind::constant:
        return sigma;
      case Kind::piecewise_constant: {
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
        return sigmas[static_cast<std::size_t>(it - breakpoints.begin())];
      }
      case Kind::feedback_bangbang: {
        const double state[2] = {t, b};
        return (*predicate)(state) ? band.sigma_high : band.sigma_low;
      }
    }
    return sigma;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::constant:
        return "constant(" + detail::number_text(sigma) + ")";
      case Kind::piecewise_constant: {
        auto list = [](const std::vector<double>& v) {
          std::string s = "[";
          for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + detail::number_text(v[i]);
          return s + "]";
        };
        return "piecewise_constant(breakpoints=" + list(breakpoints) + ", sigmas=" +
               list(sigmas) + ")";
      }
      case Kind::feedback_bangbang:
        return "feedback_bangbang(" + predicate->to_string() + ")";
    }
    return {};
  }
};

struct MonteCarloSpec {
  std::size_t n_paths = 100000;
  std::size_t n_steps = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

/// Sampled state of simulated paths at a few observation times.
struct PathEnsemble {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> observation_times;  // ascending, last = horizon
  std::vector<double> b;                  // [path * n_obs + j]
  std::vector<double> qv;                 // [path * n_obs + j]

  std::size_t n_obs() const noexcept { return observation_times.size(); }
  double b_at(std::size_t path, std::size_t j) const { return b[path * n_obs() + j]; }
  double qv_at(std::size_t path, std::size_t j) const { return qv[path * n_obs() + j]; }
  double terminal_b(std::size_t path) const { return b_at(path, n_obs() - 1); }
  double terminal_qv(std::size_t path) const { return qv_at(path, n_obs() - 1); }

  std::size_t observation_index(double t) const {
    for (std::size_t j = 0; j < observation_times.size(); ++j)
      if (observation_times[j] == t) return j;
    throw PreconditionError("time " + std::to_string(t) + " was not observed by the ensemble");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for one path, fixed by (seed, path).
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL)));
}

/// Compensated sum in index order.
inline double kahan_sum(const std::vector<double>& v) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : v) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline std::size_t step_index(double t, double horizon, std::size_t n_steps) {
  const double exact = t / horizon * static_cast<double>(n_steps);
  const double k = std::round(exact);
  if (std::fabs(exact - k) > 1e-9 * static_cast<double>(n_steps) || k < 1.0 ||
      k > static_cast<double>(n_steps))
    throw PreconditionError("observation time " + std::to_string(t) +
                            " is not on the simulation step grid");
  return static_cast<std::size_t>(k);
}

}  // namespace detail

/// Euler paths dB = sigma sqrt(dt) xi with running quadratic variation.
/// qv(t_j) is accumulated as (sum of sigma^2) * T / n_steps so that constant
/// controls give sigma^2 t without drift from summing dt.
inline PathEnsemble simulate(const ControlPolicy& policy, const VolatilityBand& band,
                             double horizon, std::size_t n_paths, std::size_t n_steps,
                             std::uint64_t seed, std::vector<double> observation_times = {},
                             unsigned workers = 0) {
  band.validate();
  if (!(horizon > 0.0) || n_paths < 1 || n_steps < 1)
    throw PreconditionError("simulate: need T > 0, n_paths >= 1, n_steps >= 1");
  observation_times.push_back(horizon);
  std::sort(observation_times.begin(), observation_times.end());
  observation_times.erase(std::unique(observation_times.begin(), observation_times.end()),
                          observation_times.end());
  std::vector<std::size_t> obs_steps;
  for (double t : observation_times) obs_steps.push_back(detail::step_index(t, horizon, n_steps));

  PathEnsemble ens;
  ens.n_paths = n_paths;
  ens.n_steps = n_steps;
  ens.horizon = horizon;
  ens.seed = seed;
  ens.observation_times = observation_times;
  const std::size_t n_obs = observation_times.size();
  ens.b.assign(n_paths * n_obs, 0.0);
  ens.qv.assign(n_paths * n_obs, 0.0);

  const double dt = horizon / static_cast<double>(n_steps);
  const double sqrt_dt = std::sqrt(dt);
  parallel_for(
      n_paths,
      [&](std::size_t path) {
        auto rng = detail::path_stream(seed, path);
        std::normal_distribution<double> normal(0.0, 1.0);
        double b = 0.0;
        double sum_var = 0.0;
        std::size_t next_obs = 0;
        for (std::size_t k = 0; k < n_steps; ++k) {
          const double t = dt * static_cast<double>(k);
          const double s = policy.sigma_at(t, b, band);
          if (!(s >= band.sigma_low && s <= band.sigma_high))
            throw PreconditionError("policy " + policy.describe() + " emitted sigma " +
                                    std::to_string(s) + " outside the band on path " +
                                    std::to_string(path) + " at t = " + std::to_string(t));
          b += s * sqrt_dt * normal(rng);
          sum_var += s * s;
          while (next_obs < n_obs && obs_steps[next_obs] == k + 1) {
            ens.b[path * n_obs + next_obs] = b;
            ens.qv[path * n_obs + next_obs] =
                sum_var * horizon / static_cast<double>(n_steps);
            ++next_obs;
          }
        }
      },
      workers);
  return ens;
}

/// X = payoff(<B>_T), x1 bound to the terminal quadratic variation.
struct QuadraticVariationFunctional {
  double horizon = 1.0;
  PayoffExpr payoff;
};

using PathFunctional = std::variant<CylinderFunctional, QuadraticVariationFunctional>;

inline double functional_horizon(const PathFunctional& f) {
  return std::visit(
      [](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, CylinderFunctional>)
          return g.horizon();
        else
          return g.horizon;
      },
      f);
}

struct Estimate {
  double mean = 0.0;
  double ci_halfwidth = 0.0;  // 99%
  double std_dev = 0.0;
};

inline Estimate summarize(const std::vector<double>& samples) {
  const auto n = static_cast<double>(samples.size());
  Estimate e;
  e.mean = detail::kahan_sum(samples) / n;
  if (samples.size() > 1) {
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double d = samples[i] - e.mean;
      sq[i] = d * d;
    }
    e.std_dev = std::sqrt(detail::kahan_sum(sq) / (n - 1.0));
    e.ci_halfwidth = z99 * e.std_dev / std::sqrt(n);
  }
  return e;
}

/// Per-path values of a functional on an ensemble that observed its times.
inline std::vector<double> functional_samples(const PathFunctional& f, const PathEnsemble& ens) {
  std::vector<double> out(ens.n_paths);
  if (const auto* cyl = std::get_if<CylinderFunctional>(&f)) {
    std::vector<std::size_t> idx;
    for (double t : cyl->times) idx.push_back(ens.observation_index(t));
    std::vector<double> inc(cyl->size());
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
      double prev = 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double bk = ens.b_at(p, idx[k]);
        inc[k] = bk - prev;
        prev = bk;
      }
      out[p] = cyl->payoff.evaluate_unchecked(inc);
    }
  } else {
    const auto& q = std::get<QuadraticVariationFunctional>(f);
    const std::size_t j = ens.observation_index(q.horizon);
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
      const double v = ens.qv_at(p, j);
      out[p] = q.payoff.evaluate_unchecked(std::span<const double>(&v, 1));
    }
  }
  return out;
}

inline std::vector<double> observation_times_for(const PathFunctional& f) {
  if (const auto* cyl = std::get_if<CylinderFunctional>(&f)) return cyl->times;
  return {std::get<QuadraticVariationFunctional>(f).horizon};
}

struct LowerBound {
  double value = 0.0;
  double ci_halfwidth = 0.0;
  std::size_t argmax = 0;
  ControlPolicy argmax_policy;
  std::vector<Estimate> per_policy;
};

inline LowerBound lower_bound_from(const std::vector<Estimate>& estimates,
                                   const std::vector<ControlPolicy>& family) {
  LowerBound lb;
  lb.per_policy = estimates;
  for (std::size_t i = 1; i < estimates.size(); ++i)
    if (estimates[i].mean > estimates[lb.argmax].mean) lb.argmax = i;
  lb.value = estimates[lb.argmax].mean;
  lb.ci_halfwidth = estimates[lb.argmax].ci_halfwidth;
  lb.argmax_policy = family[lb.argmax];
  return lb;
}

/// max over the family of the Monte Carlo mean; a lower bound for E^[X] up to MC error.
inline LowerBound lower_bound_expectation(const PathFunctional& f, const VolatilityBand& band,
                                          const std::vector<ControlPolicy>& family,
                                          const MonteCarloSpec& mc) {
  if (family.empty()) throw PreconditionError("policy family is empty");
  if (const auto* cyl = std::get_if<CylinderFunctional>(&f)) cyl->validate();
  const double horizon = functional_horizon(f);
  std::vector<Estimate> estimates;
  for (const auto& policy : family) {
    const auto ens = simulate(policy, band, horizon, mc.n_paths, mc.n_steps, mc.seed,
                              observation_times_for(f), mc.workers);
    estimates.push_back(summarize(functional_samples(f, ens)));
  }
  return lower_bound_from(estimates, family);
}

/// Fraction of paths whose terminal state (x1 = B_T, x2 = <B>_T) satisfies the event.
inline double event_probability(const EventPredicate& event, const PathEnsemble& ens) {
  if (event.arity() > 2)
    throw PreconditionError("terminal events may only use x1 (B_T) and x2 (<B>_T)");
  std::size_t hits = 0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    const double state[2] = {ens.terminal_b(p), ens.terminal_qv(p)};
    if (event(state)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ens.n_paths);
}

struct CapacityEstimate {
  double value = 0.0;
  std::size_t argmax = 0;
  std::vector<double> per_policy;
};

/// max over the family of the empirical probability; a lower bound for v(A).
inline CapacityEstimate capacity_lower_bound(const EventPredicate& event,
                                             const VolatilityBand& band, double horizon,
                                             const std::vector<ControlPolicy>& family,
                                             const MonteCarloSpec& mc) {
  if (family.empty()) throw PreconditionError("policy family is empty");
  CapacityEstimate out;
  for (const auto& policy : family) {
    const auto ens = simulate(policy, band, horizon, mc.n_paths, mc.n_steps, mc.seed, {},
                              mc.workers);
    out.per_policy.push_back(event_probability(event, ens));
  }
  for (std::size_t i = 1; i < out.per_policy.size(); ++i)
    if (out.per_policy[i] > out.per_policy[out.argmax]) out.argmax = i;
  out.value = out.per_policy[out.argmax];
  return out;
}

/// Interval a <= B_t <= b; either end may be infinite.
struct IntervalEvent {
  double a = -1.0;
  double b = 1.0;
};

/// Piecewise-linear g <= 1_[a,b]: 0 outside [a, b], 1 on [a + eps, b - eps].
inline PayoffExpr mollified_indicator(const IntervalEvent& ev, double epsilon) {
  using dsl::constant;
  using dsl::operator-;
  using dsl::operator*;
  const PayoffExpr slope = constant(1.0 / epsilon);
  std::vector<NodePtr> legs = {constant(1.0).root_ptr()};
  if (std::isfinite(ev.a)) legs.push_back(((dsl::x(1) - constant(ev.a)) * slope).root_ptr());
  if (std::isfinite(ev.b)) legs.push_back(((constant(ev.b) - dsl::x(1)) * slope).root_ptr());
  return dsl::max({constant(0.0), dsl::make(Op::min, std::move(legs))});
}

struct InfCapacityBound {
  double value = 0.0;  // lower bound for inf_P P(a <= B_t <= b)
  PayoffExpr indicator;
  GridSpec grid;
};

/// inf_P P(a <= B_t <= b) >= inf_P E_P[g(B_t)] = -E^[-g(B_t)], computed on the PDE side.
inline InfCapacityBound capacity_complement_upper(const IntervalEvent& ev, double t,
                                                  const VolatilityBand& band, double epsilon,
                                                  std::optional<GridSpec> grid = std::nullopt) {
  band.validate();
  if (!(epsilon > 0.0)) throw PreconditionError("mollifier width must be positive");
  if (!(ev.a < ev.b)) throw PreconditionError("interval needs a < b");
  if (ev.b - ev.a <= 2.0 * epsilon)
    throw PreconditionError("interval [a, b] is too short for mollifier width " +
                            std::to_string(epsilon) + " (need b - a > 2 eps)");
  InfCapacityBound out;
  out.indicator = mollified_indicator(ev, epsilon);
  if (grid) {
    out.grid = *grid;
    out.grid.t_final = t;
  } else {
    double radius = 1.0;
    if (std::isfinite(ev.a)) radius = std::max(radius, std::fabs(ev.a));
    if (std::isfinite(ev.b)) radius = std::max(radius, std::fabs(ev.b));
    out.grid = auto_grid(band, t, radius + epsilon);
    // Resolve each ramp with several nodes.
    const double width = out.grid.x_max - out.grid.x_min;
    const double wanted = std::ceil(width / (0.5 * epsilon)) + 1.0;
    out.grid.n_space = std::max(out.grid.n_space, static_cast<int>(std::min(wanted, 8001.0)) | 1);
  }
  const GHeatSolver solver(band, out.grid);
  out.value = -solver.terminal_value(solver.sample(dsl::operator-(out.indicator)), 0.0);
  return out;
}

}  // namespace gexp
