#pragma once

// Strict comparison checks for G-expectations.
//
// For X = phi(increments) <= Y = psi(increments) with sigma_low > 0, E^[X] < E^[Y]
// holds exactly when phi < psi somewhere. The checks below evaluate both sides on
// one discretization and classify the gap against a tolerance derived from a
// one-step grid refinement. A witness is searched on the tensor grid only, so a
// witness narrower than the grid spacing can be missed.

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/cylinder.hpp"
#include "gexp/error.hpp"
#include "gexp/payoff.hpp"
#include "gexp/scenarios.hpp"

namespace gexp {

inline constexpr double tolerance_floor = 1e-4;

enum class Verdict { strict_less, equal_within_tol, order_violation };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::strict_less: return "StrictLess";
    case Verdict::equal_within_tol: return "EqualWithinTol";
    case Verdict::order_violation: return "OrderViolation";
  }
  return "";
}

struct ComparisonVerdict {
  double value_lo = 0.0;
  double value_hi = 0.0;
  double gap = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::equal_within_tol;
};

inline ComparisonVerdict classify(double value_lo, double value_hi, double tolerance) {
  ComparisonVerdict v{value_lo, value_hi, value_hi - value_lo, tolerance,
                      Verdict::equal_within_tol};
  if (v.gap > tolerance)
    v.verdict = Verdict::strict_less;
  else if (v.gap < -tolerance)
    v.verdict = Verdict::order_violation;
  return v;
}

struct ComparisonOptions {
  std::optional<PrefixGrid> grid;   // auto-sized when empty
  std::optional<double> tolerance;  // max(1e-4, 3 * refinement error) when empty
  ExecutionOptions exec;
};

struct StrictCheck {
  ComparisonVerdict verdict;
  bool witness_found = false;
  std::vector<double> witness;
  /// False when sigma_low = 0: the verdict is then reported, not guaranteed.
  bool guaranteed = true;
  double scheme_error = 0.0;
  PrefixGrid grid;
  std::vector<std::string> warnings;
};

inline PrefixGrid auto_pair_grid(const CylinderFunctional& f_lo, const CylinderFunctional& f_hi,
                                 const VolatilityBand& band) {
  const double radius =
      std::max(interesting_radius(f_lo.payoff), interesting_radius(f_hi.payoff));
  return auto_prefix_grid(f_lo, band, std::nullopt, radius);
}

inline StrictCheck check_strict(const CylinderFunctional& f_lo, const CylinderFunctional& f_hi,
                                const VolatilityBand& band, const ComparisonOptions& options = {}) {
  band.validate();
  f_lo.validate();
  StrictCheck out;
  out.grid = options.grid ? *options.grid : auto_pair_grid(f_lo, f_hi, band);
  const auto [lo, hi] = evaluate_pair(f_lo, f_hi, band, out.grid, options.exec);

  if (options.tolerance) {
    out.verdict = classify(lo, hi, *options.tolerance);
  } else {
    const PrefixGrid coarse = coarsen(out.grid);
    const auto [lo_c, hi_c] = evaluate_pair(f_lo, f_hi, band, coarse, options.exec);
    out.scheme_error = std::max(std::fabs(lo - lo_c), std::fabs(hi - hi_c));
    out.verdict = classify(lo, hi, std::max(tolerance_floor, 3.0 * out.scheme_error));
  }

  const auto order = check_order(f_lo.payoff, f_hi.payoff, out.grid, out.verdict.tolerance);
  out.witness_found = order.has_witness;
  out.witness = order.witness;

  if (band.degenerate_low()) {
    out.guaranteed = false;
    out.warnings.push_back(
        "sigma_low = 0: strict comparison is not guaranteed (the degenerate band admits "
        "phi < psi somewhere with equal expectations); verdict is reported only");
  }
  if (out.witness_found && out.guaranteed && out.verdict.verdict != Verdict::strict_less)
    out.warnings.push_back("witness found but gap not resolved above tolerance");
  return out;
}

/// E^[phi(B_t)] < 0 for phi <= 0 with phi(x0) < 0 somewhere (sigma_low > 0).
inline StrictCheck check_negativity(const PayoffExpr& phi, const VolatilityBand& band,
                                    const ComparisonOptions& options = {}, double t = 1.0) {
  if (phi.arity() > 1) throw PreconditionError("negativity check needs a payoff of arity <= 1");
  const CylinderFunctional lo{{t}, phi};
  const CylinderFunctional hi{{t}, dsl::constant(0.0)};
  const PrefixGrid grid = options.grid ? *options.grid : auto_pair_grid(lo, hi, band);
  const auto order = check_order(phi, hi.payoff, grid);
  if (!order.ordered)
    throw PreconditionError("negativity check: phi > 0 at grid node " +
                            format_point(order.violation));
  ComparisonOptions opts = options;
  opts.grid = grid;
  StrictCheck out = check_strict(lo, hi, band, opts);
  if (!order.has_witness) out.warnings.push_back("phi vanishes on the whole grid");
  return out;
}

struct MeanCertainty {
  bool is_certain = false;
  double e_plus = 0.0;   // E^[X]
  double e_minus = 0.0;  // E^[-X]
  double tolerance = 0.0;
};

inline MeanCertainty check_mean_certainty(const CylinderFunctional& f, const VolatilityBand& band,
                                          std::optional<PrefixGrid> grid = std::nullopt,
                                          double tolerance = tolerance_floor,
                                          const ExecutionOptions& exec = {}) {
  f.validate();
  const PrefixGrid g = grid ? *grid : auto_prefix_grid(f, band);
  const CylinderFunctional neg{f.times, dsl::operator-(f.payoff)};
  auto minus = std::async(std::launch::async, [&] { return evaluate_cylinder(neg, band, g, exec); });
  MeanCertainty out;
  out.e_plus = evaluate_cylinder(f, band, g, exec);
  out.e_minus = minus.get();
  out.tolerance = tolerance;
  out.is_certain = std::fabs(out.e_plus + out.e_minus) <= tolerance;
  return out;
}

struct QvCounterexampleReport {
  VolatilityBand band;
  double horizon = 1.0;
  MonteCarloSpec mc;
  double threshold = 0.0;            // sigma_high^2 T
  double capacity_leg = 0.0;         // P(<B>_T < threshold) under constant sigma_low
  LowerBound expectation_leg;        // E^[<B>_T] lower bound over {sigma_low, sigma_high}
  double refutation_leg = 0.0;       // P(<B>_T < threshold) under constant sigma_high
  bool qv_dominated = true;          // <B>_T <= threshold on every simulated path
  bool inf_hypothesis_refuted = false;
  bool no_strict_gap = false;        // |E^[<B>_T] - threshold| within CI + 1e-3
  std::string conclusion;
};

/// <B>_T <= sigma_high^2 T with v(<B>_T < sigma_high^2 T) = 1, yet
/// E^[<B>_T] = sigma_high^2 T: capacity-positive strict order does not give a strict gap.
inline QvCounterexampleReport run_qv_counterexample(const VolatilityBand& band, double horizon,
                                                    const MonteCarloSpec& mc) {
  band.validate();
  if (!(band.sigma_high > band.sigma_low && band.sigma_low > 0.0))
    throw PreconditionError("QV counterexample needs sigma_high > sigma_low > 0");
  QvCounterexampleReport r;
  r.band = band;
  r.horizon = horizon;
  r.mc = mc;
  r.threshold = band.variance_high() * horizon;

  const std::vector<ControlPolicy> family = {ControlPolicy::constant(band.sigma_low),
                                             ControlPolicy::constant(band.sigma_high)};
  const EventPredicate below{dsl::x(2), Relation::less, dsl::constant(r.threshold)};
  const PathFunctional qv = QuadraticVariationFunctional{horizon, dsl::x(1)};

  std::vector<Estimate> estimates;
  std::vector<double> probabilities;
  for (const auto& policy : family) {
    const auto ens = simulate(policy, band, horizon, mc.n_paths, mc.n_steps, mc.seed, {},
                              mc.workers);
    estimates.push_back(summarize(functional_samples(qv, ens)));
    probabilities.push_back(event_probability(below, ens));
    for (std::size_t p = 0; p < ens.n_paths; ++p)
      r.qv_dominated = r.qv_dominated && ens.terminal_qv(p) <= r.threshold;
  }
  r.capacity_leg = probabilities[0];
  r.refutation_leg = probabilities[1];
  r.expectation_leg = lower_bound_from(estimates, family);
  r.inf_hypothesis_refuted = r.refutation_leg == 0.0;
  r.no_strict_gap =
      std::fabs(r.expectation_leg.value - r.threshold) <= r.expectation_leg.ci_halfwidth + 1e-3;
  r.conclusion =
      "<B>_T <= sigma_high^2 T on every path and the strict event has capacity " +
      detail::number_text(r.capacity_leg) + ", yet E^[<B>_T] ~ " +
      detail::number_text(r.expectation_leg.value) + " = sigma_high^2 T; the inf_P P(X < Y) > 0 "
      "hypothesis fails since constant sigma_high gives P(<B>_T < sigma_high^2 T) = " +
      detail::number_text(r.refutation_leg);
  return r;
}

}  // namespace gexp
