#pragma once

// G-expectation of cylinder functionals
//
//   X = phi(B_{t1}, B_{t2} - B_{t1}, ..., B_{tn} - B_{t(n-1)})
//
// by backward recursion: psi_n = phi and
//
//   psi_{k-1}(x_1..x_{k-1}) = E^[psi_k(x_1..x_{k-1}, sqrt(t_k - t_{k-1}) B_1)],
//
// each inner expectation being one 1-D G-heat solve in the last variable.
// psi_k is tabulated on the tensor product of per-increment axes. Axis k also
// serves as the solve grid for increment k, so the only interpolation is the
// read-out at y = 0.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/error.hpp"
#include "gexp/gheat.hpp"
#include "gexp/parallel.hpp"
#include "gexp/payoff.hpp"

namespace gexp {

inline constexpr std::size_t max_cylinder_increments = 3;

struct CylinderFunctional {
  std::vector<double> times;  // t_1 < ... < t_n, all > 0
  PayoffExpr payoff;          // x_i bound to the i-th increment

  std::size_t size() const noexcept { return times.size(); }
  double horizon() const { return times.back(); }
  double increment(std::size_t k) const { return k == 0 ? times[0] : times[k] - times[k - 1]; }

  void validate() const {
    if (times.empty()) throw PreconditionError("cylinder functional needs at least one time");
    double prev = 0.0;
    for (double t : times) {
      if (!std::isfinite(t) || !(t > prev))
        throw PreconditionError("cylinder times must be positive and strictly increasing");
      prev = t;
    }
    if (payoff.arity() > static_cast<int>(times.size()))
      throw PreconditionError("payoff references x" + std::to_string(payoff.arity()) +
                              " but the functional has " + std::to_string(times.size()) +
                              " increments");
  }
};

struct Axis {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_nodes = 401;

  double node(int i) const noexcept {
    return (x_min * (n_nodes - 1 - i) + x_max * i) / (n_nodes - 1);
  }
};

struct PrefixGrid {
  std::vector<Axis> axes;  // one per increment
  double cfl_safety = default_cfl_safety;

  std::size_t tensor_size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= static_cast<std::size_t>(a.n_nodes);
    return n;
  }

  /// Coordinates of flat tensor index p (last axis fastest).
  std::vector<double> point(std::size_t p) const {
    std::vector<double> x(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      const auto m = static_cast<std::size_t>(axes[k].n_nodes);
      x[k] = axes[k].node(static_cast<int>(p % m));
      p /= m;
    }
    return x;
  }

  void validate(std::size_t increments) const {
    if (axes.size() != increments)
      throw PreconditionError("prefix grid has " + std::to_string(axes.size()) +
                              " axes for " + std::to_string(increments) + " increments");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const auto& a = axes[k];
      if (!(a.x_min < a.x_max) || a.n_nodes < 3)
        throw PreconditionError("prefix axis " + std::to_string(k + 1) + " is invalid");
      if (!(a.x_min <= 0.0 && a.x_max >= 0.0))
        throw PreconditionError("prefix axis " + std::to_string(k + 1) +
                                " does not contain the read-out point 0");
    }
  }
};

/// Default nodes per axis; cost grows like nodes^n.
inline int default_axis_nodes(std::size_t increments) {
  switch (increments) {
    case 1: return default_terminal_nodes;
    case 2: return 401;
    default: return 101;
  }
}

/// Per-increment axes [-L_k, L_k], L_k = 6 sigma_high sqrt(dt_k) + radius.
inline PrefixGrid auto_prefix_grid(const CylinderFunctional& f, const VolatilityBand& band,
                                   std::optional<int> nodes = std::nullopt,
                                   std::optional<double> radius = std::nullopt,
                                   double cfl_safety = default_cfl_safety) {
  f.validate();
  const double r = radius ? *radius : interesting_radius(f.payoff);
  const int m = std::max(3, (nodes ? *nodes : default_axis_nodes(f.size())) | 1);
  PrefixGrid grid;
  grid.cfl_safety = cfl_safety;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double half = 6.0 * band.sigma_high * std::sqrt(f.increment(k)) + r;
    grid.axes.push_back({-half, half, m});
  }
  return grid;
}

/// Same bounds, half the resolution: the grid one refinement step coarser.
inline PrefixGrid coarsen(const PrefixGrid& grid) {
  PrefixGrid coarse = grid;
  for (auto& a : coarse.axes) a.n_nodes = std::max(3, (a.n_nodes - 1) / 2 + 1);
  return coarse;
}

struct ExecutionOptions {
  unsigned workers = 0;  // 0: GEXP_THREADS or hardware
};

namespace detail {

inline void check_cylinder(const CylinderFunctional& f, const VolatilityBand& band,
                           const PrefixGrid& grid) {
  band.validate();
  f.validate();
  if (f.size() > max_cylinder_increments)
    throw PreconditionError("cylinder functionals are limited to " +
                            std::to_string(max_cylinder_increments) + " increments");
  grid.validate(f.size());
}

inline std::vector<double> tabulate(const PayoffExpr& payoff, const PrefixGrid& grid) {
  std::vector<double> table(grid.tensor_size());
  for (std::size_t p = 0; p < table.size(); ++p) {
    const auto x = grid.point(p);
    table[p] = payoff.evaluate_unchecked(x);
  }
  return table;
}

inline double backward_recursion(std::vector<double> table, const CylinderFunctional& f,
                                  const VolatilityBand& band, const PrefixGrid& grid,
                                  const ExecutionOptions& exec) {
  for (std::size_t k = f.size(); k-- > 0;) {
    const Axis& axis = grid.axes[k];
    GridSpec spec;
    spec.x_min = axis.x_min;
    spec.x_max = axis.x_max;
    spec.n_space = axis.n_nodes;
    spec.t_final = f.increment(k);
    spec.cfl_safety = grid.cfl_safety;
    const GHeatSolver solver(band, spec);

    const auto m = static_cast<std::size_t>(axis.n_nodes);
    const std::size_t prefixes = table.size() / m;
    std::vector<double> reduced(prefixes);
    parallel_for(
        prefixes,
        [&](std::size_t p) {
          std::vector<double> row(table.begin() + static_cast<std::ptrdiff_t>(p * m),
                                  table.begin() + static_cast<std::ptrdiff_t>((p + 1) * m));
          reduced[p] = solver.terminal_value(std::move(row), 0.0);
        },
        exec.workers);
    table = std::move(reduced);
  }
  return table.front();
}

}  // namespace detail

inline double evaluate_cylinder(const CylinderFunctional& f, const VolatilityBand& band,
                                const PrefixGrid& grid, const ExecutionOptions& exec = {}) {
  detail::check_cylinder(f, band, grid);
  return detail::backward_recursion(detail::tabulate(f.payoff, grid), f, band, grid, exec);
}

inline double evaluate_cylinder(const CylinderFunctional& f, const VolatilityBand& band,
                                const ExecutionOptions& exec = {}) {
  return evaluate_cylinder(f, band, auto_prefix_grid(f, band), exec);
}

/// Node where phi > psi, if any.
struct OrderCheck {
  bool ordered = true;
  std::vector<double> violation;
  bool has_witness = false;
  std::vector<double> witness;  // node with the largest psi - phi
  double max_gap = 0.0;
};

inline OrderCheck check_order(const PayoffExpr& lo, const PayoffExpr& hi, const PrefixGrid& grid,
                              double witness_margin = 0.0) {
  OrderCheck out;
  for (std::size_t p = 0; p < grid.tensor_size(); ++p) {
    const auto x = grid.point(p);
    const double a = lo.evaluate_unchecked(x);
    const double b = hi.evaluate_unchecked(x);
    if (a > b) {
      out.ordered = false;
      out.violation = x;
      return out;
    }
    if (b - a > out.max_gap) {
      out.max_gap = b - a;
      out.witness = x;
    }
  }
  out.has_witness = out.max_gap > witness_margin;
  if (!out.has_witness) out.witness.clear();
  return out;
}

inline std::string format_point(const std::vector<double>& x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += detail::number_text(x[i]);
  }
  return s + ")";
}

/// E^[X], E^[Y] on one shared discretization; requires phi <= psi on the tensor grid.
inline std::pair<double, double> evaluate_pair(const CylinderFunctional& f_lo,
                                               const CylinderFunctional& f_hi,
                                               const VolatilityBand& band, const PrefixGrid& grid,
                                               const ExecutionOptions& exec = {}) {
  if (f_lo.times != f_hi.times)
    throw PreconditionError("evaluate_pair: time partitions differ");
  detail::check_cylinder(f_lo, band, grid);
  detail::check_cylinder(f_hi, band, grid);
  const auto order = check_order(f_lo.payoff, f_hi.payoff, grid);
  if (!order.ordered)
    throw PreconditionError("order violation: phi > psi at grid node " +
                            format_point(order.violation));
  return {evaluate_cylinder(f_lo, band, grid, exec), evaluate_cylinder(f_hi, band, grid, exec)};
}

}  // namespace gexp
