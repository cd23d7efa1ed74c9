#pragma once

// Explicit monotone finite-difference solver for the G-heat equation
//
//   d_t u - G(d_xx u) = 0,   u(0, x) = phi(x),
//
// whose solution is u(t, x) = E^[phi(x + sqrt(t) B_1)].
//
// Each step applies G nodewise to the central second difference, which picks
// sigma_high^2 where the discrete second difference is positive and
// sigma_low^2 otherwise. With dt <= dx^2 / sigma_high^2 every update is a
// convex combination of neighbouring values, so the scheme is monotone.
// Boundary nodes carry a zero second difference and keep their initial values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gexp/band.hpp"
#include "gexp/error.hpp"
#include "gexp/payoff.hpp"

namespace gexp {

inline constexpr double default_cfl_safety = 0.9;
inline constexpr int default_terminal_nodes = 801;

struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_space = default_terminal_nodes;
  double t_final = 1.0;
  double cfl_safety = default_cfl_safety;
  /// Explicit time step; checked against the CFL bound, never repaired.
  std::optional<double> dt;

  double dx() const noexcept { return (x_max - x_min) / (n_space - 1); }
  /// Node i; symmetric grids with odd n_space hit x = 0 exactly.
  double node(int i) const noexcept {
    return (x_min * (n_space - 1 - i) + x_max * i) / (n_space - 1);
  }

  void validate() const {
    if (!(std::isfinite(x_min) && std::isfinite(x_max)) || !(x_min < x_max))
      throw PreconditionError("grid: need finite x_min < x_max");
    if (n_space < 3) throw PreconditionError("grid: n_space must be >= 3");
    if (!(t_final > 0.0) || !std::isfinite(t_final))
      throw PreconditionError("grid: t_final must be positive");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw PreconditionError("grid: cfl_safety must lie in (0, 1]");
  }
};

struct SolveOptions {
  /// Times at which u is stored; 0 and t_final are always included.
  std::vector<double> snapshot_times;
  /// Store every time step.
  bool full_history = false;
};

/// Grid samples of u(t, .) at the stored snapshot times.
struct SolutionField {
  GridSpec grid;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // [snapshot][node]
  std::size_t steps = 0;
  double max_dt = 0.0;

  double x(int i) const noexcept { return grid.node(i); }

  /// Linear interpolation of snapshot s at x.
  double value_at(std::size_t s, double x) const;
};

namespace detail {

inline double interpolate(std::span<const double> u, double x_min, double x_max, double x) {
  if (!(x >= x_min && x <= x_max))
    throw PreconditionError("interpolation point " + std::to_string(x) + " outside grid [" +
                            std::to_string(x_min) + ", " + std::to_string(x_max) + "]");
  const std::size_t n = u.size();
  const double h = (x_max - x_min) / static_cast<double>(n - 1);
  double s = (x - x_min) / h;
  if (std::fabs(s - std::round(s)) < 1e-9) s = std::round(s);
  std::size_t i = static_cast<std::size_t>(std::floor(s));
  if (i >= n - 1) return u[n - 1];
  const double w = s - static_cast<double>(i);
  if (w == 0.0) return u[i];
  return (1.0 - w) * u[i] + w * u[i + 1];
}

}  // namespace detail

inline double SolutionField::value_at(std::size_t s, double x) const {
  return detail::interpolate(values.at(s), grid.x_min, grid.x_max, x);
}

class GHeatSolver {
 public:
  GHeatSolver(VolatilityBand band, GridSpec grid) : band_(band), grid_(std::move(grid)) {
    band_.validate();
    grid_.validate();
    const double dx = grid_.dx();
    stable_dt_ = grid_.cfl_safety * dx * dx / band_.variance_high();
    if (grid_.dt) {
      if (!(*grid_.dt > 0.0) || *grid_.dt > stable_dt_)
        throw NumericalError("CFL violation: dt = " + std::to_string(*grid_.dt) +
                             " exceeds cfl_safety * dx^2 / sigma_high^2 = " +
                             std::to_string(stable_dt_));
      stable_dt_ = *grid_.dt;
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const VolatilityBand& band() const noexcept { return band_; }
  double max_dt() const noexcept { return stable_dt_; }

  std::vector<double> sample(const PayoffExpr& phi) const {
    if (phi.arity() > 1)
      throw PreconditionError("G-heat initial condition must have arity <= 1, got " +
                              std::to_string(phi.arity()));
    std::vector<double> u(static_cast<std::size_t>(grid_.n_space));
    for (int i = 0; i < grid_.n_space; ++i) {
      const double xi = grid_.node(i);
      u[static_cast<std::size_t>(i)] = phi.evaluate_unchecked(std::span<const double>(&xi, 1));
    }
    return u;
  }

  SolutionField solve(const PayoffExpr& phi, const SolveOptions& options = {}) const {
    return solve_samples(sample(phi), options);
  }

  SolutionField solve_samples(std::vector<double> u, const SolveOptions& options = {}) const {
    check_samples(u);
    std::vector<double> stops = {grid_.t_final};
    for (double t : options.snapshot_times) {
      if (!(t >= 0.0 && t <= grid_.t_final))
        throw PreconditionError("snapshot time " + std::to_string(t) + " outside [0, t_final]");
      if (t > 0.0) stops.push_back(t);
    }
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    SolutionField field;
    field.grid = grid_;
    field.max_dt = stable_dt_;
    field.times.push_back(0.0);
    field.values.push_back(u);

    std::vector<double> next(u.size());
    double t = 0.0;
    for (double stop : stops) {
      const double span = stop - t;
      const auto n = static_cast<std::size_t>(std::ceil(span / stable_dt_));
      const double dt = span / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) {
        step(u, next, dt, field.steps);
        ++field.steps;
        if (options.full_history && k + 1 < n) {
          field.times.push_back(t + dt * static_cast<double>(k + 1));
          field.values.push_back(u);
        }
      }
      t = stop;
      field.times.push_back(stop);
      field.values.push_back(u);
    }
    return field;
  }

  /// u(t_final, x) without storing snapshots.
  double terminal_value(std::vector<double> u, double x = 0.0) const {
    check_samples(u);
    std::vector<double> next(u.size());
    const auto n = static_cast<std::size_t>(std::ceil(grid_.t_final / stable_dt_));
    const double dt = grid_.t_final / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) step(u, next, dt, k);
    return detail::interpolate(u, grid_.x_min, grid_.x_max, x);
  }

 private:
  void check_samples(const std::vector<double>& u) const {
    if (u.size() != static_cast<std::size_t>(grid_.n_space))
      throw PreconditionError("initial samples do not match grid size");
    for (std::size_t i = 0; i < u.size(); ++i)
      if (!std::isfinite(u[i]))
        throw NumericalError("non-finite initial value at node " + std::to_string(i));
  }

  void step(std::vector<double>& u, std::vector<double>& next, double dt,
            std::size_t step_index) const {
    const double dx = grid_.dx();
    const double inv_dx2 = 1.0 / (dx * dx);
    const std::size_t n = u.size();
    bool finite = true;
    next[0] = u[0];
    next[n - 1] = u[n - 1];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double second = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
      next[i] = u[i] + dt * g_function(second, band_);
      finite = finite && std::isfinite(next[i]);
    }
    if (!finite)
      throw NumericalError("non-finite value encountered at time step " +
                           std::to_string(step_index + 1));
    u.swap(next);
  }

  VolatilityBand band_;
  GridSpec grid_;
  double stable_dt_ = 0.0;
};

inline SolutionField solve_gheat(const PayoffExpr& phi, const VolatilityBand& band,
                                 const GridSpec& grid, const SolveOptions& options = {}) {
  return GHeatSolver(band, grid).solve(phi, options);
}

/// Radius beyond which phi is assumed not to vary much: the largest literal, at least 1.
inline double interesting_radius(const PayoffExpr& phi) {
  return std::max(1.0, phi.literal_radius());
}

/// Symmetric domain [-L, L] with L = 6 sigma_high sqrt(t) + radius; n_space forced odd
/// so that x = 0 is a node.
inline GridSpec auto_grid(const VolatilityBand& band, double t, double radius,
                          int n_space = default_terminal_nodes,
                          double cfl_safety = default_cfl_safety) {
  const double half_width = 6.0 * band.sigma_high * std::sqrt(t) + radius;
  GridSpec g;
  g.x_min = -half_width;
  g.x_max = half_width;
  g.n_space = std::max(3, n_space | 1);
  g.t_final = t;
  g.cfl_safety = cfl_safety;
  return g;
}

/// E^[phi(B_t)] = u(t, 0). Without a grid, the domain is auto-sized.
inline double g_expectation_terminal(const PayoffExpr& phi, const VolatilityBand& band, double t,
                                     std::optional<GridSpec> grid = std::nullopt) {
  band.validate();
  if (!(t > 0.0)) throw PreconditionError("expectation horizon must be positive");
  GridSpec g = grid ? *grid : auto_grid(band, t, interesting_radius(phi));
  g.t_final = t;
  GHeatSolver solver(band, g);
  return solver.terminal_value(solver.sample(phi), 0.0);
}

}  // namespace gexp
