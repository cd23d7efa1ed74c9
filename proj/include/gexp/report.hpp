#pragma once

// JSON records and CSV tables. All numbers are written in shortest
// round-trip form, so identical results give byte-identical files.
//
// CSV schemas:
//   solution field:   t,x,u         one row per (snapshot, node)
//   ensemble summary: path,B_T,qv_T one row per path

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gexp/band.hpp"
#include "gexp/comparison.hpp"
#include "gexp/cylinder.hpp"
#include "gexp/gheat.hpp"
#include "gexp/scenarios.hpp"

namespace gexp {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

inline json to_json(const VolatilityBand& b) {
  return {{"sigma_low", b.sigma_low}, {"sigma_high", b.sigma_high}};
}

inline json to_json(const GridSpec& g) {
  json j = {{"x_min", g.x_min},     {"x_max", g.x_max},           {"n_space", g.n_space},
            {"dx", g.dx()},         {"t_final", g.t_final},       {"cfl_safety", g.cfl_safety}};
  if (g.dt) j["dt"] = *g.dt;
  return j;
}

inline json to_json(const PrefixGrid& g) {
  json axes = json::array();
  for (const auto& a : g.axes)
    axes.push_back({{"x_min", a.x_min}, {"x_max", a.x_max}, {"n_nodes", a.n_nodes}});
  return {{"axes", axes}, {"cfl_safety", g.cfl_safety}};
}

/// Exactly the verdict fields.
inline json to_json(const ComparisonVerdict& v) {
  return {{"value_lo", v.value_lo},
          {"value_hi", v.value_hi},
          {"gap", v.gap},
          {"tolerance", v.tolerance},
          {"verdict", to_string(v.verdict)}};
}

inline json to_json(const StrictCheck& c) {
  return {{"verdict", to_json(c.verdict)},
          {"witness_found", c.witness_found},
          {"witness", c.witness},
          {"guaranteed", c.guaranteed},
          {"scheme_error", c.scheme_error},
          {"warnings", c.warnings},
          {"grid", to_json(c.grid)}};
}

inline json to_json(const MeanCertainty& m) {
  return {{"is_certain", m.is_certain},
          {"e_plus", m.e_plus},
          {"e_minus", m.e_minus},
          {"tolerance", m.tolerance}};
}

inline json to_json(const ControlPolicy& p) {
  switch (p.kind) {
    case ControlPolicy::Kind::constant:
      return {{"kind", "constant"}, {"sigma", p.sigma}};
    case ControlPolicy::Kind::piecewise_constant:
      return {{"kind", "piecewise_constant"},
              {"breakpoints", p.breakpoints},
              {"sigmas", p.sigmas}};
    case ControlPolicy::Kind::feedback_bangbang:
      return {{"kind", "feedback_bangbang"}, {"predicate", p.predicate->to_string()}};
  }
  return {};
}

inline json to_json(const MonteCarloSpec& mc) {
  return {{"n_paths", mc.n_paths}, {"n_steps", mc.n_steps}, {"seed", mc.seed}};
}

inline json to_json(const Estimate& e) {
  return {{"mean", e.mean}, {"ci99_halfwidth", e.ci_halfwidth}, {"std_dev", e.std_dev}};
}

inline json to_json(const LowerBound& lb) {
  json per = json::array();
  for (const auto& e : lb.per_policy) per.push_back(to_json(e));
  return {{"value", lb.value},
          {"ci99_halfwidth", lb.ci_halfwidth},
          {"argmax", lb.argmax},
          {"argmax_policy", to_json(lb.argmax_policy)},
          {"per_policy", per}};
}

inline json to_json(const QvCounterexampleReport& r) {
  return {{"band", to_json(r.band)},
          {"horizon", r.horizon},
          {"monte_carlo", to_json(r.mc)},
          {"threshold", r.threshold},
          {"capacity_leg", r.capacity_leg},
          {"expectation_leg", to_json(r.expectation_leg)},
          {"refutation_leg", r.refutation_leg},
          {"qv_dominated", r.qv_dominated},
          {"inf_hypothesis_refuted", r.inf_hypothesis_refuted},
          {"no_strict_gap", r.no_strict_gap},
          {"conclusion", r.conclusion}};
}

inline json ensemble_summary(const PathEnsemble& ens) {
  std::vector<double> b(ens.n_paths), qv(ens.n_paths);
  double qv_min = 0.0, qv_max = 0.0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    b[p] = ens.terminal_b(p);
    qv[p] = ens.terminal_qv(p);
    qv_min = p == 0 ? qv[p] : std::min(qv_min, qv[p]);
    qv_max = p == 0 ? qv[p] : std::max(qv_max, qv[p]);
  }
  const Estimate eb = summarize(b);
  const Estimate eq = summarize(qv);
  return {{"n_paths", ens.n_paths},
          {"n_steps", ens.n_steps},
          {"horizon", ens.horizon},
          {"seed", ens.seed},
          {"B_T", {{"mean", eb.mean}, {"variance", eb.std_dev * eb.std_dev},
                   {"ci99_halfwidth", eb.ci_halfwidth}}},
          {"qv_T", {{"mean", eq.mean}, {"min", qv_min}, {"max", qv_max}}}};
}

inline void write_solution_csv(std::ostream& os, const SolutionField& field) {
  os << "t,x,u\n";
  for (std::size_t s = 0; s < field.times.size(); ++s)
    for (int i = 0; i < field.grid.n_space; ++i)
      os << detail::number_text(field.times[s]) << ',' << detail::number_text(field.x(i)) << ','
         << detail::number_text(field.values[s][static_cast<std::size_t>(i)]) << '\n';
}

inline void write_ensemble_csv(std::ostream& os, const PathEnsemble& ens) {
  os << "path,B_T,qv_T\n";
  for (std::size_t p = 0; p < ens.n_paths; ++p)
    os << p << ',' << detail::number_text(ens.terminal_b(p)) << ','
       << detail::number_text(ens.terminal_qv(p)) << '\n';
}

}  // namespace gexp
