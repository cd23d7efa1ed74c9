#pragma once

// Batch front end: JSON run configs, dispatch to the engines, and
// deterministic JSON/CSV output.
//
// Config (schema_version 1):
//   {
//     "task": "solve" | "expect" | "compare" | "capacity" | "simulate" | "counterexample",
//     "band": {"sigma_low": 0.5, "sigma_high": 1.0},
//     "payoff": "pow(x1,2)",                       solve, expect
//     "payoff_lo": "...", "payoff_hi": "...",      compare
//     "times": [0.5, 1.0] | "t": 1.0,              expect, compare, solve, capacity
//     "grid": {"x_min", "x_max", "n_space", "nodes", "radius", "cfl_safety",
//              "snapshot_times", "full_history"},
//     "tolerance": 1e-4,                           compare (optional)
//     "interval": {"a": -1, "b": 1, "epsilon": 0.1},  capacity
//     "event": "abs(x1) <= 1",                     capacity, Monte Carlo leg (x1 = B_T, x2 = <B>_T)
//     "policies": [{"kind": "constant", "sigma": 0.5}, ...],
//     "horizon": 1.0,                              simulate, counterexample
//     "mc": {"n_paths": 100000, "n_steps": 1000, "seed": 7},
//     "output": {"path": "out.json", "format": "json" | "csv"}
//   }

#include <cmath>
#include <cstdint>
#include <limits>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gexp/band.hpp"
#include "gexp/comparison.hpp"
#include "gexp/cylinder.hpp"
#include "gexp/error.hpp"
#include "gexp/gheat.hpp"
#include "gexp/payoff.hpp"
#include "gexp/report.hpp"
#include "gexp/scenarios.hpp"

namespace gexp::cli {

enum class Task { solve, expect, compare, capacity, simulate, counterexample };
enum class Format { json, csv };

struct GridOverrides {
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::optional<int> n_space;  // solve / terminal grid
  std::optional<int> nodes;    // per prefix axis
  std::optional<double> radius;
  std::optional<double> cfl_safety;
  std::vector<double> snapshot_times;
  bool full_history = false;
};

struct RunConfig {
  Task task = Task::expect;
  VolatilityBand band;
  std::string payoff;
  std::string payoff_lo;
  std::string payoff_hi;
  std::vector<double> times;
  GridOverrides grid;
  std::optional<double> tolerance;
  std::optional<MonteCarloSpec> mc;
  std::vector<ControlPolicy> policies;
  std::optional<std::string> event;
  std::optional<IntervalEvent> interval;
  double epsilon = 0.1;
  double horizon = 1.0;
  std::string output_path;  // empty: stdout
  Format format = Format::json;
};

namespace detail {

/// Typed access to a JSON object that reports the field path on failure.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string field(const char* key) const { return path_ + "/" + key; }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("config " + (key[0] ? field(key) : (path_.empty() ? "/" : path_)) + ": " +
                      what);
  }

  const json& at(const char* key) const {
    if (!has(key)) fail(key, "missing required field");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  std::optional<double> optional_number(const char* key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::uint64_t unsigned_integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::optional<int> optional_int(const char* key) const {
    if (!has(key)) return std::nullopt;
    const std::uint64_t v = unsigned_integer(key);
    if (v > 1000000) fail(key, "value too large");
    return static_cast<int>(v);
  }

  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected a boolean");
    return v.get<bool>();
  }

  std::vector<double> numbers(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        throw ConfigError("config " + field(key) + "/" + std::to_string(i) + ": expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Reader child(const char* key) const { return Reader(at(key), field(key)); }
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

inline Task parse_task(const Reader& r) {
  const std::string t = r.string("task");
  if (t == "solve") return Task::solve;
  if (t == "expect") return Task::expect;
  if (t == "compare") return Task::compare;
  if (t == "capacity") return Task::capacity;
  if (t == "simulate") return Task::simulate;
  if (t == "counterexample") return Task::counterexample;
  r.fail("task", "unknown task '" + t + "'");
}

inline const char* task_name(Task t) {
  switch (t) {
    case Task::solve: return "solve";
    case Task::expect: return "expect";
    case Task::compare: return "compare";
    case Task::capacity: return "capacity";
    case Task::simulate: return "simulate";
    case Task::counterexample: return "counterexample";
  }
  return "";
}

inline ControlPolicy parse_policy(const Reader& r) {
  const std::string kind = r.string("kind");
  if (kind == "constant") return ControlPolicy::constant(r.number("sigma"));
  if (kind == "piecewise_constant") {
    try {
      return ControlPolicy::piecewise(r.numbers("breakpoints"), r.numbers("sigmas"));
    } catch (const PreconditionError& e) {
      r.fail("sigmas", e.what());
    }
  }
  if (kind == "feedback_bangbang") return ControlPolicy::feedback(parse_event(r.string("predicate")));
  r.fail("kind", "unknown policy kind '" + kind + "'");
}

inline bool is_mc_task(const RunConfig& c) {
  return c.task == Task::simulate || c.task == Task::counterexample ||
         (c.task == Task::capacity && c.event.has_value());
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::Reader;
  const Reader r(j, "");
  if (r.has("schema_version") && r.unsigned_integer("schema_version") != schema_version)
    r.fail("schema_version", "unsupported schema version");
  RunConfig c;
  c.task = detail::parse_task(r);

  const Reader band = r.child("band");
  c.band.sigma_low = band.number("sigma_low");
  c.band.sigma_high = band.number("sigma_high");
  try {
    c.band.validate();
  } catch (const Error& e) {
    band.fail("", e.what());
  }

  if (r.has("times"))
    c.times = r.numbers("times");
  else if (r.has("t"))
    c.times = {r.number("t")};
  if (r.has("horizon")) c.horizon = r.number("horizon");
  if (!(c.horizon > 0.0)) r.fail("horizon", "must be positive");

  if (r.has("grid")) {
    const Reader g = r.child("grid");
    c.grid.x_min = g.optional_number("x_min");
    c.grid.x_max = g.optional_number("x_max");
    c.grid.n_space = g.optional_int("n_space");
    c.grid.nodes = g.optional_int("nodes");
    c.grid.radius = g.optional_number("radius");
    c.grid.cfl_safety = g.optional_number("cfl_safety");
    if (g.has("snapshot_times")) c.grid.snapshot_times = g.numbers("snapshot_times");
    c.grid.full_history = g.boolean("full_history", false);
    if (c.grid.x_min.has_value() != c.grid.x_max.has_value())
      g.fail("x_max", "x_min and x_max must be given together");
  }
  c.tolerance = r.optional_number("tolerance");
  if (c.tolerance && !(*c.tolerance >= 0.0)) r.fail("tolerance", "must be non-negative");

  if (r.has("mc")) {
    const Reader m = r.child("mc");
    MonteCarloSpec mc;
    if (m.has("n_paths")) mc.n_paths = m.unsigned_integer("n_paths");
    if (m.has("n_steps")) mc.n_steps = m.unsigned_integer("n_steps");
    mc.seed = m.unsigned_integer("seed");
    c.mc = mc;
  }
  if (r.has("policies")) {
    const json& ps = r.at("policies");
    if (!ps.is_array()) r.fail("policies", "expected an array");
    for (std::size_t i = 0; i < ps.size(); ++i)
      c.policies.push_back(detail::parse_policy(Reader(ps[i], r.field("policies") + "/" + std::to_string(i))));
  }
  if (r.has("event")) c.event = r.string("event");
  if (r.has("interval")) {
    const Reader iv = r.child("interval");
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto end = [&](const char* key, double fallback) {
      if (!iv.has(key)) return fallback;
      const json& v = iv.at(key);
      if (v.is_string() && (v == "-inf" || v == "inf")) return v == "inf" ? inf : -inf;
      return iv.number(key);
    };
    c.interval = IntervalEvent{end("a", -inf), end("b", inf)};
    if (iv.has("epsilon")) c.epsilon = iv.number("epsilon");
  }

  if (r.has("output")) {
    const Reader o = r.child("output");
    if (o.has("path")) c.output_path = o.string("path");
    if (o.has("format")) {
      const std::string f = o.string("format");
      if (f == "json")
        c.format = Format::json;
      else if (f == "csv")
        c.format = Format::csv;
      else
        o.fail("format", "expected 'json' or 'csv'");
    } else {
      c.format = c.task == Task::solve ? Format::csv : Format::json;
    }
  } else {
    c.format = c.task == Task::solve ? Format::csv : Format::json;
  }

  // Payload completeness per task.
  switch (c.task) {
    case Task::solve:
    case Task::expect:
      c.payoff = r.string("payoff");
      if (c.times.empty()) r.fail("times", "missing required field");
      break;
    case Task::compare:
      c.payoff_lo = r.string("payoff_lo");
      c.payoff_hi = r.string("payoff_hi");
      if (c.times.empty()) r.fail("times", "missing required field");
      break;
    case Task::capacity:
      if (!c.interval) r.fail("interval", "missing required field");
      if (c.times.empty()) c.times = {c.horizon};
      if (c.event && c.policies.empty()) r.fail("policies", "required with 'event'");
      break;
    case Task::simulate:
      if (c.policies.size() != 1) r.fail("policies", "simulate needs exactly one policy");
      break;
    case Task::counterexample:
      break;
  }
  if (c.task == Task::solve && c.times.size() != 1) r.fail("times", "solve takes a single time");
  if (c.format == Format::csv && c.task != Task::solve && c.task != Task::simulate)
    r.fail("output", "csv output is only available for solve and simulate");
  if (detail::is_mc_task(c)) {
    if (!c.mc) r.fail("mc", "Monte Carlo tasks need an 'mc' block with a seed");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

struct Output {
  std::string body;
  /// Metadata for CSV bodies, written next to the output file.
  std::optional<std::string> metadata;
};

namespace detail {

inline GridSpec terminal_grid(const RunConfig& c, const PayoffExpr& phi, double t) {
  GridSpec g = auto_grid(c.band, t, c.grid.radius ? *c.grid.radius : interesting_radius(phi),
                         c.grid.n_space ? *c.grid.n_space : default_terminal_nodes,
                         c.grid.cfl_safety ? *c.grid.cfl_safety : default_cfl_safety);
  if (c.grid.x_min) {
    g.x_min = *c.grid.x_min;
    g.x_max = *c.grid.x_max;
    if (c.grid.n_space) g.n_space = *c.grid.n_space;
  }
  return g;
}

inline PrefixGrid prefix_grid(const RunConfig& c, const CylinderFunctional& f, double radius) {
  return auto_prefix_grid(f, c.band, c.grid.nodes, c.grid.radius ? *c.grid.radius : radius,
                          c.grid.cfl_safety ? *c.grid.cfl_safety : default_cfl_safety);
}

inline json envelope(const RunConfig& c) {
  return {{"schema_version", schema_version}, {"task", task_name(c.task)}, {"band", to_json(c.band)}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Runs the task and renders its output. Worker count never affects the bytes.
inline Output execute(const RunConfig& c, unsigned workers = 0) {
  const ExecutionOptions exec{workers};
  json out = detail::envelope(c);
  switch (c.task) {
    case Task::solve: {
      const PayoffExpr phi = parse_payoff(c.payoff);
      const GridSpec g = detail::terminal_grid(c, phi, c.times.front());
      SolveOptions opts;
      opts.snapshot_times = c.grid.snapshot_times;
      opts.full_history = c.grid.full_history;
      const SolutionField field = solve_gheat(phi, c.band, g, opts);
      json meta = out;
      meta["payoff"] = phi.to_string();
      meta["grid"] = to_json(g);
      meta["steps"] = field.steps;
      meta["max_dt"] = field.max_dt;
      meta["snapshot_times"] = field.times;
      if (c.format == Format::csv) {
        std::ostringstream os;
        write_solution_csv(os, field);
        return {os.str(), detail::dump(meta)};
      }
      if (g.x_min <= 0.0 && g.x_max >= 0.0)
        meta["value_at_origin"] = field.value_at(field.times.size() - 1, 0.0);
      meta["values"] = field.values;
      return {detail::dump(meta), std::nullopt};
    }
    case Task::expect: {
      const CylinderFunctional f{c.times, parse_payoff(c.payoff)};
      f.validate();
      if (f.size() > max_cylinder_increments)
        throw PreconditionError("expect supports at most 3 times");
      const PrefixGrid g = detail::prefix_grid(c, f, interesting_radius(f.payoff));
      out["value"] = evaluate_cylinder(f, c.band, g, exec);
      out["metadata"] = {{"payoff", f.payoff.to_string()}, {"times", f.times}, {"grid", to_json(g)}};
      return {detail::dump(out), std::nullopt};
    }
    case Task::compare: {
      const CylinderFunctional lo{c.times, parse_payoff(c.payoff_lo)};
      const CylinderFunctional hi{c.times, parse_payoff(c.payoff_hi)};
      lo.validate();
      hi.validate();
      ComparisonOptions opts;
      opts.grid = detail::prefix_grid(
          c, lo, std::max(interesting_radius(lo.payoff), interesting_radius(hi.payoff)));
      opts.tolerance = c.tolerance;
      opts.exec = exec;
      const StrictCheck check = check_strict(lo, hi, c.band, opts);
      out["verdict"] = to_json(check.verdict);
      json detail_json = to_json(check);
      detail_json.erase("verdict");
      out["check"] = detail_json;
      out["metadata"] = {{"payoff_lo", lo.payoff.to_string()},
                         {"payoff_hi", hi.payoff.to_string()},
                         {"times", c.times}};
      return {detail::dump(out), std::nullopt};
    }
    case Task::capacity: {
      const double t = c.times.front();
      std::optional<GridSpec> grid;
      if (c.grid.x_min) grid = detail::terminal_grid(c, dsl::constant(0.0), t);
      const InfCapacityBound inf = capacity_complement_upper(*c.interval, t, c.band, c.epsilon, grid);
      auto end = [](double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); };
      out["inf_lower_bound"] = inf.value;
      out["inf_metadata"] = {{"a", end(c.interval->a)},
                             {"b", end(c.interval->b)},
                             {"t", t},
                             {"epsilon", c.epsilon},
                             {"indicator", inf.indicator.to_string()},
                             {"grid", to_json(inf.grid)}};
      if (c.event) {
        const EventPredicate ev = parse_event(*c.event);
        MonteCarloSpec mc = *c.mc;
        mc.workers = workers;
        const CapacityEstimate sup = capacity_lower_bound(ev, c.band, t, c.policies, mc);
        json policies = json::array();
        for (const auto& p : c.policies) policies.push_back(to_json(p));
        out["sup_lower_bound"] = sup.value;
        out["sup_metadata"] = {{"event", ev.to_string()},
                               {"argmax", sup.argmax},
                               {"per_policy", sup.per_policy},
                               {"policies", policies},
                               {"monte_carlo", to_json(*c.mc)}};
      }
      return {detail::dump(out), std::nullopt};
    }
    case Task::simulate: {
      const MonteCarloSpec& mc = *c.mc;
      const PathEnsemble ens = simulate(c.policies.front(), c.band, c.horizon, mc.n_paths,
                                        mc.n_steps, mc.seed, {}, workers);
      out["policy"] = to_json(c.policies.front());
      out["monte_carlo"] = to_json(mc);
      out["horizon"] = c.horizon;
      if (c.format == Format::csv) {
        std::ostringstream os;
        write_ensemble_csv(os, ens);
        return {os.str(), detail::dump(out)};
      }
      out["summary"] = ensemble_summary(ens);
      return {detail::dump(out), std::nullopt};
    }
    case Task::counterexample: {
      MonteCarloSpec mc = *c.mc;
      mc.workers = workers;
      out["report"] = to_json(run_qv_counterexample(c.band, c.horizon, mc));
      return {detail::dump(out), std::nullopt};
    }
  }
  return {};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open output file '" + path + "'");
  os << text;
  if (!os) throw IoError("failed writing output file '" + path + "'");
}

/// Executes and writes the output (file or `stdout_stream`). Throws gexp::Error.
inline void run(const RunConfig& c, std::ostream& stdout_stream, unsigned workers = 0) {
  const Output o = execute(c, workers);
  if (c.output_path.empty()) {
    stdout_stream << o.body;
    return;
  }
  write_text(c.output_path, o.body);
  if (o.metadata) write_text(c.output_path + ".meta.json", *o.metadata);
}

}  // namespace gexp::cli
