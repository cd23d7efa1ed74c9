// gexp: command-line front end for the G-expectation engines.
//
//   gexp --config run.json
//   gexp --task expect --band-low 0.5 --band-high 1 --t 1 --payoff "pow(x1,2)"
//
// Exit codes: 0 ok, 1 config, 2 payoff parse, 3 numerical, 4 precondition, 5 I/O.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "gexp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"G-expectation laboratory: G-heat PDE, cylinder functionals, scenario Monte Carlo"};
  std::string config_path;
  std::optional<std::string> task, payoff, out, format;
  std::optional<double> band_low, band_high, t;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run config");
  app.add_option("--task", task, "solve|expect|compare|capacity|simulate|counterexample");
  app.add_option("--band-low", band_low, "lower volatility sigma_low");
  app.add_option("--band-high", band_high, "upper volatility sigma_high");
  app.add_option("--t", t, "time horizon");
  app.add_option("--payoff", payoff, "payoff expression, e.g. \"min(x1, 0)\"");
  app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--out", out, "output path (default: stdout)");
  app.add_option("--format", format, "json|csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(gexp::ErrorClass::config);
  }

  try {
    gexp::json j = gexp::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw gexp::IoError("cannot open config file '" + config_path + "'");
      try {
        j = gexp::json::parse(in);
      } catch (const gexp::json::parse_error& e) {
        throw gexp::ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    } else if (!task) {
      throw gexp::ConfigError("either --config or --task is required");
    }
    if (!j.is_object()) throw gexp::ConfigError("config /: expected an object");
    if (task) j["task"] = *task;
    if (band_low) j["band"]["sigma_low"] = *band_low;
    if (band_high) j["band"]["sigma_high"] = *band_high;
    if (t) {
      j["t"] = *t;
      j["horizon"] = *t;
      j.erase("times");
    }
    if (payoff) j["payoff"] = *payoff;
    if (seed) j["mc"]["seed"] = *seed;
    if (out) j["output"]["path"] = *out;
    if (format) j["output"]["format"] = *format;

    const gexp::cli::RunConfig config = gexp::cli::parse_config(j);
    gexp::cli::run(config, std::cout);
    return 0;
  } catch (const gexp::Error& e) {
    std::cerr << "gexp: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "gexp: " << e.what() << '\n';
    return static_cast<int>(gexp::ErrorClass::numerical);
  }
}
