#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gexp/cli.hpp"

using namespace gexp;
using gexp::cli::parse_config;

namespace {

namespace fs = std::filesystem;

json base_expect() {
  return json::parse(R"j({"task": "expect", "band": {"sigma_low": 0.5, "sigma_high": 1.0},
                         "payoff": "pow(x1,2)", "t": 1.0})j");
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("gexp_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int run_binary(const std::string& args, const fs::path& stdout_path) {
  const std::string cmd = std::string(GEXP_BINARY) + " " + args + " > " + stdout_path.string() +
                          " 2> " + stdout_path.string() + ".err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string execute(const json& j, unsigned workers = 0) {
  return cli::execute(parse_config(j), workers).body;
}

}  // namespace

TEST(ParseConfig, ErrorsNameTheField) {
  json j = base_expect();
  j["band"]["sigma_low"] = "half";
  EXPECT_NE(config_error(j).find("/band/sigma_low"), std::string::npos);

  j = base_expect();
  j["band"]["sigma_low"] = 2.0;
  EXPECT_NE(config_error(j).find("/band"), std::string::npos);

  j = base_expect();
  j.erase("payoff");
  EXPECT_NE(config_error(j).find("/payoff"), std::string::npos);

  j = base_expect();
  j["task"] = "integrate";
  EXPECT_NE(config_error(j).find("/task"), std::string::npos);

  j = base_expect();
  j["task"] = "simulate";
  j["policies"] = json::array({{{"kind", "constant"}, {"sigma", 1.0}}});
  EXPECT_NE(config_error(j).find("/mc"), std::string::npos);

  j["mc"] = {{"n_paths", 10}};
  EXPECT_NE(config_error(j).find("/mc/seed"), std::string::npos);

  j = base_expect();
  j["policies"] = json::array({{{"kind", "wild"}}});
  EXPECT_NE(config_error(j).find("/policies/0/kind"), std::string::npos);

  j = base_expect();
  j["output"] = {{"format", "csv"}};
  EXPECT_NE(config_error(j).find("/output"), std::string::npos);
}

TEST(ParseConfig, Defaults) {
  const auto c = parse_config(base_expect());
  EXPECT_EQ(c.task, cli::Task::expect);
  EXPECT_EQ(c.format, cli::Format::json);
  EXPECT_EQ(c.times, std::vector<double>{1.0});
  json s = base_expect();
  s["task"] = "solve";
  EXPECT_EQ(parse_config(s).format, cli::Format::csv);
}

TEST(Execute, ExpectSecondMoment) {
  const json out = json::parse(execute(base_expect()));
  EXPECT_EQ(out["schema_version"], 1);
  EXPECT_EQ(out["task"], "expect");
  EXPECT_NEAR(out["value"].get<double>(), 1.0, 5e-3);
  json neg = base_expect();
  neg["payoff"] = "-pow(x1,2)";
  EXPECT_NEAR(-json::parse(execute(neg))["value"].get<double>(), 0.25, 5e-3);
}

TEST(Execute, MalformedPayoffIsParseError) {
  json j = base_expect();
  j["payoff"] = "min(x1,";
  try {
    execute(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Execute, CompareVerdictHasExactlyFiveFields) {
  const json j = json::parse(R"j({"task": "compare", "band": {"sigma_low": 0.5, "sigma_high": 1},
      "payoff_lo": "min(x1,0) + min(x2,0)", "payoff_hi": "0", "times": [0.5, 1.0],
      "grid": {"nodes": 101}})j");
  const json out = json::parse(execute(j));
  const json& v = out["verdict"];
  ASSERT_EQ(v.size(), 5u);
  for (const char* key : {"value_lo", "value_hi", "gap", "tolerance", "verdict"})
    EXPECT_TRUE(v.contains(key)) << key;
  EXPECT_EQ(v["verdict"], "StrictLess");
}

TEST(Execute, SolveCsvSchema) {
  json j = base_expect();
  j["task"] = "solve";
  j["grid"] = {{"n_space", 21}};
  const auto o = cli::execute(parse_config(j));
  EXPECT_EQ(o.body.rfind("t,x,u\n", 0), 0u);
  ASSERT_TRUE(o.metadata.has_value());
  const json meta = json::parse(*o.metadata);
  EXPECT_EQ(meta["grid"]["n_space"], 21);
  // Header, then 21 rows for each of the t = 0 and t = 1 snapshots.
  EXPECT_EQ(std::count(o.body.begin(), o.body.end(), '\n'), 43);
}

TEST(Execute, SimulateCsvSchema) {
  const json j = json::parse(R"j({"task": "simulate", "band": {"sigma_low": 0.5, "sigma_high": 1},
      "policies": [{"kind": "constant", "sigma": 0.5}], "horizon": 1,
      "mc": {"n_paths": 4, "n_steps": 10, "seed": 1}, "output": {"format": "csv"}})j");
  const auto o = cli::execute(parse_config(j));
  EXPECT_EQ(o.body.rfind("path,B_T,qv_T\n", 0), 0u);
  EXPECT_NE(o.body.find(",0.25\n"), std::string::npos);
}

TEST(Execute, SeededOutputsAreByteIdentical) {
  const json j = json::parse(R"j({"task": "capacity", "band": {"sigma_low": 0.5, "sigma_high": 1},
      "t": 1, "interval": {"a": -1, "b": 1, "epsilon": 0.1}, "event": "abs(x1) <= 1",
      "policies": [{"kind": "constant", "sigma": 0.5},
                   {"kind": "feedback_bangbang", "predicate": "abs(x2) > 0.5"}],
      "mc": {"n_paths": 500, "n_steps": 20, "seed": 3}})j");
  const std::string first = execute(j, 1);
  EXPECT_EQ(first, execute(j, 1));
  EXPECT_EQ(first, execute(j, 4));
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch_dir();
  const fs::path out = dir / "stdout.txt";
  EXPECT_EQ(run_binary("--task expect --band-low 0.5 --band-high 1 --t 1 --payoff 'pow(x1,2)'", out), 0);
  EXPECT_NEAR(json::parse(read_file(out))["value"].get<double>(), 1.0, 5e-3);

  EXPECT_EQ(run_binary("--task expect --band-low 0.5 --band-high 1 --t 1 --payoff 'min(x1,'", out), 2);
  EXPECT_EQ(run_binary("--task expect --band-low 2 --band-high 1 --t 1 --payoff 'x1'", out), 1);
  EXPECT_EQ(run_binary("--config " + (dir / "missing.json").string(), out), 5);
  EXPECT_EQ(run_binary("--task expect --band-low 0.5 --band-high 1 --t 1 --payoff 'x1' --out " +
                           (dir / "no_such_dir" / "x.json").string(),
                       out),
            5);
  {
    std::ofstream cfg(dir / "pre.json");
    cfg << R"j({"task": "compare", "band": {"sigma_low": 0.5, "sigma_high": 1},
               "payoff_lo": "1", "payoff_hi": "0", "t": 1})j";
  }
  EXPECT_EQ(run_binary("--config " + (dir / "pre.json").string(), out), 4);
  {
    std::ofstream cfg(dir / "num.json");
    cfg << R"j({"task": "expect", "band": {"sigma_low": 0.5, "sigma_high": 1},
               "payoff": "exp(pow(x1, 1000))", "t": 1})j";
  }
  EXPECT_EQ(run_binary("--config " + (dir / "num.json").string(), out), 3);
  fs::remove_all(dir);
}

TEST(Binary, CsvOutputWritesSidecar) {
  const fs::path dir = scratch_dir();
  const fs::path csv = dir / "u.csv";
  EXPECT_EQ(run_binary("--task solve --band-low 0.5 --band-high 1 --t 1 --payoff 'min(x1,0)' --out " +
                           csv.string(),
                       dir / "stdout.txt"),
            0);
  EXPECT_EQ(read_file(csv).rfind("t,x,u\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "u.csv.meta.json"));
  fs::remove_all(dir);
}

TEST(Binary, SamplesRunDeterministically) {
  const fs::path dir = scratch_dir();
  for (const auto& entry : fs::directory_iterator(GEXP_SAMPLES_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const std::string args = "--config " + entry.path().string();
    ASSERT_EQ(run_binary(args, dir / "a.txt"), 0) << entry.path();
    ASSERT_EQ(run_binary(args, dir / "b.txt"), 0) << entry.path();
    EXPECT_EQ(read_file(dir / "a.txt"), read_file(dir / "b.txt")) << entry.path();
  }
  fs::remove_all(dir);
}
