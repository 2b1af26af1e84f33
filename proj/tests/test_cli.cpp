#include <doctest.h>

#include "caloricflow/cli.hpp"
#include "caloricflow/experiments.hpp"
#include "caloricflow/field_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace caloricflow;
using namespace caloricflow::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("caloricflow_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_heat(const fs::path& out) {
  return {{"grid", {{"n", 16}, {"L", 4.0}, {"R_support", 1.5}}},
          {"flow", {{"s_max", 0.5}, {"tail_eps", 0.0}}},
          {"data", {{"recipe", "generic_bump"}}},
          {"output_dir", out.string()}};
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

}  // namespace

TEST_CASE("configuration defaults and round trip") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.schema_version == kSchemaVersion);
  CHECK(c.flow.s_max == 256);
  CHECK(c.data.name == "generic_moving");
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  // The recipe takes m and its radius from the top level.
  const ExperimentConfig d = ExperimentConfig::from_json({{"m", 3}, {"grid", {{"R_support", 0.9}}}});
  CHECK(d.recipe().m == 3);
  CHECK(d.recipe().radius == 0.9);
  CHECK(d.gauge_config().flow.s_max == d.flow.s_max);
}

TEST_CASE("schema violations are configuration errors") {
  auto rejects = [](const json& j) {
    CHECK_THROWS_AS(ExperimentConfig::from_json(j).validate(), ConfigError);
  };
  rejects({{"grid", {{"n", 100}}}});
  rejects({{"grid", {{"n", 64.5}}}});
  rejects({{"grid", {{"nn", 64}}}});
  rejects({{"bogus", 1}});
  rejects({{"schema_version", 2}});
  rejects({{"m", 0}});
  rejects({{"grid", {{"L", -1.0}}}});
  rejects({{"grid", {{"L", 2.0}, {"R_support", 1.5}}}});
  rejects({{"flow", {{"ds_factor", 0.3}}}});
  rejects({{"flow", {{"scheme", "implicit"}}}});
  rejects({{"wave", {{"dt_factor", 0.75}}}});
  rejects({{"wave", {{"duration", 0.0}}}});
  rejects({{"data", {{"recipe", "nonexistent"}}}});
  rejects({{"data", {{"sigma", 0.0}}}});
  rejects({{"converge", {{"resolutions", {32, 64}}}}});
  rejects({{"converge", {{"resolutions", {64, 32, 128}}}}});
  rejects({{"converge", {{"check", "unknown"}}}});
  rejects({{"experiment", "simulate"}});
  rejects({{"output_dir", ""}});
  rejects({{"seed", -1}});
  rejects({{"grid", 5}});
  rejects({{"energyspace", {{"translation", {1}}}}});
}

TEST_CASE("dotted overrides") {
  json j = json::object();
  apply_override(j, "grid.n", "256");
  apply_override(j, "data.recipe", "constant");
  apply_override(j, "gauge.require_tail", "false");
  apply_override(j, "converge.resolutions", "[16,32,64]");
  CHECK(j["grid"]["n"] == 256);
  CHECK(j["data"]["recipe"] == "constant");
  CHECK(j["gauge"]["require_tail"] == false);
  const ExperimentConfig c = ExperimentConfig::from_json(j);
  CHECK(c.grid.n == 256);
  CHECK(c.converge.resolutions == std::vector<int>{16, 32, 64});
  CHECK_THROWS_AS(apply_override(j, "", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "grid..n", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "grid.n.x", "1"), ConfigError);

  const fs::path dir = scratch("overrides");
  const fs::path cfg = write_config(dir, small_heat(dir / "out"));
  const std::vector<std::string> ov{"grid.n=32", "wave.duration=0.5"};
  const ExperimentConfig loaded = load_config(cfg, ov);
  CHECK(loaded.grid.n == 32);
  CHECK(loaded.wave.duration == 0.5);
  const std::vector<std::string> bad{"grid.n"};
  CHECK_THROWS_AS(load_config(cfg, bad), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("constant data: every check passes with zero residuals") {
  const fs::path dir = scratch("constant");
  json j = small_heat(dir / "out");
  j["data"]["recipe"] = "constant";
  j["flow"] = {{"s_max", 1.0}};
  j["wave"] = {{"duration", 0.25}};
  const ExperimentConfig c = load_config(write_config(dir, j));
  const RunReport r = cmd_verify_all(c);
  CHECK(r.all_pass());
  for (const Check& k : r.checks) {
    CHECK_FALSE(k.anchor.empty());
    const bool data_independent = k.name.rfind("inequalities.", 0) == 0 || k.name == "energyspace.quotient_alignment";
    if (!data_independent) CHECK_MESSAGE(k.value == 0.0, k.name);
  }
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path cfg = write_config(dir, small_heat(dir / "out"));
  const std::string path = cfg.string();
  std::string text;

  CHECK(run({"heatflow", "--config", path}, &text) == kAllPass);
  CHECK(text.find("[PASS] energy_monotone") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "heatflow.csv"));
  CHECK(fs::exists(dir / "out" / "heatflow_phi_final.bin"));

  // Check failure: the tail criterion cannot be met in s <= 0.5.
  CHECK(run({"heatflow", "--config", path, "--flow.tail_eps=1e-6"}) == kCheckFailed);
  const json report = json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report["all_pass"] == false);

  // Configuration errors.
  CHECK(run({"heatflow", "--config", path, "--grid.n=100"}) == kConfigError);
  CHECK(run({"heatflow", "--config", path, "--grid.bogus", "3"}) == kConfigError);
  CHECK(run({"heatflow", "--config", path, "--grid.n"}) == kConfigError);
  CHECK(run({"heatflow", "--config", (dir / "missing.json").string()}) == kConfigError);
  CHECK(run({"heatflow"}) == kConfigError);
  CHECK(run({"simulate", "--config", path}) == kConfigError);
  CHECK(run({}) == kConfigError);
  CHECK(run({"converge", "--config", path, "--converge.resolutions=[16,32]"}) == kConfigError);

  // Compute fault: the gauge requires the flow to reach its tail.
  CHECK(run({"gauge", "--config", path, "--flow.s_max=0.01"}, &text) == kComputeFault);
  CHECK(text.find("compute fault") != std::string::npos);

  // Space-separated override values work too.
  CHECK(run({"heatflow", "--config", path, "--grid.n", "32"}) == kAllPass);
  CHECK(json::parse(slurp(dir / "out" / "report.json"))["config"]["grid"]["n"] == 32);
}

TEST_CASE("artifacts are deterministic and readable") {
  const fs::path dir = scratch("determinism");
  const fs::path cfg = write_config(dir, small_heat(dir / "a"));
  REQUIRE(run({"heatflow", "--config", cfg.string()}) == kAllPass);
  REQUIRE(run({"heatflow", "--config", cfg.string(), "--output_dir=" + (dir / "b").string()}) == kAllPass);
  const std::string a = slurp(dir / "a" / "heatflow.csv"), b = slurp(dir / "b" / "heatflow.csv");
  CHECK(!a.empty());
  CHECK(a == b);
  CHECK(a.rfind("t,s,quantity,value\n,0,energy,", 0) == 0);
  CHECK(slurp(dir / "a" / "heatflow_phi_final.bin") == slurp(dir / "b" / "heatflow_phi_final.bin"));

  const io::StoredField f = io::read_field(dir / "a" / "heatflow_phi_final");
  CHECK(f.field.grid().n == 16);
  CHECK(f.field.components() == 3);

  const json report = json::parse(slurp(dir / "a" / "report.json"));
  CHECK(report["experiment"] == "heatflow");
  CHECK(report["config"]["schema_version"] == kSchemaVersion);
  CHECK(report.contains("timings_seconds"));
  for (const auto& row : report["checks"]) {
    CHECK_FALSE(row["anchor"].get<std::string>().empty());
    CHECK(row.contains("threshold"));
    CHECK(row.contains("pass"));
  }
  // No temporary files are left behind.
  for (const auto& entry : fs::directory_iterator(dir / "a"))
    CHECK(entry.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("CSV formatting") {
  const std::vector<CsvRow> rows{{0.5, {}, "energy", 1.25}, {{}, 0.125, "sup_grad", 2.0}};
  CHECK(csv_text(rows) == "t,s,quantity,value\n0.5,,energy,1.25\n,0.125,sup_grad,2\n");
}

TEST_CASE("refinement studies") {
  ExperimentConfig c;
  c.data.sigma = 0.5;
  SUBCASE("five-point Laplacian is second order") {
    const OrderTable t = convergence_table(c, "laplacian");
    REQUIRE(t.values.size() == 3);
    CHECK(t.order == doctest::Approx(2.0).epsilon(0.1));
    CHECK(t.pass);
    const RunReport r = cmd_convergence(c, "laplacian");
    REQUIRE(r.checks.size() == 1);
    CHECK(r.checks[0].pass);
    CHECK(r.tables["laplacian"]["rows"].size() == 3);
  }
  SUBCASE("identically zero residuals pass without an order") {
    c.data.name = "constant";
    c.converge.resolutions = {8, 16, 32};
    const OrderTable t = convergence_table(c, "comparison");
    CHECK(std::isnan(t.order));
    CHECK(t.pass);
  }
  SUBCASE("too few resolutions") {
    c.converge.resolutions = {16, 32};
    CHECK_THROWS_AS(convergence_table(c, "laplacian"), ConfigError);
    CHECK_THROWS_AS(convergence_table(ExperimentConfig{}, "unknown"), ConfigError);
  }
}
