#include "doctest.h"
#include "helpers.hpp"

#include "condsub/cli.hpp"
#include "condsub/parallel.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>

using namespace condsub;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "condsub");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  const int rc = cli::run(static_cast<int>(argv.size()), argv.data());
  set_jobs(1);
  return rc;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto p = text.find(what); p != std::string::npos; p = text.find(what, p + 1)) ++n;
  return n;
}

const std::string kLinear =
    "[run]\nseed = 5\n[data]\ngenerate = linear\nrows = 400\n[model]\ntype = truth\n"
    "[analysis]\nfeatures = x1, x2\nrepetitions = 2\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config errors carry line numbers") {
    try {
      cli::Config::parse("[run]\nseed = 1\n[bogus]\n", ".");
      FAIL("accepted unknown section");
    } catch (const cli::ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(cli::Config::parse("[run]\nsed = 1\n", "."), cli::ConfigError);
    CHECK_THROWS_AS(cli::Config::parse("[run]\nseed = 1\nseed = 2\n", "."), cli::ConfigError);
    CHECK_THROWS_AS(cli::settings_from(cli::Config::parse("[partition]\nmax_depth = -1\n", ".")), cli::ConfigError);
    CHECK_THROWS_AS(cli::settings_from(cli::Config::parse("[fidelity]\nsamplers = none, cs\n x\n", ".")),
                    cli::ConfigError);
    try {
      cli::settings_from(cli::Config::parse("# c\n[fidelity]\nsamplers = none, knockoff\n", "."));
      FAIL("accepted unknown sampler");
    } catch (const cli::ConfigError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("relative paths resolve against the config directory") {
    const auto c = cli::Config::parse("[data]\npath = sub/d.csv\ntarget = y\n", "/base/dir");
    const auto s = cli::settings_from(c);
    REQUIRE(s.data.path);
    CHECK(fs::path(*s.data.path) == fs::path("/base/dir/sub/d.csv"));
    CHECK(c.hash() == cli::fnv1a("[data]\npath = sub/d.csv\ntarget = y\n"));
  }

  TEST_CASE("exit codes") {
    const auto dir = testing::scratch_dir("cli_exit");
    CHECK(run_cli({"importance"}) == 2);
    CHECK(run_cli({"--config", write_config(dir, "[bogus]\n").string(), "importance"}) == 2);
    CHECK(run_cli({"--config", write_config(dir, "[data]\npath = missing.csv\ntarget = y\n").string(),
                   "--out", (dir / "o").string(), "importance"}) == 3);
    const std::string bridge = "[data]\ngenerate = linear\nrows = 200\n[model]\ntype = external\ncommand = python3 " +
                               testing::stub("short_reply.py") + "\n[analysis]\nfeatures = x1\nrepetitions = 1\n";
    CHECK(run_cli({"--config", write_config(dir, bridge).string(), "--out", (dir / "o").string(), "importance"}) == 4);
    CHECK(run_cli({"--version"}) == 0);
    CHECK(run_cli({"--jobs", "0", "simulate"}) == 2);
  }

  TEST_CASE("dry run writes nothing") {
    const auto dir = testing::scratch_dir("cli_dry");
    CHECK(run_cli({"--config", write_config(dir, kLinear).string(), "--out", (dir / "o").string(), "--dry-run",
                   "importance"}) == 0);
    CHECK_FALSE(fs::exists(dir / "o" / "importance.json"));
  }

  TEST_CASE("importance at depth 0 and depth 2") {
    const auto dir = testing::scratch_dir("cli_importance");
    const auto cfg = write_config(dir, kLinear + "[partition]\nmax_depth = 0\n");
    REQUIRE(run_cli({"--config", cfg.string(), "--out", (dir / "d0").string(), "importance"}) == 0);
    const auto j0 = nlohmann::json::parse(testing::slurp(dir / "d0" / "importance.json"));
    CHECK(j0["provenance"]["seed"] == 5);
    for (const auto& f : j0["features"]) CHECK(f["aggregate_cs_pfi"] == f["marginal_pfi"]);
    const std::string csv = testing::slurp(dir / "d0" / "importance.csv");
    CHECK(csv.rfind("# condsub 0.1.0 command=importance config=", 0) == 0);

    const auto cfg2 = write_config(dir, kLinear + "[partition]\nmax_depth = 2\n");
    REQUIRE(run_cli({"--config", cfg2.string(), "--out", (dir / "d2").string(), "importance"}) == 0);
    const auto j2 = nlohmann::json::parse(testing::slurp(dir / "d2" / "importance.json"));
    for (const auto& f : j2["features"]) CHECK(f["groups"].size() <= 4);

    // same seed, same bytes
    REQUIRE(run_cli({"--config", cfg2.string(), "--out", (dir / "again").string(), "--jobs", "3", "importance"}) == 0);
    CHECK(testing::slurp(dir / "d2" / "importance.json") == testing::slurp(dir / "again" / "importance.json"));
    CHECK(testing::slurp(dir / "d2" / "importance.csv") == testing::slurp(dir / "again" / "importance.csv"));
  }

  TEST_CASE("effects plots one curve per group") {
    const auto dir = testing::scratch_dir("cli_effects");
    REQUIRE(run_cli({"--config", write_config(dir, kLinear + "[partition]\nmax_depth = 0\n").string(), "--out",
                     (dir / "d0").string(), "effects"}) == 0);
    CHECK(count(testing::slurp(dir / "d0" / "effects_x1.svg"), "<polyline") == 1);

    REQUIRE(run_cli({"--config",
                     write_config(dir, kLinear + "[partition]\nmax_depth = 2\nmin_node_size = 20\n").string(), "--out",
                     (dir / "d2").string(), "effects"}) == 0);
    const std::string svg = testing::slurp(dir / "d2" / "effects_x1.svg");
    const auto meta = nlohmann::json::parse(testing::slurp(dir / "d2" / "effects_x1.json"));
    const auto groups = meta["groups"];
    CHECK(groups.size() == 4);
    CHECK(count(svg, "<polyline") == groups.size());
    for (const auto& g : groups) {
      std::string rule = g["rule"];
      for (auto p = rule.find('<'); p != std::string::npos; p = rule.find('<', p)) rule.replace(p, 1, "&lt;"), p += 4;
      for (auto p = rule.find('>'); p != std::string::npos; p = rule.find('>', p)) rule.replace(p, 1, "&gt;"), p += 4;
      CHECK(svg.find(rule) != std::string::npos);
    }
    CHECK(fs::exists(dir / "d2" / "effects_x1.csv"));
  }

  TEST_CASE("fidelity and dependence reports") {
    const auto dir = testing::scratch_dir("cli_reports");
    const std::string cfg =
        "[run]\nseed = 2\n[data]\ngenerate = dependent\nrows = 500\ncolumns = 8\n"
        "[fidelity]\nsamplers = none, perm, cs2\nn_features = 2\nrepetitions = 2\n[dependence]\ntrees = 20\n";
    const auto p = write_config(dir, cfg);
    REQUIRE(run_cli({"--config", p.string(), "--out", (dir / "o").string(), "fidelity"}) == 0);
    const std::string summary = testing::slurp(dir / "o" / "fidelity_summary.csv");
    auto mean_of = [&](const std::string& name) {
      const auto at = summary.find("\n" + name + ",");
      REQUIRE(at != std::string::npos);
      return std::stod(summary.substr(at + name.size() + 2));
    };
    CHECK(mean_of("none") > mean_of("perm"));
    CHECK(mean_of("cs2") > mean_of("perm"));

    const std::string exact =
        "[run]\nseed = 2\n[data]\ngenerate = linear\nrows = 400\n[dependence]\ntrees = 30\n";
    REQUIRE(run_cli({"--config", write_config(dir, exact).string(), "--out", (dir / "dep").string(), "dependence"}) ==
            0);
    const std::string dep = testing::slurp(dir / "dep" / "dependence.csv");
    CHECK(dep.find("x1,") != std::string::npos);
    CHECK(dep.find("y,") == std::string::npos);
  }
}
