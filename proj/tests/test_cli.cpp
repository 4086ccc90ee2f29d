#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include <sys/wait.h>
#include <unistd.h>

#include "pielab/harness.hpp"
#include "run_fixture.hpp"

using namespace pielab;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PIELAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const std::filesystem::path& dir, const nlohmann::json& j) {
  const auto file = dir / "config.json";
  std::ofstream(file) << j.dump(2);
  return file.string();
}

}  // namespace

TEST_CASE("CLI: full pipeline exits 0 and writes the bundle") {
  testing::TempDir tmp("cli");
  const auto config = write_config(tmp.path(), harness::config_to_json(testing::tiny_config()));
  const auto run = (tmp.path() / "run").string();
  CHECK(run_cli("gen-corpus --config " + config + " --out " + (tmp.path() / "corpus").string()) == 0);
  CHECK(std::filesystem::exists(tmp.path() / "corpus" / "manifest.json"));
  CHECK(run_cli("train --config " + config + " --out " + run) == 0);
  CHECK(run_cli("prune-exp --config " + config + " --out " + run + " --jobs 2") == 0);
  CHECK(run_cli("pies " + run) == 0);
  CHECK(run_cli("influence " + run + " --bins 10") == 0);
  CHECK(run_cli("readability --easy-words " + (tmp.path() / "absent.txt").string() + " " + run) == 3);
  CHECK(run_cli("readability " + run) == 0);
  CHECK(run_cli("report " + run) == 0);
  for (const char* f : {"summary.csv", "pie_occurrence.csv", "influence_bins.csv", "readability_ratios.csv",
                        "pie_fraction.svg", "influence_bins.svg", "readability_ratios.svg"})
    CHECK(std::filesystem::exists(tmp.path() / "run" / "report" / f));
}

TEST_CASE("CLI: exit codes") {
  testing::TempDir tmp("cli_codes");
  auto j = harness::config_to_json(testing::tiny_config());
  j["thresholdz"] = j["thresholds"];
  const auto bad = write_config(tmp.path(), j);
  CHECK(run_cli("prune-exp --config " + bad + " --out " + (tmp.path() / "r").string()) == 2);
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("train") == 2);
  CHECK(run_cli("train --config " + (tmp.path() / "absent.json").string()) == 3);
  CHECK(run_cli("pies " + (tmp.path() / "absent").string()) == 3);
  CHECK(run_cli("report " + (tmp.path() / "absent").string()) == 3);
  CHECK(run_cli("prune-exp --jobs 0 --config " + bad) == 2);

  auto rewind = harness::config_to_json(testing::tiny_config());
  rewind["pruners"] = nlohmann::json::array({{{"scoring", "random"}, {"schedule", "iterative"}, {"tuning", "rewind"}}});
  std::filesystem::create_directories(tmp.path() / "rw");
  const auto rw = write_config(tmp.path() / "rw", rewind);
  CHECK(run_cli("prune-exp --config " + rw + " --out " + (tmp.path() / "r2").string()) == 2);
  CHECK_FALSE(std::filesystem::exists(tmp.path() / "r2"));
}
