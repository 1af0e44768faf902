#include "doctest.h"

#include "support.hpp"

#include "kaleido/cli.hpp"
#include "kaleido/io.hpp"
#include "kaleido/metrics.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>

using namespace kaleido;
using namespace kaleido::test;

namespace {

namespace fs = std::filesystem;

/// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;

  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("kaleido_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  std::string operator()(const std::string& file) const { return (dir / file).string(); }
};

/// Runs the command line tool and returns its exit status; stderr is discarded.
int run_cli(const std::string& args) {
  const std::string command = std::string("\"") + KALEIDO_CLI + "\" " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::size_t count_lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

/// True when some mirror permutation maps every assigned label onto the synthesized one.
bool labels_match(const Json& assigned, const Json& synthesized, std::size_t num_mirrors) {
  std::map<std::size_t, ReflectionSequence> truth;
  for (const auto& o : synthesized["observations"]) {
    if (o.contains("candidate")) {
      truth[o["candidate"].get<std::size_t>()] =
          ReflectionSequence::parse(o["label"].get<std::string>(), num_mirrors);
    }
  }
  if (assigned["labels"].size() != truth.size()) {
    return false;
  }
  std::vector<int> perm(num_mirrors);
  std::iota(perm.begin(), perm.end(), 1);
  do {
    bool all = true;
    for (const auto& [id, label] : assigned["labels"].items()) {
      const auto seq = ReflectionSequence::parse(label.get<std::string>(), num_mirrors);
      const auto it = truth.find(std::stoul(id));
      all = all && it != truth.end() && relabel(seq, perm) == it->second;
    }
    if (all) {
      return true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace

TEST_CASE("synth, assign, calibrate and ba chain through files") {
  for (const auto& [name, mirrors] : {std::pair{"two-mirror-order3", 2}, std::pair{"three-mirror-order2", 3}}) {
    CAPTURE(name);
    const Scratch tmp(name);
    const std::string config = "--config " + fixture_path(name);
    REQUIRE(run_cli("synth " + config + " --num-points 4 --labels " + tmp("labels.json") + " --out " +
                    tmp("points.csv")) == 0);
    REQUIRE(run_cli("assign " + config + " --points " + tmp("points.csv") + " --out " + tmp("assign.json")) == 0);
    const Json labels = parse_json(read_file(tmp("labels.json")));
    const Json assigned = parse_json(read_file(tmp("assign.json")));
    CHECK(assigned["recall"] == 1.0);
    CHECK(labels_match(assigned, labels, mirrors));

    REQUIRE(run_cli("calibrate " + config + " --observations " + tmp("labels.json") + " --out " +
                    tmp("linear.json")) == 0);
    const Json linear = parse_json(read_file(tmp("linear.json")));
    CHECK(linear["e_rep"].get<double>() < 1e-6);
    CHECK(linear["reference_E_n"].get<double>() < 1e-8);
    CHECK(linear["mirrors"].size() == static_cast<std::size_t>(mirrors));

    REQUIRE(run_cli("ba " + config + " --observations " + tmp("labels.json") + " --init " + tmp("linear.json") +
                    " --out " + tmp("ba.json")) == 0);
    const Json ba = parse_json(read_file(tmp("ba.json")));
    CHECK(ba["e_rep"].get<double>() < 1e-6);
    CHECK(ba["final_cost"].get<double>() <= ba["initial_cost"].get<double>());
    CHECK(ba.contains("n_iter"));
  }
}

TEST_CASE("noisy observations through bundle adjustment") {
  const Scratch tmp("noisy");
  const std::string config = "--config " + fixture_path("three-mirror-order2");
  REQUIRE(run_cli("synth " + config + " --num-points 5 --sigma 1 --seed 3 --labels " + tmp("labels.json") +
                  " --out " + tmp("points.csv")) == 0);
  REQUIRE(run_cli("ba " + config + " --observations " + tmp("labels.json") + " --out " + tmp("ba.json")) == 0);
  const Json ba = parse_json(read_file(tmp("ba.json")));
  const auto history = ba["cost_history"].get<std::vector<double>>();
  REQUIRE(!history.empty());
  for (std::size_t k = 1; k < history.size(); ++k) {
    CHECK(history[k] <= history[k - 1]);
  }
  CHECK(ba["e_rep"].get<double>() > 0.1);
  CHECK(ba["e_rep"].get<double>() < 3.0);
  CHECK(ba["mirrors"][0]["distance"] == 1.0);
}

TEST_CASE("sweep and pruning statistics") {
  const Scratch tmp("sweep");
  REQUIRE(run_cli("sweep --scenario three-mirror-order2 --sigma 0,0.5,1,2 --trials 2 --out " + tmp("sweep.csv")) ==
          0);
  CHECK(count_lines(read_file(tmp("sweep.csv"))) == 1 + 4 * 7);
  REQUIRE(run_cli("sweep --scenario two-mirror-order3 --num-points 1,3 --trials 2 --methods proposed-linear --out " +
                  tmp("points.csv")) == 0);
  CHECK(count_lines(read_file(tmp("points.csv"))) == 1 + 2);

  REQUIRE(run_cli("prune-stats --scenario three-mirror-order2 --trials 2 --format json --out " + tmp("prune.json")) ==
          0);
  const Json prune = parse_json(read_file(tmp("prune.json")));
  CHECK(prune.dump().find("151200") != std::string::npos);
}

TEST_CASE("repeated runs are byte-identical") {
  const Scratch tmp("repeat");
  const std::string config = "--config " + fixture_path("three-mirror-order2");
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    REQUIRE(run_cli("synth " + config + " --num-points 3 --sigma 0.5 --labels " + tmp(r + "_labels.json") +
                    " --out " + tmp(r + "_points.csv")) == 0);
    REQUIRE(run_cli("assign " + config + " --sigma 0.5 --points " + tmp("a_points.csv") + " --out " +
                    tmp(r + "_assign.json")) == 0);
    REQUIRE(run_cli("sweep " + config + " --sigma 1 --trials 2 --threads 2 --out " + tmp(r + "_sweep.csv")) == 0);
  }
  for (const char* file : {"_labels.json", "_points.csv", "_assign.json", "_sweep.csv"}) {
    CAPTURE(file);
    CHECK(read_file(tmp(std::string("a") + file)) == read_file(tmp(std::string("b") + file)));
  }
}

TEST_CASE("exit codes") {
  const Scratch tmp("exit");
  CHECK(run_cli("--help > /dev/null") == kExitSuccess);
  CHECK(run_cli("synth --no-such-flag") == kExitInvalidInput);
  CHECK(run_cli("") == kExitInvalidInput);
  CHECK(run_cli("synth --config " + tmp("missing.json")) == kExitInvalidInput);
  CHECK(run_cli("synth --scenario nowhere") == kExitInvalidInput);
  CHECK(run_cli("sweep --scenario three-mirror-order2 --sigma -1") == kExitInvalidInput);

  // Three isolated candidates cannot form a base structure.
  write_file(tmp("few.csv"), "id,u,v\n0,100,100\n1,500,300\n2,900,1000\n");
  CHECK(run_cli("assign --config " + fixture_path("three-mirror-order2") + " --points " + tmp("few.csv")) ==
        kExitNoSolution);
  write_file(tmp("bad.csv"), "id,u,v\n0,100\n");
  CHECK(run_cli("assign --config " + fixture_path("three-mirror-order2") + " --points " + tmp("bad.csv")) ==
        kExitInvalidInput);
}

TEST_CASE("cli_main writes to the given stream") {
  std::ostringstream out;
  std::ostringstream err;
  const char* argv[] = {"kaleido", "synth", "--scenario", "two-mirror-order3"};
  CHECK(cli_main(4, argv, out, err) == kExitSuccess);
  CHECK(out.str().rfind("id,u,v\n", 0) == 0);
  CHECK(count_lines(out.str()) == 1 + 7);
}
