// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "kaleido/baselines.hpp"
#include "kaleido/calibration.hpp"
#include "kaleido/chamber.hpp"
#include "kaleido/errors.hpp"
#include "kaleido/experiments.hpp"
#include "kaleido/io.hpp"
#include "kaleido/metrics.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

using namespace kaleido;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Scenario fixture(const std::string& name) {
  return scene_from_json(parse_json(read_file(std::string(KALEIDO_FIXTURE_DIR) + "/" + name + ".json"))).scenario;
}

double angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), std::abs(a.dot(b))); }

double to_degrees(double radians) { return radians * 180.0 / std::numbers::pi; }

AssignmentOptions options_for(const Scenario& scenario) {
  AssignmentOptions options;
  options.camera = scenario.config.camera;
  options.num_mirrors = scenario.config.num_mirrors();
  options.max_order = scenario.config.max_order;
  return options;
}

/// Candidates of point 0 and their true labels.
std::pair<std::vector<Pixel2>, std::vector<ReflectionSequence>> candidates_of(const SyntheticScene& scene) {
  std::pair<std::vector<Pixel2>, std::vector<ReflectionSequence>> out;
  for (const auto& o : scene.visible_observations(0)) {
    out.first.push_back(o.pixel);
    out.second.push_back(o.label);
  }
  return out;
}

void noiseless_assignment(Outcome& out) {
  double runtime = 0.0;
  std::size_t scenes = 0;
  for (const char* name : {"two-mirror-order3", "three-mirror-order2"}) {
    const auto scenario = fixture(name);
    Rng rng(1);
    std::vector<Point3> points{scenario.nominal_point};
    for (const auto& p : sample_points(scenario, 9, rng)) {
      points.push_back(p);
    }
    for (std::size_t k = 0; k < points.size(); ++k, ++scenes) {
      const auto [pixels, truth] = candidates_of(synthesize_projections(scenario.config, {points[k]}));
      const auto start = std::chrono::steady_clock::now();
      const auto result = assign_chambers(pixels, options_for(scenario));
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (scenario.config.num_mirrors() == 3) {
        runtime = std::max(runtime, seconds);
      }
      const auto perm = align_mirrors(result.mirrors, scenario.config.mirrors);
      const auto em = metric_Em(result.labels, truth, scenario.config.max_order, perm);
      const bool perfect = std::all_of(em.accuracy.begin(), em.accuracy.end(), [](double a) { return a == 1.0; });
      out.require(perfect, std::string(name) + " point " + std::to_string(k) + " E_m < 1");
    }
  }
  out.require(runtime < 60.0, "three-mirror runtime");
  out.detail << scenes << " scenes, E_m = 1 at every order; three-mirror single-threaded max " << runtime << " s";
}

void noiseless_calibration(Outcome& out) {
  double e_n = 0.0;
  double e_d = 0.0;
  double e_rep = 0.0;
  std::size_t scenes = 0;
  for (const char* name : {"two-mirror-order3", "three-mirror-order2"}) {
    const auto scenario = fixture(name);
    for (std::size_t n = 1; n <= 5; ++n) {
      for (std::uint64_t seed = 0; seed < 10; ++seed, ++scenes) {
        const auto scene = make_calibration_scene(scenario, n, 0.0, 100 * n + seed);
        const auto& camera = scenario.config.camera;
        const auto estimate = calibrate_linear(camera, scenario.config.num_mirrors(), scene.observations);
        e_n = std::max(e_n, metric_En(estimate.mirrors, scenario.config.mirrors));
        e_d = std::max(e_d, metric_Ed(estimate.mirrors, scenario.config.mirrors));
        e_rep = std::max(e_rep, metric_Erep(camera, estimate, scene.observations));
      }
    }
  }
  out.require(e_n < 1e-8, "E_n");
  out.require(e_d < 1e-8, "E_d");
  out.require(e_rep < 1e-6, "E_rep");
  out.detail << scenes << " scenes; max E_n " << e_n << " rad, max E_d " << e_d << ", max E_rep " << e_rep << " px";
}

void pruning_envelope(Outcome& out) {
  const auto scenario = fixture("three-mirror-order2");
  const auto trials = run_prune_stats(scenario, 50, 0.0, scenario.config.seed, 1);
  double kpc = 0.0;
  double prop1 = 0.0;
  double joint = 0.0;
  std::size_t kept = 0;
  for (const auto& t : trials) {
    const auto total = static_cast<double>(t.counts.total);
    out.require(t.counts.total == 151200, "total of trial " + std::to_string(t.trial));
    kpc = std::max(kpc, t.counts.kpc / total);
    prop1 = std::max(prop1, t.counts.prop1 / total);
    joint = std::max(joint, t.counts.joint / total);
    kept += t.true_survivors > 0;
  }
  out.require(kpc <= 0.05, "KPC survivors");
  out.require(prop1 <= 0.20, "base-closest survivors");
  out.require(joint <= 0.01, "base-closest and facing survivors");
  out.require(kept == trials.size(), "true structure survival");
  out.detail << trials.size() << " trials of 151200 hypotheses; worst survivor shares: KPC " << 100 * kpc
             << "%, base-closest " << 100 * prop1 << "%, joint " << 100 * joint << "%; true structure kept in " << kept
             << "/" << trials.size();
}

void noise_robustness(Outcome& out) {
  const char* separator = "";
  for (const char* name : {"two-mirror-order3", "three-mirror-order2"}) {
    ExperimentSpec spec;
    spec.scenario = fixture(name);
    spec.methods = {Method::ProposedBA};
    spec.values = {1.0};
    spec.num_points = 5;
    spec.trials = 100;
    spec.seed = spec.scenario.config.seed;
    const auto report = run_sweep(spec);
    const auto& row = report.rows.at(0);
    bool monotone = true;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& t : report.trials) {
      monotone = monotone && t.success && t.cost_monotone;
      if (t.success) {
        lo = std::min(lo, t.e_rep);
        hi = std::max(hi, t.e_rep);
      }
    }
    out.require(row.successes == 100, std::string(name) + " failed trials");
    out.require(row.e_rep >= 0.3 && row.e_rep <= 3.0, std::string(name) + " mean E_rep");
    out.require(monotone, std::string(name) + " cost monotonicity");
    out.detail << separator << name << ": mean post-BA E_rep " << row.e_rep << " px (trials " << lo << " to " << hi
               << "), cost non-increasing in " << (monotone ? "all" : "not all") << " trials";
    separator = "; ";
  }
}

void method_agreement(Outcome& out) {
  const auto scenario = fixture("three-mirror-order2");
  const auto& camera = scenario.config.camera;
  constexpr int kTrials = 20;
  double worst = 0.0;
  int failures = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    try {
      const auto board = make_board_scene(scenario, 5, 1.0, 1000 + trial);
      const auto& obs = board.scene.observations;
      const auto chambers = estimate_pose(camera, board.reference);
      const std::vector<CalibrationEstimate> refined{
          kaleidoscopic_bundle_adjustment(camera, calibrate_linear(camera, 3, obs), obs).estimate,
          kaleidoscopic_bundle_adjustment(camera, baseline_calibrate(chambers), obs).estimate,
          kaleidoscopic_bundle_adjustment(camera, orthogonality_calibrate(chambers), obs).estimate};
      for (std::size_t a = 0; a < refined.size(); ++a) {
        for (std::size_t b = a + 1; b < refined.size(); ++b) {
          for (std::size_t i = 0; i < 3; ++i) {
            worst = std::max(worst, angle(refined[a].mirrors[i].normal(), refined[b].mirrors[i].normal()));
          }
        }
      }
    } catch (const Error& e) {
      ++failures;
      out.detail << "trial " << trial << ": " << e.what() << "; ";
    }
  }
  out.require(failures == 0, "calibration errors");
  out.require(to_degrees(worst) <= 0.5, "normal disagreement");
  out.detail << kTrials << " board scenes at sigma 1, 5 landmarks; worst pairwise normal difference after BA "
             << to_degrees(worst) << " deg";
}

void property_suite(Outcome& out) {
  Rng rng(77);
  const auto scenario = fixture("three-mirror-order2");
  const auto& camera = scenario.config.camera;
  const auto& mirrors = scenario.config.mirrors;

  double householder = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const auto s = make_reflection(n, rng.uniform(1.0, 100.0));
    householder = std::max({householder, (s.linear * s.linear - Mat3::Identity()).norm(), (s.linear * n + n).norm(),
                            std::abs(s.linear.determinant() + 1.0)});
  }
  out.require(householder < 1e-12, "Householder involution and spectrum");

  const auto points = sample_points(scenario, 3, rng);
  const auto obs = labeled_projections(synthesize_projections(scenario.config, points));
  double kpc = 0.0;
  for (int m = 1; m <= 3; ++m) {
    const Eigen::MatrixXd rows = kpc_system(camera, obs, m);
    kpc = std::max(kpc, (rows * mirrors[m - 1].normal()).cwiseAbs().maxCoeff() / rows.norm());
  }
  out.require(kpc < 1e-10, "KPC exactness");

  Scenario big = scenario;
  for (auto& m : big.config.mirrors) {
    m = Mirror(m.normal(), 4.0 * m.distance());
  }
  std::vector<Point3> big_points;
  for (const auto& p : points) {
    big_points.push_back(4.0 * p);
  }
  const auto a = calibrate_linear(camera, 3, obs);
  const auto b = calibrate_linear(camera, 3, labeled_projections(synthesize_projections(big.config, big_points)));
  double gauge = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    gauge = std::max({gauge, (a.mirrors[i].normal() - b.mirrors[i].normal()).norm(),
                      std::abs(a.mirrors[i].distance() - b.mirrors[i].distance())});
  }
  out.require(gauge < 1e-8, "gauge invariance");

  std::vector<Vec3> normals;
  for (const auto& m : mirrors) {
    normals.push_back(m.normal());
  }
  const auto one = labeled_projections(synthesize_projections(scenario.config, {points[0]}));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(distance_system(camera, normals, one));
  lu.setThreshold(1e-10);
  out.require(lu.rank() <= 10 && lu.rank() == 5, "rank(K)");

  const auto noisy = inject_noise(synthesize_projections(scenario.config, points), 1.0, 5);
  const auto noisy_obs = labeled_projections(noisy);
  const KaleidoscopicProblem problem(camera, noisy_obs, calibrate_linear(camera, 3, noisy_obs));
  double jacobian = 0.0;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd x = problem.initial_parameters();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) += 1e-3 * rng.normal() * (1.0 + std::abs(x(i)));
    }
    const Eigen::MatrixXd analytic = problem.jacobian(x);
    Eigen::MatrixXd numeric(analytic.rows(), analytic.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x(i)));
      Eigen::VectorXd plus = x;
      Eigen::VectorXd minus = x;
      plus(i) += h;
      minus(i) -= h;
      numeric.col(i) = (problem.residuals(plus) - problem.residuals(minus)) / (2.0 * h);
    }
    jacobian = std::max(jacobian, (analytic - numeric).norm() / analytic.norm());
  }
  out.require(jacobian <= 1e-5, "Jacobian vs finite differences");

  const auto two = fixture("two-mirror-order3");
  const auto [pixels, truth] = candidates_of(synthesize_projections(two.config, {two.nominal_point}));
  std::vector<std::size_t> order(pixels.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::rotate(order.begin(), order.begin() + 2, order.end());
  std::vector<Pixel2> shuffled;
  for (const auto c : order) {
    shuffled.push_back(pixels[c]);
  }
  const auto result = assign_chambers(shuffled, options_for(two));
  const auto perm = align_mirrors(result.mirrors, two.config.mirrors);
  bool permutation = result.labels.size() == shuffled.size();
  for (const auto& [c, label] : result.labels) {
    permutation = permutation && relabel(label, perm) == truth[order[c]];
  }
  out.require(permutation, "permutation invariance");

  const std::vector<Mirror> parallel{Mirror(Vec3(1, 0, 0), 100.0), Mirror(Vec3(-1, 0, 0), 120.0)};
  std::vector<LabeledProjection> flat;
  for (const char* label : {"0", "1", "2", "12", "21"}) {
    const auto seq = ReflectionSequence::parse(label, 2);
    flat.push_back({seq, project(camera, compose_reflections(seq, parallel).apply(Point3(10, 20, 1000))), 0});
  }
  bool degenerate = false;
  try {
    calibrate_linear(camera, 2, flat);
  } catch (const Degenerate&) {
    degenerate = true;
  }
  out.require(degenerate, "parallel-mirror degeneracy");

  out.detail << "Householder " << householder << ", KPC " << kpc << ", gauge " << gauge << ", rank(K) " << lu.rank()
             << ", Jacobian rel. error " << jacobian << ", permutation " << (permutation ? "ok" : "broken")
             << ", parallel mirrors " << (degenerate ? "rejected" : "accepted");
}

int run_cli(const std::string& args) {
  const std::string command = std::string("\"") + KALEIDO_CLI + "\" " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void cli_determinism(Outcome& out) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kaleido_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto file = [&](const std::string& name) { return (dir / name).string(); };
  const std::string config = std::string("--config ") + KALEIDO_FIXTURE_DIR + "/three-mirror-order2.json";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth.csv", "synth " + config + " --num-points 3 --sigma 1 --labels " + file("labels.json")},
      {"assign.json", "assign " + config + " --sigma 1 --points " + file("candidates.csv")},
      {"calibrate.json", "calibrate " + config + " --observations " + file("labels.json")},
      {"ba.json", "ba " + config + " --observations " + file("labels.json")},
      {"sweep.csv", "sweep " + config + " --sigma 0,1 --trials 3 --threads 4"},
      {"prune.json", "prune-stats " + config + " --trials 2 --sigma 0.5 --format json"},
  };
  // Inputs for the downstream commands.
  run_cli("synth " + config + " --num-points 3 --sigma 1 --labels " + file("labels.json") + " --out " +
          file("candidates.csv"));
  std::size_t identical = 0;
  for (const auto& [output, args] : commands) {
    const int first = run_cli(args + " --out " + file("a_" + output));
    const std::string a = read_file(file("a_" + output));
    const int second = run_cli(args + " --out " + file("b_" + output));
    const std::string b = read_file(file("b_" + output));
    const bool same = first == 0 && second == 0 && !a.empty() && a == b;
    out.require(same, output);
    identical += same;
  }
  fs::remove_all(dir);
  out.detail << identical << "/" << commands.size() << " commands byte-identical across two runs";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"1 noiseless chamber assignment", noiseless_assignment},
      {"2 noiseless calibration", noiseless_calibration},
      {"3 pruning envelope", pruning_envelope},
      {"4 noise robustness", noise_robustness},
      {"5 method agreement", method_agreement},
      {"6 property suite", property_suite},
      {"7 CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome out;
    try {
      check(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail.str() << std::endl;
    failed += !out.pass;
  }
  return failed == 0 ? 0 : 1;
}
