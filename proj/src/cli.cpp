#include "kaleido/cli.hpp"

#include "kaleido/errors.hpp"
#include "kaleido/io.hpp"
#include "kaleido/metrics.hpp"
#include "kaleido/rng.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <optional>
#include <ostream>
#include <sstream>

namespace kaleido {

namespace {

struct GlobalOptions {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format;
  unsigned threads = 1;
};

struct SynthOptions {
  std::string scenario;
  std::size_t num_points = 1;
  std::optional<double> sigma;
  std::string labels;
  std::string write_config;
};

struct AssignOptions {
  std::string points;
  std::optional<double> sigma;
  std::optional<double> kpc_threshold;
  std::optional<double> match_threshold;
};

struct CalibrateOptions {
  std::string observations;
  std::string init;
  int max_iterations = 200;
};

struct SweepOptions {
  std::string scenario;
  std::vector<double> sigma;
  std::vector<double> num_points;
  std::optional<std::size_t> trials;
  std::vector<std::string> methods;
  std::string dump;
};

struct PruneOptions {
  std::string scenario;
  std::size_t trials = 1;
  double sigma = 0.0;
  std::optional<double> kpc_threshold;
};

class Runner {
 public:
  Runner(const GlobalOptions& global, std::ostream& out) : global_(global), out_(out) {}

  void emit(const std::string& text) const {
    if (global_.out.empty()) {
      out_ << text;
    } else {
      write_file(global_.out, text);
    }
  }

  std::string format(const char* fallback) const {
    return global_.format.empty() ? fallback : global_.format;
  }

  SceneFile scene(const std::string& scenario_name) const {
    if (!scenario_name.empty() && !global_.config.empty()) {
      throw InvalidInput("give either --scenario or --config, not both");
    }
    if (!scenario_name.empty()) {
      SceneFile file;
      file.scenario = scenario_by_name(scenario_name);
      file.has_sampling_box = true;
      return file;
    }
    if (global_.config.empty()) {
      throw InvalidInput("--config (or --scenario) is required");
    }
    return scene_from_json(parse_json(read_file(global_.config)));
  }

  std::uint64_t seed(const SceneFile& file) const {
    return global_.seed_set ? global_.seed : file.scenario.config.seed;
  }

  const GlobalOptions& global() const { return global_; }

 private:
  const GlobalOptions& global_;
  std::ostream& out_;
};

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

int run_synth(const Runner& run, const SynthOptions& opt) {
  const SceneFile file = run.scene(opt.scenario);
  const Scenario& scenario = file.scenario;
  const std::uint64_t seed = run.seed(file);
  std::vector<Point3> points = file.points;
  if (points.empty()) {
    if (!file.has_sampling_box) {
      throw InvalidInput("config has neither points nor a sampling box");
    }
    Rng rng = Rng::stream(seed, 0);
    points = sample_points(scenario, opt.num_points, rng);
  }
  const double sigma = opt.sigma.value_or(scenario.config.sigma);
  const auto scene = inject_noise(synthesize_projections(scenario.config, points), sigma,
                                  Rng::stream(seed, 1).bits());
  const auto observations = labeled_projections(scene);
  const std::size_t num_mirrors = scenario.config.num_mirrors();

  // Candidates of the first point, in a seeded random order.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < observations.size(); ++k) {
    if (observations[k].landmark == 0) {
      order.push_back(k);
    }
  }
  Rng shuffle = Rng::stream(seed, 2);
  for (std::size_t k = order.size(); k > 1; --k) {
    const auto j = std::min(static_cast<std::size_t>(shuffle.uniform() * static_cast<double>(k)), k - 1);
    std::swap(order[k - 1], order[j]);
  }
  std::vector<Pixel2> candidates;
  std::vector<std::optional<std::size_t>> ids(observations.size());
  for (std::size_t c = 0; c < order.size(); ++c) {
    candidates.push_back(observations[order[c]].pixel);
    ids[order[c]] = c;
  }

  if (!opt.write_config.empty()) {
    write_file(opt.write_config, dump(scene_to_json(scenario)));
  }
  const Json labeled = observations_to_json(observations, num_mirrors, ids);
  if (!opt.labels.empty()) {
    write_file(opt.labels, dump(labeled));
  }
  run.emit(run.format("csv") == "csv" ? candidates_to_csv(candidates) : dump(labeled));
  return kExitSuccess;
}

int run_assign(const Runner& run, const AssignOptions& opt) {
  const SceneFile file = run.scene("");
  if (opt.points.empty()) {
    throw InvalidInput("--points is required");
  }
  const auto candidates = candidates_from_csv(read_file(opt.points));
  const auto& config = file.scenario.config;
  AssignmentOptions options;
  options.camera = config.camera;
  options.num_mirrors = config.num_mirrors();
  options.max_order = config.max_order;
  options.sigma = opt.sigma.value_or(config.sigma);
  options.kpc_threshold = opt.kpc_threshold;
  options.match_threshold = opt.match_threshold;
  options.threads = run.global().threads;
  const auto result = assign_chambers(candidates, options);
  run.emit(run.format("json") == "csv"
               ? assignment_to_csv(result, candidates, options.num_mirrors)
               : dump(assignment_to_json(result, candidates, options.num_mirrors)));
  return kExitSuccess;
}

Json calibration_report(const CalibrationEstimate& estimate, const SceneFile& file,
                        const std::vector<LabeledProjection>& observations) {
  Json doc = estimate_to_json(estimate);
  const auto& config = file.scenario.config;
  const auto report = reprojection_error(config.camera, estimate, observations);
  doc["e_rep"] = report.mean;
  doc["rms"] = report.rms;
  if (config.mirrors.size() == estimate.mirrors.size()) {
    doc["reference_E_n"] = metric_En(estimate.mirrors, config.mirrors);
    doc["reference_E_d"] = metric_Ed(estimate.mirrors, config.mirrors);
  }
  return doc;
}

std::string estimate_csv(const CalibrationEstimate& estimate) {
  std::ostringstream s;
  s.precision(17);
  s << "mirror,nx,ny,nz,d\n";
  for (std::size_t i = 0; i < estimate.mirrors.size(); ++i) {
    const auto& m = estimate.mirrors[i];
    s << i + 1 << "," << m.normal().x() << "," << m.normal().y() << "," << m.normal().z() << ","
      << m.distance() << "\n";
  }
  return s.str();
}

int run_calibrate(const Runner& run, const CalibrateOptions& opt) {
  const SceneFile file = run.scene("");
  if (opt.observations.empty()) {
    throw InvalidInput("--observations is required");
  }
  const auto& config = file.scenario.config;
  const auto observations =
      observations_from_json(parse_json(read_file(opt.observations)), config.num_mirrors());
  const auto estimate = calibrate_linear(config.camera, config.num_mirrors(), observations);
  if (run.format("json") == "csv") {
    run.emit(estimate_csv(estimate));
    return kExitSuccess;
  }
  // The linear solve is closed form.
  Json doc = calibration_report(estimate, file, observations);
  doc["n_iter"] = 0;
  doc["converged"] = true;
  run.emit(dump(doc));
  return kExitSuccess;
}

int run_ba(const Runner& run, const CalibrateOptions& opt) {
  const SceneFile file = run.scene("");
  if (opt.observations.empty()) {
    throw InvalidInput("--observations is required");
  }
  const auto& config = file.scenario.config;
  const auto observations =
      observations_from_json(parse_json(read_file(opt.observations)), config.num_mirrors());
  const CalibrationEstimate initial =
      opt.init.empty() ? calibrate_linear(config.camera, config.num_mirrors(), observations)
                       : estimate_from_json(parse_json(read_file(opt.init)));
  BundleOptions options;
  options.max_iterations = opt.max_iterations;
  const auto result = kaleidoscopic_bundle_adjustment(config.camera, initial, observations, options);
  if (run.format("json") == "csv") {
    run.emit(estimate_csv(result.estimate));
    return kExitSuccess;
  }
  Json doc = calibration_report(result.estimate, file, observations);
  doc["n_iter"] = result.iterations;
  doc["converged"] = result.converged;
  doc["initial_cost"] = result.initial_cost;
  doc["final_cost"] = result.final_cost;
  doc["cost_history"] = result.cost_history;
  run.emit(dump(doc));
  return kExitSuccess;
}

int run_sweep_command(const Runner& run, const SweepOptions& opt) {
  const SceneFile file = run.scene(opt.scenario);
  if (!file.has_sampling_box) {
    throw InvalidInput("sweep configs need nominal_point and half_extent");
  }
  ExperimentSpec spec;
  spec.scenario = file.scenario;
  spec.seed = run.seed(file);
  spec.threads = run.global().threads;
  spec.trials = opt.trials;
  for (const auto& name : opt.methods) {
    spec.methods.push_back(parse_method(name));
  }
  if (opt.num_points.size() > 1) {
    if (opt.sigma.size() > 1) {
      throw InvalidInput("sweep either --sigma or --num-points, not both");
    }
    spec.variable = SweepVariable::NumPoints;
    spec.values = opt.num_points;
    spec.sigma = opt.sigma.empty() ? 1.0 : opt.sigma.front();
  } else {
    spec.variable = SweepVariable::Sigma;
    if (!opt.sigma.empty()) {
      spec.values = opt.sigma;
    }
    if (!opt.num_points.empty()) {
      const double n = opt.num_points.front();
      if (n < 1.0 || n != static_cast<double>(static_cast<std::size_t>(n))) {
        throw InvalidInput("point counts must be positive integers");
      }
      spec.num_points = static_cast<std::size_t>(n);
    }
  }
  const auto report = run_sweep(spec);
  const Json doc = sweep_to_json(report);
  if (!opt.dump.empty()) {
    write_file(opt.dump, dump(doc));
  }
  run.emit(run.format("csv") == "csv" ? sweep_csv(report) : dump(doc));
  return kExitSuccess;
}

int run_prune(const Runner& run, const PruneOptions& opt) {
  const SceneFile file = run.scene(opt.scenario);
  if (!file.has_sampling_box) {
    throw InvalidInput("prune statistics need nominal_point and half_extent");
  }
  const auto trials = run_prune_stats(file.scenario, opt.trials, opt.sigma, run.seed(file),
                                      run.global().threads, opt.kpc_threshold);
  run.emit(run.format("json") == "csv" ? prune_stats_to_csv(trials)
                                       : dump(prune_stats_to_json(file.scenario.name, trials)));
  return kExitSuccess;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kaleidoscopic mirror calibration and chamber assignment"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config, "Scene configuration JSON");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { global.seed = s; global.seed_set = true; },
      "Random seed (defaults to the config seed)");
  app.add_option("--out", global.out, "Output file (stdout when omitted)");
  app.add_option("--format", global.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", global.threads, "Worker threads")->check(CLI::PositiveNumber);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize projections of scene points");
  synth_cmd->add_option("--scenario", synth.scenario, "Built-in scenario instead of --config");
  synth_cmd->add_option("--num-points", synth.num_points, "Points to sample when the config lists none")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sigma", synth.sigma, "Pixel noise (overrides the config)");
  synth_cmd->add_option("--labels", synth.labels, "Write the labeled observations JSON here");
  synth_cmd->add_option("--write-config", synth.write_config, "Write the scene config JSON here");

  AssignOptions assign;
  auto* assign_cmd = app.add_subcommand("assign", "Label candidate projections");
  assign_cmd->add_option("--points", assign.points, "Candidate CSV (id,u,v)");
  assign_cmd->add_option("--sigma", assign.sigma, "Expected pixel noise");
  assign_cmd->add_option("--kpc-threshold", assign.kpc_threshold, "Feasibility score threshold");
  assign_cmd->add_option("--match-threshold", assign.match_threshold, "Label propagation radius (px)");

  CalibrateOptions calibrate;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Linear mirror calibration");
  calibrate_cmd->add_option("--observations", calibrate.observations, "Labeled observations JSON");

  CalibrateOptions ba;
  auto* ba_cmd = app.add_subcommand("ba", "Bundle adjustment of a calibration");
  ba_cmd->add_option("--observations", ba.observations, "Labeled observations JSON");
  ba_cmd->add_option("--init", ba.init, "Initial estimate JSON (linear solution when omitted)");
  ba_cmd->add_option("--max-iterations", ba.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo evaluation over noise or point counts");
  sweep_cmd->add_option("--scenario", sweep.scenario, "Built-in scenario instead of --config");
  sweep_cmd->add_option("--sigma", sweep.sigma, "Noise levels")->delimiter(',');
  sweep_cmd->add_option("--num-points", sweep.num_points, "Point counts")->delimiter(',');
  sweep_cmd->add_option("--trials", sweep.trials, "Trials per cell")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--methods", sweep.methods, "Methods to run")->delimiter(',');
  sweep_cmd->add_option("--dump", sweep.dump, "Write the per-trial JSON here");

  PruneOptions prune;
  auto* prune_cmd = app.add_subcommand("prune-stats", "Count hypotheses surviving each pruning stage");
  prune_cmd->add_option("--scenario", prune.scenario, "Built-in scenario instead of --config");
  prune_cmd->add_option("--trials", prune.trials, "Random points")->check(CLI::PositiveNumber);
  prune_cmd->add_option("--sigma", prune.sigma, "Pixel noise")->check(CLI::NonNegativeNumber);
  prune_cmd->add_option("--kpc-threshold", prune.kpc_threshold, "Feasibility score threshold");

  for (auto* cmd : {synth_cmd, assign_cmd, calibrate_cmd, ba_cmd, sweep_cmd, prune_cmd}) {
    cmd->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitInvalidInput;
  }

  const Runner run(global, out);
  try {
    if (*synth_cmd) {
      return run_synth(run, synth);
    }
    if (*assign_cmd) {
      return run_assign(run, assign);
    }
    if (*calibrate_cmd) {
      return run_calibrate(run, calibrate);
    }
    if (*ba_cmd) {
      return run_ba(run, ba);
    }
    if (*sweep_cmd) {
      return run_sweep_command(run, sweep);
    }
    return run_prune(run, prune);
  } catch (const NoSolution& e) {
    err << "no solution: " << e.what() << "\n";
    return kExitNoSolution;
  } catch (const InvalidInput& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const Error& e) {
    err << "no solution: " << e.what() << "\n";
    return kExitNoSolution;
  }
}

}  // namespace kaleido
