#pragma once

#include "kaleido/baselines.hpp"
#include "kaleido/calibration.hpp"
#include "kaleido/chamber.hpp"
#include "kaleido/scenarios.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kaleido {

struct CalibrationScene {
  std::vector<Point3> points;
  std::vector<LabeledProjection> observations;
};

/// Converts the visible observations of a synthetic scene.
std::vector<LabeledProjection> labeled_projections(const SyntheticScene& scene);

/// `num_points` fully visible random points with every projection labeled and
/// N(0, sigma^2) pixel noise.
CalibrationScene make_calibration_scene(const Scenario& scenario, std::size_t num_points,
                                        double sigma, std::uint64_t seed);

/// Planar reference object of `num_landmarks` points at a random pose inside the
/// scenario box, with its noisy projections both as per-chamber correspondences and as
/// labeled projections.
struct BoardScene {
  ReferenceObject reference;
  CalibrationScene scene;
};
BoardScene make_board_scene(const Scenario& scenario, std::size_t num_landmarks, double sigma,
                            std::uint64_t seed);

enum class Method {
  Assignment,
  ProposedLinear,
  ProposedBA,
  BaselineLinear,
  BaselineBA,
  OrthogonalityLinear,
  OrthogonalityBA,
};

std::string_view method_name(Method method);
Method parse_method(std::string_view name);
bool is_calibration(Method method);

enum class SweepVariable { Sigma, NumPoints };

std::string_view variable_name(SweepVariable variable);

struct ExperimentSpec {
  Scenario scenario;
  SweepVariable variable = SweepVariable::Sigma;
  std::vector<double> values{0.0, 0.5, 1.0, 2.0};
  /// Noise level while sweeping the point count.
  double sigma = 1.0;
  /// Point count while sweeping the noise level.
  std::size_t num_points = 5;
  /// Defaults to 50 for assignment and 100 for calibration methods.
  std::optional<std::size_t> trials;
  std::uint64_t seed = 0;
  /// Empty selects every method the scenario supports.
  std::vector<Method> methods;
  unsigned threads = 1;

  std::vector<Method> effective_methods() const;
  std::size_t trials_for(Method method) const;
  void validate() const;
};

struct TrialRecord {
  std::size_t cell = 0;
  double value = 0.0;
  std::size_t trial = 0;
  Method method = Method::ProposedLinear;
  bool success = false;
  std::string error;
  /// Per-order labeling accuracy (assignment only).
  std::vector<double> e_m;
  double e_n = 0.0;
  double e_d = 0.0;
  double e_rep = 0.0;
  int n_iter = 0;
  /// BA cost never increased between accepted iterations.
  bool cost_monotone = true;
  std::optional<PruningCounts> pruning;
};

struct SweepRow {
  std::size_t cell = 0;
  double value = 0.0;
  Method method = Method::ProposedLinear;
  std::size_t trials = 0;
  std::size_t successes = 0;
  /// Set when no trial of the cell succeeded.
  bool flagged = false;
  std::vector<double> e_m;
  double e_n = 0.0;
  double e_d = 0.0;
  double e_rep = 0.0;
  double n_iter = 0.0;
  /// Mean counts: total, kpc, prop1, prop2, joint, all.
  std::array<double, 6> pruning{};
};

struct SweepReport {
  std::string scenario;
  SweepVariable variable = SweepVariable::Sigma;
  int max_order = 0;
  std::vector<TrialRecord> trials;
  std::vector<SweepRow> rows;
};

/// Runs one trial of every enabled method. Deterministic in (seed, cell, trial).
std::vector<TrialRecord> run_trial(const ExperimentSpec& spec, std::size_t cell, std::size_t trial);

/// Means over the successful trials of each (cell, method), in trial order.
std::vector<SweepRow> aggregate(const std::vector<TrialRecord>& trials, int max_order);

SweepReport run_sweep(const ExperimentSpec& spec);

/// One header row plus one row per (cell, method); inapplicable metrics are empty.
std::string sweep_csv(const SweepReport& report);

struct PruneTrial {
  std::size_t trial = 0;
  Point3 point = Point3::Zero();
  PruningCounts counts;
  /// Surviving hypotheses that are genuine base structures.
  std::size_t true_survivors = 0;
};

/// Pruning statistics on noisy projections of random points (the nominal point for
/// trial 0).
std::vector<PruneTrial> run_prune_stats(const Scenario& scenario, std::size_t trials, double sigma,
                                        std::uint64_t seed, unsigned threads,
                                        std::optional<double> kpc_threshold = {});

}  // namespace kaleido
