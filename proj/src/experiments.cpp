#include "kaleido/experiments.hpp"

#include "kaleido/errors.hpp"
#include "kaleido/metrics.hpp"
#include "kaleido/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <thread>

namespace kaleido {

std::vector<LabeledProjection> labeled_projections(const SyntheticScene& scene) {
  std::vector<LabeledProjection> out;
  for (const auto& obs : scene.observations) {
    if (obs.visible) {
      out.push_back({obs.label, obs.pixel, obs.point});
    }
  }
  return out;
}

CalibrationScene make_calibration_scene(const Scenario& scenario, std::size_t num_points,
                                        double sigma, std::uint64_t seed) {
  if (num_points == 0) {
    throw InvalidInput("at least one point is required");
  }
  Rng rng(seed);
  CalibrationScene out;
  out.points = sample_points(scenario, num_points, rng);
  const auto scene = inject_noise(synthesize_projections(scenario.config, out.points), sigma, rng.bits());
  out.observations = labeled_projections(scene);
  return out;
}

BoardScene make_board_scene(const Scenario& scenario, std::size_t num_landmarks, double sigma,
                            std::uint64_t seed) {
  if (num_landmarks == 0) {
    throw InvalidInput("at least one landmark is required");
  }
  Rng rng(seed);
  const auto& config = scenario.config;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Point3 center = sample_point(scenario, rng);
    const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double tilt = rng.uniform(-1.0, 1.0) * 20.0 * std::numbers::pi / 180.0;
    const Mat3 R = Eigen::AngleAxisd(tilt, Vec3(std::cos(azimuth), std::sin(azimuth), 0.0)).toRotationMatrix();

    BoardScene out;
    bool placed = true;
    for (std::size_t l = 0; l < num_landmarks && placed; ++l) {
      placed = false;
      for (int tries = 0; tries < 1000; ++tries) {
        const Point3 local(rng.uniform(-scenario.half_extent.x(), scenario.half_extent.x()),
                           rng.uniform(-scenario.half_extent.y(), scenario.half_extent.y()), 0.0);
        const Point3 p = center + R * local;
        if (fully_visible(p, config)) {
          out.reference.landmarks.push_back(local);
          out.scene.points.push_back(p);
          placed = true;
          break;
        }
      }
    }
    if (!placed) {
      continue;
    }
    const auto scene = inject_noise(synthesize_projections(config, out.scene.points), sigma, rng.bits());
    out.scene.observations = labeled_projections(scene);
    for (const auto& obs : out.scene.observations) {
      out.reference.correspondences[obs.label].emplace_back(obs.landmark, obs.pixel);
    }
    return out;
  }
  throw InvalidInput("scenario box yields no fully visible board");
}

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 7> kMethodNames{{
    {Method::Assignment, "assignment"},
    {Method::ProposedLinear, "proposed-linear"},
    {Method::ProposedBA, "proposed-ba"},
    {Method::BaselineLinear, "baseline-linear"},
    {Method::BaselineBA, "baseline-ba"},
    {Method::OrthogonalityLinear, "orthogonality-linear"},
    {Method::OrthogonalityBA, "orthogonality-ba"},
}};

bool needs_three_mirrors(Method m) {
  return m == Method::BaselineLinear || m == Method::BaselineBA ||
         m == Method::OrthogonalityLinear || m == Method::OrthogonalityBA;
}

template <typename Work>
void run_parallel(std::size_t n, unsigned threads, Work&& work) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) {
      work(k);
    }
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t k = t; k < n; k += threads) {
        work(k);
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t cell, std::size_t trial) {
  return splitmix64(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (cell + 1)) + trial);
}

bool non_increasing(const std::vector<double>& costs) {
  for (std::size_t k = 1; k < costs.size(); ++k) {
    if (costs[k] > costs[k - 1]) {
      return false;
    }
  }
  return true;
}

void score(TrialRecord& rec, const Scenario& scenario, const CalibrationEstimate& estimate,
           const std::vector<LabeledProjection>& observations) {
  rec.e_n = metric_En(estimate.mirrors, scenario.config.mirrors);
  rec.e_d = metric_Ed(estimate.mirrors, scenario.config.mirrors);
  rec.e_rep = metric_Erep(scenario.config.camera, estimate, observations);
  rec.success = std::isfinite(rec.e_n) && std::isfinite(rec.e_d) && std::isfinite(rec.e_rep);
  if (!rec.success) {
    rec.error = "non-finite metric";
  }
}

void refine(TrialRecord& rec, const Scenario& scenario, const CalibrationEstimate& initial,
            const std::vector<LabeledProjection>& observations) {
  const auto ba = kaleidoscopic_bundle_adjustment(scenario.config.camera, initial, observations);
  rec.n_iter = ba.iterations;
  rec.cost_monotone = non_increasing(ba.cost_history);
  score(rec, scenario, ba.estimate, observations);
}

// Noisy projections of p0 in random order, with their true labels alongside.
void shuffled_candidates(const Scenario& scenario, const Point3& p0, double sigma, Rng& rng,
                         std::vector<Pixel2>& candidates, std::vector<ReflectionSequence>& truth) {
  const auto scene = inject_noise(synthesize_projections(scenario.config, {p0}), sigma, rng.bits());
  auto labeled = labeled_projections(scene);
  for (std::size_t k = labeled.size(); k > 1; --k) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
    std::swap(labeled[k - 1], labeled[std::min(j, k - 1)]);
  }
  for (const auto& obs : labeled) {
    candidates.push_back(obs.pixel);
    truth.push_back(obs.label);
  }
}

// Runs `body`, turning library errors into a failed record.
template <typename Body>
void attempt(TrialRecord& rec, Body&& body) {
  try {
    body();
  } catch (const Error& e) {
    rec.success = false;
    rec.error = e.what();
  }
}

}  // namespace

std::string_view method_name(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) {
      return name;
    }
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [m, text] : kMethodNames) {
    if (text == name) {
      return m;
    }
  }
  throw InvalidInput("unknown method '" + std::string(name) + "'");
}

bool is_calibration(Method method) { return method != Method::Assignment; }

std::string_view variable_name(SweepVariable variable) {
  return variable == SweepVariable::Sigma ? "sigma" : "num_points";
}

std::vector<Method> ExperimentSpec::effective_methods() const {
  if (!methods.empty()) {
    return methods;
  }
  std::vector<Method> out;
  for (const auto& [m, name] : kMethodNames) {
    if (!needs_three_mirrors(m) || scenario.config.num_mirrors() == 3) {
      out.push_back(m);
    }
  }
  return out;
}

std::size_t ExperimentSpec::trials_for(Method method) const {
  return trials.value_or(is_calibration(method) ? 100 : 50);
}

void ExperimentSpec::validate() const {
  scenario.config.validate();
  if (values.empty()) {
    throw InvalidInput("sweep needs at least one value");
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput("sweep values must be finite and non-negative");
    }
    if (variable == SweepVariable::NumPoints && (v < 1.0 || v != std::floor(v))) {
      throw InvalidInput("point counts must be positive integers");
    }
  }
  if (!(sigma >= 0.0) || num_points == 0) {
    throw InvalidInput("sigma must be non-negative and num_points positive");
  }
  if (trials && *trials == 0) {
    throw InvalidInput("trials must be at least 1");
  }
  for (Method m : effective_methods()) {
    if (needs_three_mirrors(m) && scenario.config.num_mirrors() != 3) {
      throw InvalidInput(std::string(method_name(m)) + " needs a three-mirror scenario");
    }
  }
}

std::vector<TrialRecord> run_trial(const ExperimentSpec& spec, std::size_t cell, std::size_t trial) {
  const double value = spec.values.at(cell);
  const double sigma = spec.variable == SweepVariable::Sigma ? value : spec.sigma;
  const std::size_t num_points =
      spec.variable == SweepVariable::NumPoints ? static_cast<std::size_t>(value) : spec.num_points;
  const Scenario& scenario = spec.scenario;
  const auto& camera = scenario.config.camera;
  const std::uint64_t seed = trial_seed(spec.seed, cell, trial);

  std::vector<Method> methods;
  for (Method m : spec.effective_methods()) {
    if (trial < spec.trials_for(m)) {
      methods.push_back(m);
    }
  }
  const auto uses = [&](Method a, Method b) {
    return std::find(methods.begin(), methods.end(), a) != methods.end() ||
           std::find(methods.begin(), methods.end(), b) != methods.end();
  };

  std::optional<CalibrationScene> points_scene;
  std::optional<CalibrationEstimate> proposed;
  std::string proposed_error;
  if (uses(Method::ProposedLinear, Method::ProposedBA)) {
    points_scene = make_calibration_scene(scenario, num_points, sigma, Rng::stream(seed, 0).bits());
    try {
      proposed = calibrate_linear(camera, scenario.config.num_mirrors(), points_scene->observations);
    } catch (const Error& e) {
      proposed_error = e.what();
    }
  }
  std::optional<BoardScene> board;
  std::optional<ChamberPoints> board_points;
  std::string pose_error;
  if (uses(Method::BaselineLinear, Method::BaselineBA) ||
      uses(Method::OrthogonalityLinear, Method::OrthogonalityBA)) {
    board = make_board_scene(scenario, num_points, sigma, Rng::stream(seed, 1).bits());
    try {
      board_points = estimate_pose(camera, board->reference);
    } catch (const Error& e) {
      pose_error = e.what();
    }
  }

  std::vector<TrialRecord> out;
  for (Method m : methods) {
    TrialRecord rec;
    rec.cell = cell;
    rec.value = value;
    rec.trial = trial;
    rec.method = m;
    switch (m) {
      case Method::Assignment: {
        Rng rng = Rng::stream(seed, 2);
        const Point3 p0 = sample_point(scenario, rng);
        std::vector<Pixel2> candidates;
        std::vector<ReflectionSequence> truth;
        shuffled_candidates(scenario, p0, sigma, rng, candidates, truth);
        AssignmentOptions options;
        options.camera = camera;
        options.num_mirrors = scenario.config.num_mirrors();
        options.max_order = scenario.config.max_order;
        options.sigma = sigma;
        try {
          const auto result = assign_chambers(candidates, options);
          const auto perm = align_mirrors(result.mirrors, scenario.config.mirrors);
          rec.e_m = metric_Em(result.labels, truth, scenario.config.max_order, perm).accuracy;
          rec.pruning = result.pruning;
          rec.success = true;
        } catch (const NoSolution& e) {
          rec.error = e.what();
          rec.pruning = e.counts();
        }
        break;
      }
      case Method::ProposedLinear:
      case Method::ProposedBA:
        if (!proposed) {
          rec.error = proposed_error;
          break;
        }
        attempt(rec, [&] {
          if (m == Method::ProposedLinear) {
            score(rec, scenario, *proposed, points_scene->observations);
          } else {
            refine(rec, scenario, *proposed, points_scene->observations);
          }
        });
        break;
      case Method::BaselineLinear:
      case Method::BaselineBA:
      case Method::OrthogonalityLinear:
      case Method::OrthogonalityBA:
        if (!board_points) {
          rec.error = pose_error;
          break;
        }
        attempt(rec, [&] {
          const bool baseline = m == Method::BaselineLinear || m == Method::BaselineBA;
          const auto linear = baseline ? baseline_calibrate(*board_points)
                                       : orthogonality_calibrate(*board_points);
          if (m == Method::BaselineLinear || m == Method::OrthogonalityLinear) {
            score(rec, scenario, linear, board->scene.observations);
          } else {
            refine(rec, scenario, linear, board->scene.observations);
          }
        });
        break;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SweepRow> aggregate(const std::vector<TrialRecord>& trials, int max_order) {
  std::vector<SweepRow> rows;
  for (const auto& rec : trials) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& r) {
      return r.cell == rec.cell && r.method == rec.method;
    });
    if (it == rows.end()) {
      SweepRow row;
      row.cell = rec.cell;
      row.value = rec.value;
      row.method = rec.method;
      if (!is_calibration(rec.method)) {
        row.e_m.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
      }
      rows.push_back(row);
      it = rows.end() - 1;
    }
    ++it->trials;
    if (!rec.success) {
      continue;
    }
    ++it->successes;
    for (std::size_t m = 0; m < it->e_m.size() && m < rec.e_m.size(); ++m) {
      it->e_m[m] += rec.e_m[m];
    }
    it->e_n += rec.e_n;
    it->e_d += rec.e_d;
    it->e_rep += rec.e_rep;
    it->n_iter += rec.n_iter;
    if (rec.pruning) {
      const auto& p = *rec.pruning;
      const std::array<double, 6> c{double(p.total), double(p.kpc), double(p.prop1),
                                    double(p.prop2), double(p.joint), double(p.all)};
      for (std::size_t k = 0; k < 6; ++k) {
        it->pruning[k] += c[k];
      }
    }
  }
  for (auto& row : rows) {
    row.flagged = row.successes == 0;
    if (row.flagged) {
      continue;
    }
    const auto n = static_cast<double>(row.successes);
    for (double& v : row.e_m) {
      v /= n;
    }
    row.e_n /= n;
    row.e_d /= n;
    row.e_rep /= n;
    row.n_iter /= n;
    for (double& v : row.pruning) {
      v /= n;
    }
  }
  return rows;
}

SweepReport run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  SweepReport report;
  report.scenario = spec.scenario.name;
  report.variable = spec.variable;
  report.max_order = spec.scenario.config.max_order;
  std::size_t max_trials = 0;
  for (Method m : spec.effective_methods()) {
    max_trials = std::max(max_trials, spec.trials_for(m));
  }
  for (std::size_t cell = 0; cell < spec.values.size(); ++cell) {
    std::vector<std::vector<TrialRecord>> slots(max_trials);
    run_parallel(max_trials, spec.threads,
                 [&](std::size_t trial) { slots[trial] = run_trial(spec, cell, trial); });
    for (auto& slot : slots) {
      for (auto& rec : slot) {
        report.trials.push_back(std::move(rec));
      }
    }
  }
  // Group rows by cell, then method order, independent of trial interleaving.
  auto rows = aggregate(report.trials, report.max_order);
  const auto methods = spec.effective_methods();
  std::stable_sort(rows.begin(), rows.end(), [&](const SweepRow& a, const SweepRow& b) {
    if (a.cell != b.cell) {
      return a.cell < b.cell;
    }
    const auto pa = std::find(methods.begin(), methods.end(), a.method) - methods.begin();
    const auto pb = std::find(methods.begin(), methods.end(), b.method) - methods.begin();
    return pa < pb;
  });
  report.rows = std::move(rows);
  return report;
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const SweepReport& report) {
  std::string out = "scenario,variable,value,method,trials,successes,flagged";
  for (int m = 0; m <= report.max_order; ++m) {
    out += ",E_m" + std::to_string(m);
  }
  out += ",E_n,E_d,E_rep,N_iter,prune_total,prune_kpc,prune_prop1,prune_prop2,prune_joint,prune_all\n";
  for (const auto& row : report.rows) {
    out += report.scenario + "," + std::string(variable_name(report.variable)) + "," +
           number(row.value) + "," + std::string(method_name(row.method)) + "," +
           std::to_string(row.trials) + "," + std::to_string(row.successes) + "," +
           (row.flagged ? "1" : "0");
    const bool show = !row.flagged;
    const bool calibration = is_calibration(row.method);
    for (int m = 0; m <= report.max_order; ++m) {
      out += ",";
      if (show && !calibration) {
        out += number(row.e_m[static_cast<std::size_t>(m)]);
      }
    }
    for (double v : {row.e_n, row.e_d, row.e_rep, row.n_iter}) {
      out += ",";
      if (show && calibration) {
        out += number(v);
      }
    }
    for (double v : row.pruning) {
      out += ",";
      if (show && !calibration) {
        out += number(v);
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<PruneTrial> run_prune_stats(const Scenario& scenario, std::size_t trials, double sigma,
                                        std::uint64_t seed, unsigned threads,
                                        std::optional<double> kpc_threshold) {
  scenario.config.validate();
  if (trials == 0 || !(sigma >= 0.0)) {
    throw InvalidInput("prune statistics need trials >= 1 and sigma >= 0");
  }
  std::vector<PruneTrial> out(trials);
  run_parallel(trials, threads, [&](std::size_t t) {
    Rng rng = Rng::stream(seed, t);
    const Point3 p0 = t == 0 ? scenario.nominal_point : sample_point(scenario, rng);
    std::vector<Pixel2> candidates;
    std::vector<ReflectionSequence> truth;
    shuffled_candidates(scenario, p0, sigma, rng, candidates, truth);
    AssignmentOptions options;
    options.camera = scenario.config.camera;
    options.num_mirrors = scenario.config.num_mirrors();
    options.max_order = scenario.config.max_order;
    options.sigma = sigma;
    options.kpc_threshold = kpc_threshold;
    PruneTrial& rec = out[t];
    rec.trial = t;
    rec.point = p0;
    rec.counts = count_pruning(candidates, options,
                               [&](std::uint64_t, const BaseStructureHypothesis& h,
                                   const HypothesisEvaluation&) {
                                 if (is_true_structure(h, truth)) {
                                   ++rec.true_survivors;
                                 }
                               });
  });
  return out;
}

}  // namespace kaleido
