#include "kaleido/chamber.hpp"

#include "kaleido/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace kaleido {

int BaseStructureHypothesis::partner_mirror(std::size_t k) const {
  if (k == 0) {
    return 0;
  }
  // Doublets after the first cover the non-pivot mirrors in increasing order.
  int mirror = static_cast<int>(k);
  if (mirror >= pivot_mirror) {
    ++mirror;
  }
  return mirror;
}

namespace {

std::uint64_t permutations(std::size_t n, std::size_t k) {
  if (k > n) {
    return 0;
  }
  std::uint64_t out = 1;
  for (std::size_t i = 0; i < k; ++i) {
    out *= static_cast<std::uint64_t>(n - i);
  }
  return out;
}

// Advances `tuple` to the next k-permutation of {0..n-1} in lexicographic order.
// Positions before `frozen` are never changed. Returns false when exhausted.
bool advance_tuple(std::vector<std::size_t>& tuple, std::size_t n, std::size_t frozen) {
  const std::size_t k = tuple.size();
  std::vector<bool> used(n, false);
  for (std::size_t v : tuple) {
    used[v] = true;
  }
  for (std::size_t i = k; i-- > frozen;) {
    used[tuple[i]] = false;
    std::size_t candidate = tuple[i] + 1;
    while (candidate < n && used[candidate]) {
      ++candidate;
    }
    if (candidate < n) {
      tuple[i] = candidate;
      used[candidate] = true;
      std::size_t fill = 0;
      for (std::size_t j = i + 1; j < k; ++j) {
        while (used[fill]) {
          ++fill;
        }
        tuple[j] = fill;
        used[fill] = true;
      }
      return true;
    }
  }
  return false;
}

// Smallest tuple starting with `first`.
std::vector<std::size_t> first_tuple(std::size_t k, std::size_t first) {
  std::vector<std::size_t> tuple{first};
  for (std::size_t v = 0; tuple.size() < k; ++v) {
    if (v != first) {
      tuple.push_back(v);
    }
  }
  return tuple;
}

}  // namespace

BaseStructureEnumerator::BaseStructureEnumerator(std::size_t num_candidates,
                                                 std::size_t num_mirrors)
    : num_candidates_(num_candidates),
      num_mirrors_(num_mirrors),
      count_(num_mirrors >= 2 ? permutations(num_candidates, 2 * num_mirrors) : 0) {
  done_ = count_ == 0;
}

bool BaseStructureEnumerator::next(BaseStructureHypothesis& out) {
  if (done_) {
    return false;
  }
  if (!started_) {
    tuple_ = first_tuple(2 * num_mirrors_, 0);
    started_ = true;
  } else if (!advance_tuple(tuple_, num_candidates_, 0)) {
    done_ = true;
    return false;
  }
  out = from_tuple(tuple_, num_mirrors_);
  return true;
}

BaseStructureHypothesis BaseStructureEnumerator::from_tuple(std::span<const std::size_t> tuple,
                                                            std::size_t num_mirrors) {
  if (tuple.size() != 2 * num_mirrors) {
    throw InvalidInput("base structure tuple must hold 2N candidate indices");
  }
  BaseStructureHypothesis h;
  h.base = tuple[0];
  h.pivot_mirror = 1;
  h.doublets.reserve(num_mirrors);
  for (std::size_t k = 0; k < num_mirrors; ++k) {
    h.doublets.push_back({tuple[2 * k], tuple[2 * k + 1]});
  }
  return h;
}

NormalEstimate normal_from_doublets(std::span<const NormalizedPair> doublets) {
  if (doublets.size() < 2) {
    throw InsufficientData("a mirror normal needs at least two doublets");
  }
  const Eigen::Index rows = std::max<Eigen::Index>(3, static_cast<Eigen::Index>(doublets.size()));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, 3);
  for (std::size_t k = 0; k < doublets.size(); ++k) {
    m.row(static_cast<Eigen::Index>(k)) = kpc_row(doublets[k].first, doublets[k].second);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  NormalEstimate out;
  out.singular_values = svd.singularValues();
  const auto& s = out.singular_values;
  if (!(s(0) > 0.0) || s(1) - s(2) <= 1e-9 * s(0)) {
    throw Degenerate("KPC constraints are linearly dependent (parallel mirrors?)");
  }
  out.normal = svd.matrixV().col(2).normalized();
  out.residual = s(2) / s.sum();
  return out;
}

Triangulation triangulate_doublet(const NormalizedPoint& q, const NormalizedPoint& q_reflected,
                                  const Vec3& normal, double distance) {
  const Vec3 x = q.homogeneous();
  const Vec3 xr = q_reflected.homogeneous();
  if ((x - xr).squaredNorm() < 1e-24) {
    throw Degenerate("doublet members coincide");
  }
  const Mat3 h = Mat3::Identity() - 2.0 * normal * normal.transpose();
  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = h * x;
  a.col(1) = -xr;
  const Eigen::Matrix2d gram = a.transpose() * a;
  const double det = gram.determinant();
  if (!(det > 1e-24 * gram(0, 0) * gram(1, 1))) {
    throw Degenerate("triangulation rays are parallel");
  }
  const Eigen::Vector2d depths = gram.inverse() * (a.transpose() * (2.0 * distance * normal));
  Triangulation out;
  out.depth = depths(0);
  out.reflected_depth = depths(1);
  out.point = depths(0) * x;
  out.reflected = depths(1) * xr;
  return out;
}

Mirror resolve_normal_sign(const Vec3& normal, const NormalizedPair& doublet) {
  for (double sign : {1.0, -1.0}) {
    const Vec3 n = sign * normal.normalized();
    const Triangulation t = triangulate_doublet(doublet.first, doublet.second, n, 1.0);
    if (t.depth > 0.0 && t.reflected_depth > 0.0) {
      return Mirror(n, 1.0);
    }
  }
  throw Infeasible("neither normal sign triangulates the doublet in front of the camera");
}

Mirror mirror_from_point_pair(const Point3& p, const Point3& p_reflected) {
  const Vec3 diff = p - p_reflected;
  const double norm = diff.norm();
  if (!(norm > 0.0)) {
    throw InvalidInput("a point and its reflection must differ");
  }
  Vec3 n = diff / norm;
  double d = -n.dot(p + p_reflected) / 2.0;
  if (d < 0.0) {
    n = -n;
    d = -d;
  }
  return Mirror(n, d);
}

PropositionCheck check_propositions(const Point3& p0, std::span<const Point3> first_reflections,
                                    std::span<const Mirror> mirrors) {
  PropositionCheck out;
  out.base_closest = true;
  const double base = p0.norm();
  for (std::size_t i = 0; i < first_reflections.size(); ++i) {
    if (!(base < first_reflections[i].norm())) {
      out.base_closest = false;
      out.reason = "reflection " + std::to_string(i + 1) + " is closer than the base point";
      break;
    }
  }
  out.mirrors_facing = true;
  for (std::size_t i = 0; i < mirrors.size() && out.mirrors_facing; ++i) {
    for (std::size_t j = i + 1; j < mirrors.size(); ++j) {
      if (!(mirrors[i].normal().dot(mirrors[j].normal()) < 0.0)) {
        out.mirrors_facing = false;
        if (!out.reason.empty()) {
          out.reason += "; ";
        }
        out.reason += "mirrors " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                      " do not face each other";
        break;
      }
    }
  }
  return out;
}

Propagation propagate_labels(const CameraIntrinsics& camera, std::span<const Mirror> mirrors,
                             const Point3& p0, int max_order, std::span<const Pixel2> candidates,
                             double distance_threshold) {
  const std::vector<Mirror> mirror_list(mirrors.begin(), mirrors.end());
  Propagation out;
  std::map<std::size_t, double> best_distance;
  std::vector<bool> used(candidates.size(), false);
  for (const auto& seq : enumerate_reflections(mirror_list.size(), max_order)) {
    if (!(p0.z() > 0.0) || !is_visible(seq, p0, camera, mirror_list)) {
      continue;
    }
    ++out.synthesized;
    const Pixel2 q = project(camera, compose_reflections(seq, mirror_list).apply(p0));
    std::size_t nearest = candidates.size();
    double nearest_distance = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double dist = (candidates[c].vec() - q.vec()).norm();
      if (dist < nearest_distance) {
        nearest_distance = dist;
        nearest = c;
      }
    }
    if (nearest == candidates.size() || nearest_distance > distance_threshold) {
      continue;
    }
    out.matching_cost += nearest_distance;
    used[nearest] = true;
    auto it = best_distance.find(nearest);
    if (it == best_distance.end() || nearest_distance < it->second) {
      best_distance[nearest] = nearest_distance;
      out.labels[nearest] = seq;
    }
  }
  out.matched = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
  out.recall = out.synthesized == 0
                   ? 0.0
                   : static_cast<double>(out.matched) / static_cast<double>(out.synthesized);
  return out;
}

bool is_true_structure(const BaseStructureHypothesis& hypothesis,
                       std::span<const ReflectionSequence> truth) {
  const auto& d = hypothesis.doublets;
  if (d.empty() || !truth[d[0].un_reflected].empty() || truth[d[0].reflected].order() != 1) {
    return false;
  }
  const int pivot = truth[d[0].reflected].outermost();
  for (std::size_t k = 1; k < d.size(); ++k) {
    const auto& a = truth[d[k].un_reflected];
    if (a.order() != 1 || a.outermost() == pivot || truth[d[k].reflected] != a.reflected_by(pivot)) {
      return false;
    }
  }
  return true;
}

PruningCounts& PruningCounts::operator+=(const PruningCounts& other) {
  total += other.total;
  kpc += other.kpc;
  prop1 += other.prop1;
  prop2 += other.prop2;
  joint += other.joint;
  all += other.all;
  return *this;
}

double AssignmentOptions::effective_kpc_threshold() const {
  return kpc_threshold.value_or(std::max(0.005, 0.006 * sigma));
}

double AssignmentOptions::effective_match_threshold() const {
  return match_threshold.value_or(std::max(5.0, 3.0 * sigma));
}

HypothesisEvaluation evaluate_hypothesis(const BaseStructureHypothesis& hypothesis,
                                         std::span<const NormalizedPoint> candidates,
                                         std::size_t num_mirrors, double kpc_threshold) {
  HypothesisEvaluation out;
  std::vector<NormalizedPair> pairs;
  pairs.reserve(hypothesis.doublets.size());
  for (const auto& d : hypothesis.doublets) {
    pairs.emplace_back(candidates[d.un_reflected], candidates[d.reflected]);
  }
  NormalEstimate normal;
  try {
    normal = normal_from_doublets(pairs);
  } catch (const Error&) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }
  out.residual = normal.residual;
  out.kpc = normal.residual < kpc_threshold;

  try {
    const Mirror pivot = resolve_normal_sign(normal.normal, pairs[0]);
    const Triangulation base = triangulate_doublet(pairs[0].first, pairs[0].second,
                                                   pivot.normal(), pivot.distance());
    std::vector<Mirror> mirrors(num_mirrors, pivot);
    std::vector<Point3> first(num_mirrors);
    first[static_cast<std::size_t>(hypothesis.pivot_mirror - 1)] = base.reflected;
    for (std::size_t k = 1; k < pairs.size(); ++k) {
      const Triangulation t =
          triangulate_doublet(pairs[k].first, pairs[k].second, pivot.normal(), pivot.distance());
      if (!(t.depth > 0.0) || !(t.reflected_depth > 0.0)) {
        return out;
      }
      const auto m = static_cast<std::size_t>(hypothesis.partner_mirror(k) - 1);
      first[m] = t.point;
      mirrors[m] = mirror_from_point_pair(base.point, t.point);
    }
    const PropositionCheck check = check_propositions(base.point, first, mirrors);
    out.prop1 = check.base_closest;
    out.prop2 = check.mirrors_facing;
    out.mirrors = std::move(mirrors);
    out.p0 = base.point;
  } catch (const Error&) {
    out.prop1 = false;
    out.prop2 = false;
  }
  return out;
}

namespace {

struct Candidate {
  bool valid = false;
  double recall = 0.0;
  std::size_t matched = 0;
  double residual = 0.0;
  std::uint64_t index = 0;
  BaseStructureHypothesis hypothesis;
  HypothesisEvaluation evaluation;
  Propagation propagation;
};

bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) {
    return a.valid;
  }
  if (!a.valid) {
    return false;
  }
  if (a.recall != b.recall) {
    return a.recall > b.recall;
  }
  if (a.matched != b.matched) {
    return a.matched > b.matched;
  }
  if (a.residual != b.residual) {
    return a.residual < b.residual;
  }
  return a.index < b.index;
}

std::vector<NormalizedPoint> normalize_all(const CameraIntrinsics& camera,
                                           std::span<const Pixel2> pixels) {
  std::vector<NormalizedPoint> out;
  out.reserve(pixels.size());
  for (const auto& q : pixels) {
    out.push_back(normalize(camera, q));
  }
  return out;
}

// Visits every hypothesis whose base is one of `bases`, in lexicographic order.
template <typename Fn>
void visit_bases(std::size_t n, std::size_t num_mirrors, std::span<const std::size_t> bases,
                 Fn&& fn) {
  const std::size_t k = 2 * num_mirrors;
  const std::uint64_t per_base = permutations(n - 1, k - 1);
  for (std::size_t base : bases) {
    auto tuple = first_tuple(k, base);
    std::uint64_t index = base * per_base;
    do {
      fn(index++, BaseStructureEnumerator::from_tuple(tuple, num_mirrors));
    } while (advance_tuple(tuple, n, 1));
  }
}

// Splits the base indices round-robin across threads and runs `work(thread, bases)`.
template <typename Work>
void run_partitioned(std::size_t n, unsigned threads, Work&& work) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::vector<std::size_t>> parts(threads);
  for (std::size_t b = 0; b < n; ++b) {
    parts[b % threads].push_back(b);
  }
  if (threads == 1) {
    work(0u, std::span<const std::size_t>(parts[0]));
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] { work(t, std::span<const std::size_t>(parts[t])); });
  }
  for (auto& th : pool) {
    th.join();
  }
}

void validate_options(std::span<const Pixel2> candidates, const AssignmentOptions& options) {
  options.camera.validate();
  if (options.num_mirrors < 2) {
    throw InvalidInput("chamber assignment needs at least two mirrors");
  }
  if (options.max_order < 1) {
    throw InvalidInput("max_order must be at least 1");
  }
  if (!(options.sigma >= 0.0) || !(options.effective_kpc_threshold() > 0.0) ||
      !(options.effective_match_threshold() > 0.0)) {
    throw InvalidInput("sigma must be non-negative and thresholds positive");
  }
  for (const auto& q : candidates) {
    if (!std::isfinite(q.u) || !std::isfinite(q.v)) {
      throw InvalidInput("candidate pixels must be finite");
    }
  }
}

void tally(PruningCounts& counts, const HypothesisEvaluation& e) {
  ++counts.total;
  counts.kpc += e.kpc ? 1 : 0;
  counts.prop1 += e.prop1 ? 1 : 0;
  counts.prop2 += e.prop2 ? 1 : 0;
  counts.joint += (e.prop1 && e.prop2) ? 1 : 0;
  counts.all += e.survives() ? 1 : 0;
}

}  // namespace

PruningCounts count_pruning(std::span<const Pixel2> candidates, const AssignmentOptions& options,
                            const SurvivorVisitor& on_survivor) {
  validate_options(candidates, options);
  const auto normalized = normalize_all(options.camera, candidates);
  const std::size_t n = candidates.size();
  if (n < 2 * options.num_mirrors) {
    return {};
  }
  std::vector<std::size_t> bases(n);
  for (std::size_t b = 0; b < n; ++b) {
    bases[b] = b;
  }
  PruningCounts counts;
  visit_bases(n, options.num_mirrors, bases,
              [&](std::uint64_t index, const BaseStructureHypothesis& h) {
    const auto e = evaluate_hypothesis(h, normalized, options.num_mirrors, options.effective_kpc_threshold());
    tally(counts, e);
    if (e.survives() && on_survivor) {
      on_survivor(index, h, e);
    }
  });
  return counts;
}

AssignmentResult assign_chambers(std::span<const Pixel2> candidates,
                                 const AssignmentOptions& options) {
  validate_options(candidates, options);
  const std::size_t n = candidates.size();
  if (n < 2 * options.num_mirrors) {
    throw NoSolution("fewer candidates than a base structure needs", {});
  }
  const auto normalized = normalize_all(options.camera, candidates);
  const double match_threshold = options.effective_match_threshold();

  std::vector<Candidate> best(std::max(1u, options.threads));
  std::vector<PruningCounts> counts(best.size());
  run_partitioned(n, options.threads, [&](unsigned t, std::span<const std::size_t> bases) {
    visit_bases(n, options.num_mirrors, bases,
                [&](std::uint64_t index, const BaseStructureHypothesis& h) {
                  auto e = evaluate_hypothesis(h, normalized, options.num_mirrors,
                                               options.effective_kpc_threshold());
                  tally(counts[t], e);
                  if (!e.survives()) {
                    return;
                  }
                  Candidate c;
                  c.valid = true;
                  c.index = index;
                  c.residual = e.residual;
                  c.propagation = propagate_labels(options.camera, e.mirrors, e.p0,
                                                   options.max_order, candidates, match_threshold);
                  c.recall = c.propagation.recall;
                  c.matched = c.propagation.matched;
                  if (better(c, best[t])) {
                    c.hypothesis = h;
                    c.evaluation = std::move(e);
                    best[t] = std::move(c);
                  }
                });
  });

  PruningCounts total;
  Candidate winner;
  for (std::size_t t = 0; t < best.size(); ++t) {
    total += counts[t];
    if (better(best[t], winner)) {
      winner = std::move(best[t]);
    }
  }
  if (!winner.valid) {
    throw NoSolution("no base-structure hypothesis survived pruning", total);
  }
  AssignmentResult out;
  out.labels = std::move(winner.propagation.labels);
  out.mirrors = std::move(winner.evaluation.mirrors);
  out.p0 = winner.evaluation.p0;
  out.recall = winner.recall;
  out.residual = winner.residual;
  out.matched = winner.matched;
  out.hypothesis_index = winner.index;
  out.hypothesis = std::move(winner.hypothesis);
  out.pruning = total;
  return out;
}

}  // namespace kaleido
