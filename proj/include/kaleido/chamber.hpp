#pragma once

#include "kaleido/errors.hpp"
#include "kaleido/geometry.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace kaleido {

/// Pair of candidate indices related by one reflection: `reflected` is the image of
/// `un_reflected` in the shared mirror.
struct Doublet {
  std::size_t un_reflected = 0;
  std::size_t reflected = 0;
};

/// N doublets sharing the pivot mirror j: <q0, q_j> first, then <q_i, q_ji> for every
/// i != j in increasing mirror order.
struct BaseStructureHypothesis {
  std::size_t base = 0;
  int pivot_mirror = 1;
  std::vector<Doublet> doublets;

  /// Mirror index (1-based) hypothesized for the un-reflected member of doublet k.
  int partner_mirror(std::size_t k) const;
};

/// Ordered selections of 2N distinct candidates, in lexicographic order of the tuple
/// (q0, q_j, q_i1, q_j i1, q_i2, q_j i2, ...). Mirror indices are free labels, so the
/// pivot is always labeled 1; every physical pivot choice is covered by the tuple
/// position it occupies.
class BaseStructureEnumerator {
 public:
  BaseStructureEnumerator(std::size_t num_candidates, std::size_t num_mirrors);

  /// num_candidates! / (num_candidates - 2N)!, or 0 when there are too few candidates.
  std::uint64_t count() const { return count_; }

  /// Fills `out` with the next hypothesis; false once exhausted.
  bool next(BaseStructureHypothesis& out);

  /// Interprets a tuple of 2N candidate indices as a base structure.
  static BaseStructureHypothesis from_tuple(std::span<const std::size_t> tuple,
                                            std::size_t num_mirrors);

 private:
  std::size_t num_candidates_;
  std::size_t num_mirrors_;
  std::uint64_t count_;
  std::vector<std::size_t> tuple_;
  bool started_ = false;
  bool done_ = false;
};

struct NormalEstimate {
  Vec3 normal = Vec3::Zero();
  /// Smallest singular value over the sum of all three.
  double residual = 0.0;
  Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
};

using NormalizedPair = std::pair<NormalizedPoint, NormalizedPoint>;

/// Null vector of the stacked KPC rows. Fewer than three rows are zero-padded so the
/// three singular values are always defined. Throws Degenerate when the two smallest
/// singular values are within 1e-9 (relative to the largest) of each other.
NormalEstimate normal_from_doublets(std::span<const NormalizedPair> doublets);

struct Triangulation {
  Point3 point;
  Point3 reflected;
  double depth = 0.0;
  double reflected_depth = 0.0;
};

/// Least-squares depths of the doublet <q, q'> given the mirror:
/// [H x | -x'] (lambda, lambda')^T = 2 d n.
Triangulation triangulate_doublet(const NormalizedPoint& q, const NormalizedPoint& q_reflected,
                                  const Vec3& normal, double distance);

/// Picks the sign of `normal` that triangulates the doublet in front of the camera,
/// with the distance fixed to 1. Throws Infeasible when neither sign does.
Mirror resolve_normal_sign(const Vec3& normal, const NormalizedPair& doublet);

/// Mirror bisecting a point and its reflection; throws InvalidInput for coincident points.
Mirror mirror_from_point_pair(const Point3& p, const Point3& p_reflected);

struct PropositionCheck {
  bool base_closest = false;   // |p0| < |p_i| for all first reflections
  bool mirrors_facing = false; // n_i^T n_j < 0 for all pairs
  std::string reason;

  bool passed() const { return base_closest && mirrors_facing; }
};

PropositionCheck check_propositions(const Point3& p0, std::span<const Point3> first_reflections,
                                    std::span<const Mirror> mirrors);

struct Propagation {
  /// Candidate index -> label of the closest synthesized projection matched to it.
  std::map<std::size_t, ReflectionSequence> labels;
  std::size_t synthesized = 0;  // |Q^|
  std::size_t matched = 0;      // |R_c|
  double recall = 0.0;
  double matching_cost = 0.0;
};

/// Synthesizes every visible reflection of p0 up to max_order and assigns each one its
/// nearest candidate within `distance_threshold` pixels (ties go to the lower index).
Propagation propagate_labels(const CameraIntrinsics& camera, std::span<const Mirror> mirrors,
                             const Point3& p0, int max_order, std::span<const Pixel2> candidates,
                             double distance_threshold);

struct PruningCounts {
  std::uint64_t total = 0;
  std::uint64_t kpc = 0;    // feasibility score below threshold
  std::uint64_t prop1 = 0;  // base chamber closest
  std::uint64_t prop2 = 0;  // mirrors facing
  std::uint64_t joint = 0;  // prop1 and prop2
  std::uint64_t all = 0;    // all three

  PruningCounts& operator+=(const PruningCounts& other);
};

struct AssignmentOptions {
  CameraIntrinsics camera;
  std::size_t num_mirrors = 3;
  int max_order = 2;
  /// Defaults to max(0.005, 0.006 sigma) when unset.
  std::optional<double> kpc_threshold;
  /// Defaults to max(5 px, 3 sigma) when unset.
  std::optional<double> match_threshold;
  double sigma = 0.0;
  unsigned threads = 1;

  double effective_kpc_threshold() const;
  double effective_match_threshold() const;
};

/// Outcome of testing one hypothesis against the three pruning rules.
struct HypothesisEvaluation {
  bool kpc = false;
  bool prop1 = false;
  bool prop2 = false;
  double residual = 0.0;
  std::vector<Mirror> mirrors;  // d_1 = 1; empty when reconstruction failed
  Point3 p0 = Point3::Zero();

  bool survives() const { return kpc && prop1 && prop2; }
};

HypothesisEvaluation evaluate_hypothesis(const BaseStructureHypothesis& hypothesis,
                                         std::span<const NormalizedPoint> candidates,
                                         std::size_t num_mirrors, double kpc_threshold);

struct AssignmentResult {
  std::map<std::size_t, ReflectionSequence> labels;
  std::vector<Mirror> mirrors;
  Point3 p0 = Point3::Zero();
  double recall = 0.0;
  double residual = 0.0;
  std::size_t matched = 0;
  std::uint64_t hypothesis_index = 0;
  BaseStructureHypothesis hypothesis;
  PruningCounts pruning;
};

/// Raised when no hypothesis survives pruning; carries the per-stage counts.
class NoSolution : public Error {
 public:
  NoSolution(const std::string& what, PruningCounts counts) : Error(what), counts_(counts) {}
  const PruningCounts& counts() const { return counts_; }

 private:
  PruningCounts counts_;
};

/// Callback invoked for every hypothesis that survives all prunes.
using SurvivorVisitor = std::function<void(std::uint64_t index, const BaseStructureHypothesis&,
                                           const HypothesisEvaluation&)>;

/// True when the hypothesis picks out a genuine base structure under the given true
/// labels of the candidates (mirror indices may be permuted).
bool is_true_structure(const BaseStructureHypothesis& hypothesis,
                       std::span<const ReflectionSequence> truth);

/// Counts hypotheses passing each pruning rule without propagating labels.
PruningCounts count_pruning(std::span<const Pixel2> candidates, const AssignmentOptions& options,
                            const SurvivorVisitor& on_survivor = {});

/// Exhaustive base-structure search. The winner maximizes recall, then the number of
/// matched candidates, then minimizes the residual, then the enumeration index.
AssignmentResult assign_chambers(std::span<const Pixel2> candidates,
                                 const AssignmentOptions& options);

}  // namespace kaleido
