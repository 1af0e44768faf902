#pragma once

#include "kaleido/calibration.hpp"
#include "kaleido/geometry.hpp"

#include <cstddef>
#include <map>
#include <vector>

namespace kaleido {

/// perm[k] is the 1-based ground-truth index of estimated mirror k + 1, chosen over all
/// permutations to minimize the summed sign-folded normal angles.
std::vector<int> align_mirrors(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth);

/// Rewrites every mirror index through `perm`.
ReflectionSequence relabel(const ReflectionSequence& seq, const std::vector<int>& perm);

struct OrderAccuracy {
  std::vector<std::size_t> correct;  // per reflection order
  std::vector<std::size_t> total;
  /// correct / total; orders without any projection report 1.
  std::vector<double> accuracy;
};

/// Per-order labeling accuracy. `truth[c]` is the true label of candidate c; candidates
/// missing from `assigned` count as wrong. Assigned labels are mapped through `perm`
/// (empty means identity) before comparison.
OrderAccuracy metric_Em(const std::map<std::size_t, ReflectionSequence>& assigned,
                        const std::vector<ReflectionSequence>& truth, int max_order,
                        const std::vector<int>& perm = {});

/// Mean angle (radians) between corresponding normals, sign-folded.
double metric_En(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth);
/// Mean absolute distance difference after rescaling both sets to d_1 = 1.
double metric_Ed(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth);
/// Mean per-observation reprojection error in pixels.
double metric_Erep(const CameraIntrinsics& camera, const CalibrationEstimate& estimate,
                   const std::vector<LabeledProjection>& observations);

}  // namespace kaleido
