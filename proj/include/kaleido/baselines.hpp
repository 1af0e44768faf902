#pragma once

#include "kaleido/calibration.hpp"
#include "kaleido/geometry.hpp"

#include <map>
#include <utility>
#include <vector>

namespace kaleido {

using Correspondence = std::pair<std::size_t, Pixel2>;

/// Object of known geometry seen through the mirrors. Each chamber lists which
/// landmarks it observes and where.
struct ReferenceObject {
  std::vector<Point3> landmarks;
  std::map<ReflectionSequence, std::vector<Correspondence>> correspondences;
};

/// Apparent pose of the object in one chamber: x_cam = linear * x_obj + translation.
/// `linear` is orthogonal with determinant (-1)^order for a mirrored chamber.
struct ChamberPose {
  Mat3 linear = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double rms = 0.0;  // pixels, after refinement
};

/// Camera-frame positions of every landmark, per chamber.
using ChamberPoints = std::map<ReflectionSequence, std::vector<Point3>>;

/// Linear pose (plane homography for planar objects, DLT otherwise) refined by
/// minimizing the chamber's reprojection error. Planar objects need 4 correspondences,
/// non-planar ones 6. Throws InsufficientData or Degenerate.
ChamberPose estimate_chamber_pose(const CameraIntrinsics& camera,
                                  const std::vector<Point3>& landmarks,
                                  const std::vector<Correspondence>& correspondences,
                                  bool refine = true);

ChamberPoints estimate_pose(const CameraIntrinsics& camera, const ReferenceObject& reference,
                            bool refine = true);

/// Mirror normals from the summed displacement vectors and distances from the summed
/// midpoints over landmarks, for three mirrors. Needs chambers 0, i and ij for all i != j.
CalibrationEstimate baseline_calibrate(const ChamberPoints& points);

/// The four point pairs per mirror pair whose difference is orthogonal to n_i x n_j.
/// Indexed by pair (1,2), (2,3), (3,1).
std::vector<std::pair<ReflectionSequence, ReflectionSequence>> orthogonality_pairs(int i, int j);

/// Recovers the intersection directions m_ij, crosses them into normals and averages
/// the bisector distances of (p0, p_i) over landmarks.
CalibrationEstimate orthogonality_calibrate(const ChamberPoints& points);

}  // namespace kaleido
