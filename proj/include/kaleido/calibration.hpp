#pragma once

#include "kaleido/geometry.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace kaleido {

/// A labeled 2D projection of landmark `landmark`.
struct LabeledProjection {
  ReflectionSequence label;
  Pixel2 pixel;
  std::size_t landmark = 0;
};

struct CalibrationEstimate {
  std::vector<Mirror> mirrors;
  /// One p0 per landmark.
  std::vector<Point3> points;
  /// True once the scale gauge d_1 = 1 has been applied.
  bool unit_first_distance = false;

  /// Rescales points and distances so that d_1 = 1.
  CalibrationEstimate normalized() const;
};

/// Number of landmarks referenced by the observations (max index + 1).
std::size_t landmark_count(const std::vector<LabeledProjection>& observations);

/// Rows of the KPC system for mirror `mirror` (1-based): one row per observed doublet
/// <q_s, q_{mirror s}> across all landmarks.
Eigen::MatrixXd kpc_system(const CameraIntrinsics& camera,
                           const std::vector<LabeledProjection>& observations, int mirror);

/// Per-mirror null vectors of the stacked KPC rows, signed so that the doublets
/// triangulate in front of the camera (majority vote over doublets).
/// Throws InsufficientData with fewer than two doublets for a mirror and Degenerate
/// when the rows do not pin the normal down (parallel mirrors).
std::vector<Vec3> estimate_normals_linear(const CameraIntrinsics& camera, std::size_t num_mirrors,
                                          const std::vector<LabeledProjection>& observations);

/// Collinearity system K (x_s cross p_s = 0 for every observation) in the unknowns
/// (p0 of each landmark, d_1..d_N). p_s is affine in those unknowns once the normals
/// are fixed.
Eigen::MatrixXd distance_system(const CameraIntrinsics& camera, const std::vector<Vec3>& normals,
                                const std::vector<LabeledProjection>& observations);

/// Smallest right singular vector of K, signed for positive depths and scaled to d_1 = 1.
/// Throws Degenerate when the two smallest eigenvalues of K^T K have ratio > 0.5 and
/// Infeasible when depths have mixed signs or a distance is not positive.
CalibrationEstimate estimate_distances_linear(const CameraIntrinsics& camera,
                                              const std::vector<Vec3>& normals,
                                              const std::vector<LabeledProjection>& observations);

/// Normals followed by distances.
CalibrationEstimate calibrate_linear(const CameraIntrinsics& camera, std::size_t num_mirrors,
                                     const std::vector<LabeledProjection>& observations);

struct ReprojectionReport {
  /// Observation indices in report order: per landmark, direct view first, then by
  /// reflection order and label.
  std::vector<std::size_t> order;
  /// Observed minus predicted pixel, two entries per observation in report order.
  Eigen::VectorXd residuals;
  /// Per-observation residual norm (infinite when the virtual point is behind the camera).
  std::vector<double> magnitudes;
  double mean = 0.0;  // average reprojection error
  double rms = 0.0;
};

ReprojectionReport reprojection_error(const CameraIntrinsics& camera,
                                      const CalibrationEstimate& estimate,
                                      const std::vector<LabeledProjection>& observations);

/// Least-squares problem over (p0 per landmark, a 2D tangent update per normal,
/// d_2..d_N). d_1 stays at 1. The normal of mirror i at parameters x is
/// normalize(n_i + B_i delta_i) where B_i spans the tangent plane of the base normal.
class KaleidoscopicProblem {
 public:
  KaleidoscopicProblem(const CameraIntrinsics& camera,
                       std::vector<LabeledProjection> observations,
                       const CalibrationEstimate& base);

  Eigen::Index num_parameters() const;
  Eigen::Index num_residuals() const { return 2 * static_cast<Eigen::Index>(observations_.size()); }

  /// Parameters of the base estimate (tangent updates zero).
  Eigen::VectorXd initial_parameters() const;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;
  /// Analytic Jacobian of residuals(x).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  CalibrationEstimate estimate(const Eigen::VectorXd& x) const;

 private:
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* r, Eigen::MatrixXd* jac) const;

  CameraIntrinsics camera_;
  std::vector<LabeledProjection> observations_;
  std::size_t num_landmarks_;
  std::vector<Vec3> base_normals_;
  std::vector<Eigen::Matrix<double, 3, 2>> tangents_;
  std::vector<double> base_distances_;
  std::vector<Point3> base_points_;
};

struct BundleOptions {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double relative_tolerance = 1e-12;
  /// Converged once an accepted step is this small relative to the parameter vector.
  double parameter_tolerance = 1e-10;
};

struct BundleResult {
  CalibrationEstimate estimate;
  int iterations = 0;
  bool converged = false;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Sum of squared residuals after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) refinement of all mirrors and points.
/// The initial estimate is rescaled to d_1 = 1 first. Throws InvalidInitialization
/// when the starting cost is not finite.
BundleResult kaleidoscopic_bundle_adjustment(const CameraIntrinsics& camera,
                                             const CalibrationEstimate& initial,
                                             const std::vector<LabeledProjection>& observations,
                                             const BundleOptions& options = {});

}  // namespace kaleido
