#include "kaleido/calibration.hpp"

#include "kaleido/chamber.hpp"
#include "kaleido/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace kaleido {

CalibrationEstimate CalibrationEstimate::normalized() const {
  if (mirrors.empty()) {
    throw InvalidInput("estimate has no mirrors");
  }
  const double scale = 1.0 / mirrors.front().distance();
  CalibrationEstimate out;
  for (const auto& m : mirrors) {
    out.mirrors.emplace_back(m.normal(), m.distance() * scale);
  }
  for (const auto& p : points) {
    out.points.push_back(p * scale);
  }
  out.unit_first_distance = true;
  return out;
}

std::size_t landmark_count(const std::vector<LabeledProjection>& observations) {
  std::size_t n = 0;
  for (const auto& obs : observations) {
    n = std::max(n, obs.landmark + 1);
  }
  return n;
}

namespace {

using LabelIndex = std::vector<std::map<ReflectionSequence, std::size_t>>;

LabelIndex index_labels(const std::vector<LabeledProjection>& observations) {
  LabelIndex index(landmark_count(observations));
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto& obs = observations[k];
    if (!index[obs.landmark].emplace(obs.label, k).second) {
      throw InvalidInput("duplicate label " + obs.label.to_string(10) + " for landmark " +
                         std::to_string(obs.landmark));
    }
  }
  return index;
}

std::vector<NormalizedPair> doublets_of(const CameraIntrinsics& camera,
                                        const std::vector<LabeledProjection>& observations,
                                        const LabelIndex& index, int mirror) {
  std::vector<NormalizedPair> out;
  for (const auto& labels : index) {
    for (const auto& [label, k] : labels) {
      if (!label.empty() && label.outermost() == mirror) {
        continue;
      }
      const auto it = labels.find(label.reflected_by(mirror));
      if (it == labels.end()) {
        continue;
      }
      out.emplace_back(normalize(camera, observations[k].pixel),
                       normalize(camera, observations[it->second].pixel));
    }
  }
  return out;
}

void validate_labels(const std::vector<LabeledProjection>& observations,
                     std::size_t num_mirrors) {
  for (const auto& obs : observations) {
    obs.label.validate(num_mirrors);
    if (!std::isfinite(obs.pixel.u) || !std::isfinite(obs.pixel.v)) {
      throw InvalidInput("observation pixel is not finite");
    }
  }
}

}  // namespace

Eigen::MatrixXd kpc_system(const CameraIntrinsics& camera,
                           const std::vector<LabeledProjection>& observations, int mirror) {
  const auto doublets = doublets_of(camera, observations, index_labels(observations), mirror);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(doublets.size()), 3);
  for (std::size_t k = 0; k < doublets.size(); ++k) {
    rows.row(static_cast<Eigen::Index>(k)) = kpc_row(doublets[k].first, doublets[k].second);
  }
  return rows;
}

std::vector<Vec3> estimate_normals_linear(const CameraIntrinsics& camera, std::size_t num_mirrors,
                                          const std::vector<LabeledProjection>& observations) {
  camera.validate();
  validate_labels(observations, num_mirrors);
  const auto index = index_labels(observations);
  std::vector<Vec3> normals;
  for (int i = 1; i <= static_cast<int>(num_mirrors); ++i) {
    const auto doublets = doublets_of(camera, observations, index, i);
    if (doublets.size() < 2) {
      throw InsufficientData("mirror " + std::to_string(i) + " has " +
                             std::to_string(doublets.size()) + " doublet(s); two are required");
    }
    Vec3 n = normal_from_doublets(doublets).normal;
    int votes = 0;
    for (const auto& [q, q_reflected] : doublets) {
      try {
        const auto t = triangulate_doublet(q, q_reflected, n, 1.0);
        if (t.depth > 0.0 && t.reflected_depth > 0.0) {
          ++votes;
        } else if (t.depth < 0.0 && t.reflected_depth < 0.0) {
          --votes;
        }
      } catch (const Degenerate&) {
      }
    }
    if (votes == 0) {
      throw Infeasible("cannot orient the normal of mirror " + std::to_string(i));
    }
    normals.push_back(votes > 0 ? n : Vec3(-n));
  }
  return normals;
}

Eigen::MatrixXd distance_system(const CameraIntrinsics& camera, const std::vector<Vec3>& normals,
                                const std::vector<LabeledProjection>& observations) {
  const auto num_mirrors = normals.size();
  validate_labels(observations, num_mirrors);
  const auto num_landmarks = static_cast<Eigen::Index>(landmark_count(observations));
  const Eigen::Index cols = 3 * num_landmarks + static_cast<Eigen::Index>(num_mirrors);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * static_cast<Eigen::Index>(observations.size()), cols);
  for (std::size_t k = 0; k < observations.size(); ++k) {
    const auto& obs = observations[k];
    // p_s = H_s p0 - 2 sum_m d_{i_m} H_{i_1..i_{m-1}} n_{i_m}
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, cols);
    Mat3 prefix = Mat3::Identity();
    for (int m : obs.label.indices()) {
      const Vec3& n = normals[static_cast<std::size_t>(m - 1)];
      A.col(3 * num_landmarks + m - 1) += -2.0 * prefix * n;
      prefix = prefix * (Mat3::Identity() - 2.0 * n * n.transpose());
    }
    A.block<3, 3>(0, 3 * static_cast<Eigen::Index>(obs.landmark)) = prefix;
    const Mat3 x = skew(normalize(camera, obs.pixel).homogeneous());
    K.middleRows<3>(3 * static_cast<Eigen::Index>(k)) = x * A;
  }
  return K;
}

CalibrationEstimate estimate_distances_linear(const CameraIntrinsics& camera,
                                              const std::vector<Vec3>& normals,
                                              const std::vector<LabeledProjection>& observations) {
  camera.validate();
  if (normals.size() < 2) {
    throw InvalidInput("at least two mirror normals are required");
  }
  const Eigen::MatrixXd K = distance_system(camera, normals, observations);
  if (K.rows() < K.cols()) {
    throw InsufficientData("distance system has fewer equations than unknowns");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const Eigen::Index last = s.size() - 1;
  const double ratio = (s(last) * s(last)) / (s(last - 1) * s(last - 1));
  if (!(ratio <= 0.5)) {
    throw Degenerate("distance system has no isolated null vector");
  }
  Eigen::VectorXd v = svd.matrixV().col(last);

  const auto num_landmarks = landmark_count(observations);
  const auto num_mirrors = normals.size();
  int votes = 0;
  for (std::size_t l = 0; l < num_landmarks; ++l) {
    const double z = v(3 * static_cast<Eigen::Index>(l) + 2);
    votes += z > 0.0 ? 1 : (z < 0.0 ? -1 : 0);
  }
  if (votes < 0) {
    v = -v;
  }
  const double d1 = v(3 * static_cast<Eigen::Index>(num_landmarks));
  if (!(d1 > 0.0)) {
    throw Infeasible("first mirror distance is not positive");
  }
  v /= d1;

  CalibrationEstimate out;
  for (std::size_t l = 0; l < num_landmarks; ++l) {
    const Point3 p = v.segment<3>(3 * static_cast<Eigen::Index>(l));
    if (!(p.z() > 0.0)) {
      throw Infeasible("landmark " + std::to_string(l) + " reconstructs behind the camera");
    }
    out.points.push_back(p);
  }
  for (std::size_t i = 0; i < num_mirrors; ++i) {
    const double d = v(3 * static_cast<Eigen::Index>(num_landmarks) + static_cast<Eigen::Index>(i));
    if (!(d > 0.0)) {
      throw Infeasible("distance of mirror " + std::to_string(i + 1) + " is not positive");
    }
    out.mirrors.emplace_back(normals[i].normalized(), d);
  }
  out.unit_first_distance = true;
  return out;
}

CalibrationEstimate calibrate_linear(const CameraIntrinsics& camera, std::size_t num_mirrors,
                                     const std::vector<LabeledProjection>& observations) {
  return estimate_distances_linear(camera, estimate_normals_linear(camera, num_mirrors, observations),
                                   observations);
}

ReprojectionReport reprojection_error(const CameraIntrinsics& camera,
                                      const CalibrationEstimate& estimate,
                                      const std::vector<LabeledProjection>& observations) {
  validate_labels(observations, estimate.mirrors.size());
  if (landmark_count(observations) > estimate.points.size()) {
    throw InvalidInput("observation references a landmark without an estimate");
  }
  ReprojectionReport report;
  report.order.resize(observations.size());
  std::iota(report.order.begin(), report.order.end(), std::size_t{0});
  std::stable_sort(report.order.begin(), report.order.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = observations[a];
    const auto& ob = observations[b];
    if (oa.landmark != ob.landmark) {
      return oa.landmark < ob.landmark;
    }
    return oa.label < ob.label;
  });
  const double inf = std::numeric_limits<double>::infinity();
  report.residuals.resize(2 * static_cast<Eigen::Index>(observations.size()));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < report.order.size(); ++k) {
    const auto& obs = observations[report.order[k]];
    const Point3 p = compose_reflections(obs.label, estimate.mirrors).apply(estimate.points[obs.landmark]);
    Vec2 r(inf, inf);
    if (p.z() > 0.0) {
      r = obs.pixel.vec() - project(camera, p).vec();
    }
    report.residuals.segment<2>(2 * static_cast<Eigen::Index>(k)) = r;
    const double mag = p.z() > 0.0 ? r.norm() : inf;
    report.magnitudes.push_back(mag);
    sum += mag;
    sum_sq += mag * mag;
  }
  if (!observations.empty()) {
    const auto n = static_cast<double>(observations.size());
    report.mean = sum / n;
    report.rms = std::sqrt(sum_sq / n);
  }
  return report;
}

namespace {

Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n) {
  Eigen::Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Vec3 b1 = n.cross(Vec3::Unit(axis)).normalized();
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = b1;
  B.col(1) = n.cross(b1);
  return B;
}

}  // namespace

KaleidoscopicProblem::KaleidoscopicProblem(const CameraIntrinsics& camera,
                                           std::vector<LabeledProjection> observations,
                                           const CalibrationEstimate& base)
    : camera_(camera), observations_(std::move(observations)) {
  camera_.validate();
  const auto unit = base.normalized();
  validate_labels(observations_, unit.mirrors.size());
  num_landmarks_ = unit.points.size();
  if (landmark_count(observations_) > num_landmarks_) {
    throw InvalidInput("observation references a landmark without an estimate");
  }
  for (const auto& m : unit.mirrors) {
    base_normals_.push_back(m.normal());
    tangents_.push_back(tangent_basis(m.normal()));
    base_distances_.push_back(m.distance());
  }
  base_points_ = unit.points;
}

Eigen::Index KaleidoscopicProblem::num_parameters() const {
  const auto n = static_cast<Eigen::Index>(base_normals_.size());
  return 3 * static_cast<Eigen::Index>(num_landmarks_) + 3 * n - 1;
}

Eigen::VectorXd KaleidoscopicProblem::initial_parameters() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(num_parameters());
  for (std::size_t l = 0; l < num_landmarks_; ++l) {
    x.segment<3>(3 * static_cast<Eigen::Index>(l)) = base_points_[l];
  }
  const Eigen::Index off_d =
      3 * static_cast<Eigen::Index>(num_landmarks_) + 2 * static_cast<Eigen::Index>(base_normals_.size());
  for (std::size_t i = 1; i < base_distances_.size(); ++i) {
    x(off_d + static_cast<Eigen::Index>(i) - 1) = base_distances_[i];
  }
  return x;
}

Eigen::VectorXd KaleidoscopicProblem::residuals(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  evaluate(x, &r, nullptr);
  return r;
}

Eigen::MatrixXd KaleidoscopicProblem::jacobian(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  evaluate(x, &r, &jac);
  return jac;
}

CalibrationEstimate KaleidoscopicProblem::estimate(const Eigen::VectorXd& x) const {
  const auto num_mirrors = base_normals_.size();
  const Eigen::Index off_n = 3 * static_cast<Eigen::Index>(num_landmarks_);
  const Eigen::Index off_d = off_n + 2 * static_cast<Eigen::Index>(num_mirrors);
  CalibrationEstimate out;
  for (std::size_t l = 0; l < num_landmarks_; ++l) {
    out.points.push_back(x.segment<3>(3 * static_cast<Eigen::Index>(l)));
  }
  for (std::size_t i = 0; i < num_mirrors; ++i) {
    const Vec3 v = base_normals_[i] + tangents_[i] * x.segment<2>(off_n + 2 * static_cast<Eigen::Index>(i));
    const double d = i == 0 ? 1.0 : x(off_d + static_cast<Eigen::Index>(i) - 1);
    if (!(d > 0.0)) {
      throw Infeasible("refined distance of mirror " + std::to_string(i + 1) + " is not positive");
    }
    out.mirrors.emplace_back(v.normalized(), d);
  }
  out.unit_first_distance = true;
  return out;
}

void KaleidoscopicProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* r,
                                    Eigen::MatrixXd* jac) const {
  if (x.size() != num_parameters()) {
    throw InvalidInput("parameter vector has the wrong size");
  }
  const auto num_mirrors = base_normals_.size();
  const Eigen::Index P = num_parameters();
  const Eigen::Index off_n = 3 * static_cast<Eigen::Index>(num_landmarks_);
  const Eigen::Index off_d = off_n + 2 * static_cast<Eigen::Index>(num_mirrors);

  std::vector<Vec3> normals(num_mirrors);
  std::vector<Eigen::Matrix<double, 3, 2>> dn(num_mirrors);
  std::vector<double> distances(num_mirrors, 1.0);
  for (std::size_t i = 0; i < num_mirrors; ++i) {
    const Vec3 v = base_normals_[i] + tangents_[i] * x.segment<2>(off_n + 2 * static_cast<Eigen::Index>(i));
    const double len = v.norm();
    normals[i] = v / len;
    dn[i] = (Mat3::Identity() - normals[i] * normals[i].transpose()) / len * tangents_[i];
    if (i > 0) {
      distances[i] = x(off_d + static_cast<Eigen::Index>(i) - 1);
    }
  }

  r->resize(num_residuals());
  if (jac != nullptr) {
    jac->setZero(num_residuals(), P);
  }
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::Matrix<double, 3, Eigen::Dynamic> J(3, P);
  for (std::size_t k = 0; k < observations_.size(); ++k) {
    const auto& obs = observations_[k];
    const Eigen::Index col_p = 3 * static_cast<Eigen::Index>(obs.landmark);
    Point3 p = x.segment<3>(col_p);
    if (jac != nullptr) {
      J.setZero();
      J.middleCols<3>(col_p).setIdentity();
    }
    const auto& indices = obs.label.indices();
    for (auto it = indices.rbegin(); it != indices.rend(); ++it) {
      const auto m = static_cast<std::size_t>(*it - 1);
      const Vec3& n = normals[m];
      const double d = distances[m];
      const double s = n.dot(p) + d;
      if (jac != nullptr) {
        const Mat3 H = Mat3::Identity() - 2.0 * n * n.transpose();
        const Mat3 dy_dn = -2.0 * (s * Mat3::Identity() + n * p.transpose());
        J = (H * J).eval();
        J.middleCols<2>(off_n + 2 * static_cast<Eigen::Index>(m)) += dy_dn * dn[m];
        if (m > 0) {
          J.col(off_d + static_cast<Eigen::Index>(m) - 1) += -2.0 * n;
        }
      }
      p = p - 2.0 * s * n;
    }
    const Eigen::Index row = 2 * static_cast<Eigen::Index>(k);
    if (!(p.z() > 0.0)) {
      r->segment<2>(row).setConstant(inf);
      continue;
    }
    const double iz = 1.0 / p.z();
    r->segment<2>(row) = obs.pixel.vec() - Vec2(camera_.fx * p.x() * iz + camera_.cx,
                                                 camera_.fy * p.y() * iz + camera_.cy);
    if (jac != nullptr) {
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << camera_.fx * iz, 0.0, -camera_.fx * p.x() * iz * iz,
             0.0, camera_.fy * iz, -camera_.fy * p.y() * iz * iz;
      jac->middleRows<2>(row) = -dpi * J;
    }
  }
}

BundleResult kaleidoscopic_bundle_adjustment(const CameraIntrinsics& camera,
                                             const CalibrationEstimate& initial,
                                             const std::vector<LabeledProjection>& observations,
                                             const BundleOptions& options) {
  const KaleidoscopicProblem problem(camera, observations, initial);
  Eigen::VectorXd x = problem.initial_parameters();
  Eigen::VectorXd r = problem.residuals(x);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) {
    throw InvalidInitialization("initial estimate places a virtual point behind the camera");
  }
  BundleResult result;
  result.initial_cost = cost;
  result.cost_history.push_back(cost);

  double lambda = options.initial_damping;
  while (result.iterations < options.max_iterations) {
    if (cost == 0.0) {
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd J = problem.jacobian(x);
    ++result.iterations;
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      result.converged = true;
      break;
    }
    // Marquardt scaling by diag(J^T J), floored so frozen directions stay regular.
    const Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300));
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = A;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = problem.residuals(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double decrease = (cost - cost_new) / cost;
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda / 10.0, 1e-15);
        result.cost_history.push_back(cost);
        accepted = true;
        if (decrease < options.relative_tolerance ||
            step.norm() <= options.parameter_tolerance * (x.norm() + options.parameter_tolerance)) {
          result.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at machine precision.
      result.converged = true;
    }
    if (result.converged) {
      break;
    }
  }
  result.final_cost = cost;
  result.estimate = problem.estimate(x);
  return result;
}

}  // namespace kaleido
