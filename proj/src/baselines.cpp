#include "kaleido/baselines.hpp"

#include "kaleido/errors.hpp"

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>

namespace kaleido {

namespace {

Mat3 rotation_vector(const Vec3& w) {
  const double angle = w.norm();
  if (angle == 0.0) {
    return Mat3::Identity();
  }
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

// Similarity normalization: centroid to the origin, mean distance sqrt(dim).
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> conditioner(
    const std::vector<Eigen::Matrix<double, Dim, 1>>& pts) {
  Eigen::Matrix<double, Dim, 1> c = Eigen::Matrix<double, Dim, 1>::Zero();
  for (const auto& p : pts) {
    c += p;
  }
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) {
    mean += (p - c).norm();
  }
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0.0)) {
    throw Degenerate("correspondences are coincident");
  }
  const double s = std::sqrt(static_cast<double>(Dim)) / mean;
  Eigen::Matrix<double, Dim + 1, Dim + 1> T = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
  T.template topLeftCorner<Dim, Dim>() *= s;
  T.template topRightCorner<Dim, 1>() = -s * c;
  return T;
}

struct PoseResidual : Eigen::DenseFunctor<double> {
  PoseResidual(const CameraIntrinsics& camera, const std::vector<Point3>& landmarks,
               const std::vector<Correspondence>& correspondences, const Mat3& base)
      : Eigen::DenseFunctor<double>(6, 2 * static_cast<int>(correspondences.size())),
        camera(camera), landmarks(landmarks), correspondences(correspondences), base(base) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    const Mat3 A = base * rotation_vector(x.head<3>());
    for (std::size_t k = 0; k < correspondences.size(); ++k) {
      const auto& [index, pixel] = correspondences[k];
      const Point3 p = A * landmarks[index] + x.tail<3>();
      const auto row = static_cast<Eigen::Index>(2 * k);
      if (!(p.z() > 0.0)) {
        fvec.segment<2>(row).setConstant(1e6);
        continue;
      }
      fvec(row) = camera.fx * p.x() / p.z() + camera.cx - pixel.u;
      fvec(row + 1) = camera.fy * p.y() / p.z() + camera.cy - pixel.v;
    }
    return 0;
  }

  const CameraIntrinsics& camera;
  const std::vector<Point3>& landmarks;
  const std::vector<Correspondence>& correspondences;
  Mat3 base;
};

ChamberPose planar_pose(const std::vector<Point3>& landmarks,
                        const std::vector<Correspondence>& correspondences,
                        const std::vector<Vec2>& image, const Point3& centroid, const Mat3& frame) {
  std::vector<Vec2> plane;
  for (const auto& [index, pixel] : correspondences) {
    plane.push_back((frame.transpose() * (landmarks[index] - centroid)).head<2>());
  }
  const Mat3 Tp = conditioner<2>(plane);
  const Mat3 Ti = conditioner<2>(image);
  Eigen::MatrixXd M(2 * static_cast<Eigen::Index>(plane.size()), 9);
  for (std::size_t k = 0; k < plane.size(); ++k) {
    const Vec3 a = Tp * plane[k].homogeneous();
    const Vec3 b = Ti * image[k].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * k);
    M.row(r) << 0, 0, 0, -b.z() * a.transpose(), b.y() * a.transpose();
    M.row(r + 1) << b.z() * a.transpose(), 0, 0, 0, -b.x() * a.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(7) <= 1e-12 * s(0)) {
    throw Degenerate("plane correspondences are degenerate (collinear points)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 H;
  H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  H = Ti.inverse() * H * Tp;

  const double scale = 2.0 / (H.col(0).norm() + H.col(1).norm());
  Mat3 G = scale * H;
  if (G(2, 2) < 0.0) {
    G = -G;
  }
  Eigen::Matrix<double, 3, 2> R2 = G.leftCols<2>();
  Eigen::JacobiSVD<Eigen::MatrixXd> polar(Eigen::MatrixXd(R2), Eigen::ComputeThinU | Eigen::ComputeThinV);
  R2 = polar.matrixU() * polar.matrixV().transpose();
  Mat3 R;
  R << R2, R2.col(0).cross(R2.col(1));
  ChamberPose pose;
  pose.linear = R * frame.transpose();
  pose.translation = G.col(2) - pose.linear * centroid;
  return pose;
}

ChamberPose general_pose(const std::vector<Point3>& landmarks,
                         const std::vector<Correspondence>& correspondences,
                         const std::vector<Vec2>& image) {
  std::vector<Vec3> object;
  for (const auto& [index, pixel] : correspondences) {
    object.push_back(landmarks[index]);
  }
  const Mat4 To = conditioner<3>(object);
  const Mat3 Ti = conditioner<2>(image);
  Eigen::MatrixXd M(2 * static_cast<Eigen::Index>(object.size()), 12);
  for (std::size_t k = 0; k < object.size(); ++k) {
    const Eigen::Vector4d X = To * object[k].homogeneous();
    const Vec3 b = Ti * image[k].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * k);
    M.row(r) << Eigen::RowVector4d::Zero(), -b.z() * X.transpose(), b.y() * X.transpose();
    M.row(r + 1) << b.z() * X.transpose(), Eigen::RowVector4d::Zero(), -b.x() * X.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(10) <= 1e-12 * s(0)) {
    throw Degenerate("object correspondences are degenerate");
  }
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> P;
  P << v.segment<4>(0).transpose(), v.segment<4>(4).transpose(), v.segment<4>(8).transpose();
  P = Ti.inverse() * P * To;

  int votes = 0;
  for (const auto& X : object) {
    votes += (P.row(2) * X.homogeneous()) > 0.0 ? 1 : -1;
  }
  if (votes < 0) {
    P = -P;
  }
  Eigen::JacobiSVD<Mat3> polar(P.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = polar.singularValues().mean();
  ChamberPose pose;
  // Reflections are allowed: mirrored chambers come out with det = -1.
  pose.linear = polar.matrixU() * polar.matrixV().transpose();
  pose.translation = P.col(3) / scale;
  return pose;
}

double pose_rms(const CameraIntrinsics& camera, const std::vector<Point3>& landmarks,
                const std::vector<Correspondence>& correspondences, const ChamberPose& pose) {
  double sum = 0.0;
  for (const auto& [index, pixel] : correspondences) {
    const Point3 p = pose.linear * landmarks[index] + pose.translation;
    if (!(p.z() > 0.0)) {
      return std::numeric_limits<double>::infinity();
    }
    sum += (project(camera, p).vec() - pixel.vec()).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(correspondences.size()));
}

}  // namespace

ChamberPose estimate_chamber_pose(const CameraIntrinsics& camera,
                                  const std::vector<Point3>& landmarks,
                                  const std::vector<Correspondence>& correspondences, bool refine) {
  camera.validate();
  for (const auto& [index, pixel] : correspondences) {
    if (index >= landmarks.size()) {
      throw InvalidInput("correspondence references an unknown landmark");
    }
  }
  if (correspondences.size() < 4) {
    throw InsufficientData("pose estimation needs at least 4 correspondences");
  }
  std::vector<Point3> used;
  std::vector<Vec2> image;
  for (const auto& [index, pixel] : correspondences) {
    used.push_back(landmarks[index]);
    const NormalizedPoint x = normalize(camera, pixel);
    image.emplace_back(x.x, x.y);
  }
  Point3 centroid = Point3::Zero();
  for (const auto& p : used) {
    centroid += p;
  }
  centroid /= static_cast<double>(used.size());
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(used.size()), 3);
  for (std::size_t k = 0; k < used.size(); ++k) {
    centered.row(static_cast<Eigen::Index>(k)) = (used[k] - centroid).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> shape(centered, Eigen::ComputeFullV);
  const auto& sv = shape.singularValues();
  if (sv(1) <= 1e-9 * sv(0)) {
    throw Degenerate("landmarks are collinear");
  }

  ChamberPose pose;
  if (sv(2) <= 1e-9 * sv(0)) {
    pose = planar_pose(landmarks, correspondences, image, centroid, shape.matrixV());
  } else {
    if (correspondences.size() < 6) {
      throw InsufficientData("non-planar pose estimation needs at least 6 correspondences");
    }
    pose = general_pose(landmarks, correspondences, image);
  }

  if (refine) {
    PoseResidual functor(camera, landmarks, correspondences, pose.linear);
    Eigen::NumericalDiff<PoseResidual, Eigen::Central> numeric(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<PoseResidual, Eigen::Central>> lm(numeric);
    lm.setXtol(1e-14);
    lm.setFtol(1e-14);
    Eigen::VectorXd x(6);
    x << 0, 0, 0, pose.translation;
    lm.minimize(x);
    ChamberPose refined;
    refined.linear = pose.linear * rotation_vector(x.head<3>());
    refined.translation = x.tail<3>();
    if (pose_rms(camera, landmarks, correspondences, refined) <
        pose_rms(camera, landmarks, correspondences, pose)) {
      pose = refined;
    }
  }
  pose.rms = pose_rms(camera, landmarks, correspondences, pose);
  return pose;
}

ChamberPoints estimate_pose(const CameraIntrinsics& camera, const ReferenceObject& reference,
                            bool refine) {
  ChamberPoints out;
  for (const auto& [label, correspondences] : reference.correspondences) {
    const ChamberPose pose = estimate_chamber_pose(camera, reference.landmarks, correspondences, refine);
    auto& points = out[label];
    for (const auto& X : reference.landmarks) {
      points.push_back(pose.linear * X + pose.translation);
    }
  }
  return out;
}

namespace {

const std::vector<Point3>& chamber(const ChamberPoints& points, const std::vector<int>& label) {
  const auto it = points.find(ReflectionSequence(label));
  if (it == points.end()) {
    throw InsufficientData("chamber " + ReflectionSequence(label).to_string(3) + " is missing");
  }
  return it->second;
}

std::size_t landmark_total(const ChamberPoints& points) {
  const std::size_t n = chamber(points, {}).size();
  if (n == 0) {
    throw InsufficientData("no landmarks");
  }
  for (const auto& [label, pts] : points) {
    if (pts.size() != n) {
      throw InvalidInput("chambers disagree on the landmark count");
    }
  }
  return n;
}

}  // namespace

CalibrationEstimate baseline_calibrate(const ChamberPoints& points) {
  const std::size_t num_landmarks = landmark_total(points);
  CalibrationEstimate out;
  for (int i = 1; i <= 3; ++i) {
    const int j = i % 3 + 1;
    const int k = j % 3 + 1;
    Vec3 l_sum = Vec3::Zero();
    Vec3 p_sum = Vec3::Zero();
    for (std::size_t l = 0; l < num_landmarks; ++l) {
      const Point3& p0 = chamber(points, {})[l];
      const Point3& pi = chamber(points, {i})[l];
      const Point3& pj = chamber(points, {j})[l];
      const Point3& pk = chamber(points, {k})[l];
      const Point3& pij = chamber(points, {i, j})[l];
      const Point3& pik = chamber(points, {i, k})[l];
      l_sum += (pi - p0) + (pij - pj) + (pik - pk);
      p_sum += p0 + chamber(points, {1})[l] + chamber(points, {2})[l] + chamber(points, {3})[l] +
               pij + pik;
    }
    const double len = l_sum.norm();
    if (!(len > 1e-300)) {
      throw Degenerate("displacement sum of mirror " + std::to_string(i) + " vanishes");
    }
    // The summed displacement points away from the camera; the plane convention
    // needs the camera-facing normal.
    const Vec3 away = l_sum / len;
    const double d = away.dot(p_sum) / (6.0 * static_cast<double>(num_landmarks));
    if (!(d > 0.0)) {
      throw Infeasible("mirror " + std::to_string(i) + " distance is not positive");
    }
    out.mirrors.emplace_back(-away, d);
  }
  out.points = chamber(points, {});
  return out;
}

std::vector<std::pair<ReflectionSequence, ReflectionSequence>> orthogonality_pairs(int i, int j) {
  const auto S = [](std::vector<int> v) { return ReflectionSequence(std::move(v)); };
  const int k = 6 - i - j;
  if (i < 1 || i > 3 || j < 1 || j > 3 || i == j) {
    throw InvalidInput("orthogonality pairs need two distinct mirrors out of three");
  }
  // Reflections of p0, p_j, p_i and p_k by mirrors i and j respectively.
  return {{S({i}), S({j})}, {S({i, j}), S({})}, {S({}), S({j, i})}, {S({i, k}), S({j, k})}};
}

CalibrationEstimate orthogonality_calibrate(const ChamberPoints& points) {
  const std::size_t num_landmarks = landmark_total(points);
  const std::pair<int, int> order[3] = {{1, 2}, {2, 3}, {3, 1}};
  Vec3 m[3];
  for (int q = 0; q < 3; ++q) {
    const auto pairs = orthogonality_pairs(order[q].first, order[q].second);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(pairs.size() * num_landmarks), 3);
    Eigen::Index r = 0;
    for (std::size_t l = 0; l < num_landmarks; ++l) {
      for (const auto& [a, b] : pairs) {
        rows.row(r++) = (chamber(points, a.indices())[l] - chamber(points, b.indices())[l]).transpose();
      }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeFullV);
    if (svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0)) {
      throw Degenerate("intersection direction is not determined");
    }
    m[q] = svd.matrixV().col(2);
  }
  // n1 ~ m31 x m12, n2 ~ m12 x m23, n3 ~ m23 x m31
  const Vec3 raw[3] = {m[2].cross(m[0]), m[0].cross(m[1]), m[1].cross(m[2])};
  CalibrationEstimate out;
  for (int i = 0; i < 3; ++i) {
    if (!(raw[i].norm() > 1e-9)) {
      throw Degenerate("intersection directions are collinear");
    }
    Vec3 n = raw[i].normalized();
    double facing = 0.0;
    for (std::size_t l = 0; l < num_landmarks; ++l) {
      facing += n.dot(chamber(points, {})[l] - chamber(points, {i + 1})[l]);
    }
    if (facing < 0.0) {
      n = -n;
    }
    double d = 0.0;
    for (std::size_t l = 0; l < num_landmarks; ++l) {
      d += -n.dot(chamber(points, {})[l] + chamber(points, {i + 1})[l]) / 2.0;
    }
    d /= static_cast<double>(num_landmarks);
    if (!(d > 0.0)) {
      throw Infeasible("mirror " + std::to_string(i + 1) + " distance is not positive");
    }
    out.mirrors.emplace_back(n, d);
  }
  out.points = chamber(points, {});
  return out;
}

}  // namespace kaleido
