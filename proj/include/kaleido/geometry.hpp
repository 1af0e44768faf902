#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kaleido {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// A 3D position in the camera frame (scene units).
using Point3 = Vec3;

/// Image position in pixels.
struct Pixel2 {
  double u = 0.0;
  double v = 0.0;

  Vec2 vec() const { return {u, v}; }
  friend bool operator==(const Pixel2&, const Pixel2&) = default;
};

/// Image position after removing the intrinsics; the implicit third coordinate is 1.
struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;

  Vec3 homogeneous() const { return {x, y, 1.0}; }
};

/// Zero-skew pinhole intrinsics plus the image extent used for field-of-view clipping.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidInput unless fx, fy > 0 and the image size is positive.
  void validate() const;
  Mat3 matrix() const;
  bool contains(const Pixel2& q) const;
};

/// Mirror plane n^T x + d = 0 with the unit normal pointing toward the camera center.
class Mirror {
 public:
  /// Accepts |‖normal‖ - 1| <= 1e-12 and distance > 0, then renormalizes.
  Mirror(const Vec3& normal, double distance);

  /// Builds a mirror from any non-zero direction; the direction is normalized first.
  static Mirror from_direction(const Vec3& direction, double distance);

  const Vec3& normal() const { return normal_; }
  double distance() const { return distance_; }

  /// Signed distance n^T x + d; positive on the camera side.
  double signed_distance(const Point3& x) const { return normal_.dot(x) + distance_; }

 private:
  Vec3 normal_;
  double distance_;
};

inline constexpr double kUnitNormalTolerance = 1e-12;

/// Affine map p -> linear * p + translation. For a single mirror `linear` is the
/// Householder matrix I - 2nn^T and the translation is -2dn.
struct ReflectionTransform {
  Mat3 linear = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Mat4 matrix() const;
  Point3 apply(const Point3& p) const { return linear * p + translation; }
};

/// Mirror indices (1-based) of a multiple reflection, outermost (camera-facing) first:
/// "12" denotes S_1 S_2 p0, i.e. the reflection of p2 by mirror 1.
class ReflectionSequence {
 public:
  ReflectionSequence() = default;
  explicit ReflectionSequence(std::vector<int> indices);

  /// Parses "0" or "" (direct view), concatenated digits ("121"), or hyphen-separated
  /// indices ("10-3"). Validates against the mirror count.
  static ReflectionSequence parse(std::string_view text, std::size_t num_mirrors);

  const std::vector<int>& indices() const { return indices_; }
  std::size_t order() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  int outermost() const { return indices_.front(); }

  /// Sequence of the reflection of this point by `mirror`: mirror is prepended.
  ReflectionSequence reflected_by(int mirror) const;
  /// Drops the outermost index.
  ReflectionSequence inner() const;

  /// Throws InvalidSequence on repeated adjacent indices or indices outside [1, num_mirrors].
  void validate(std::size_t num_mirrors) const;

  /// "0" for the direct view; digits when num_mirrors <= 9, hyphen-separated otherwise.
  std::string to_string(std::size_t num_mirrors) const;

  /// Orders by reflection order first, then lexicographically.
  std::strong_ordering operator<=>(const ReflectionSequence& other) const;
  bool operator==(const ReflectionSequence& other) const = default;

 private:
  std::vector<int> indices_;
};

ReflectionTransform make_reflection(const Mirror& mirror);
/// Validating overload for raw parameters.
ReflectionTransform make_reflection(const Vec3& normal, double distance);

Point3 reflect_point(const ReflectionTransform& s, const Point3& p);

/// Product S_{i1} S_{i2} ... S_{ik}; identity for the empty sequence.
ReflectionTransform compose_reflections(const ReflectionSequence& seq,
                                        const std::vector<Mirror>& mirrors);

/// Pinhole projection; throws BehindCamera when p.z <= 0.
Pixel2 project(const CameraIntrinsics& camera, const Point3& p);
NormalizedPoint normalize(const CameraIntrinsics& camera, const Pixel2& q);

/// Kaleidoscopic projection constraint row for the doublet <a, b>, where b is the
/// reflection of a: (y_a - y_b, x_b - x_a, x_a y_b - x_b y_a). Its dot product with
/// the mirror normal vanishes for a genuine doublet.
Vec3 kpc_row(const NormalizedPoint& a, const NormalizedPoint& b);

Mat3 skew(const Vec3& v);

}  // namespace kaleido
