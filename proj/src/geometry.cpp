#include "kaleido/geometry.hpp"

#include "kaleido/errors.hpp"

#include <cmath>
#include <sstream>

namespace kaleido {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidInput("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw InvalidInput("camera image size must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    throw InvalidInput("camera principal point must be finite");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 a;
  a << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return a;
}

bool CameraIntrinsics::contains(const Pixel2& q) const {
  return q.u >= 0.0 && q.v >= 0.0 && q.u < static_cast<double>(width) &&
         q.v < static_cast<double>(height);
}

Mirror::Mirror(const Vec3& normal, double distance) {
  const double norm = normal.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormalTolerance) {
    std::ostringstream msg;
    msg << "mirror normal is not unit length (norm " << norm << ")";
    throw InvalidInput(msg.str());
  }
  if (!(distance > 0.0) || !std::isfinite(distance)) {
    throw InvalidInput("mirror distance must be positive");
  }
  normal_ = normal / norm;
  distance_ = distance;
}

Mirror Mirror::from_direction(const Vec3& direction, double distance) {
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InvalidInput("mirror normal direction must be non-zero");
  }
  return Mirror(direction / norm, distance);
}

Mat4 ReflectionTransform::matrix() const {
  Mat4 s = Mat4::Identity();
  s.topLeftCorner<3, 3>() = linear;
  s.topRightCorner<3, 1>() = translation;
  return s;
}

ReflectionSequence::ReflectionSequence(std::vector<int> indices) : indices_(std::move(indices)) {
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] < 1) {
      throw InvalidSequence("mirror indices are 1-based");
    }
    if (k > 0 && indices_[k] == indices_[k - 1]) {
      throw InvalidSequence("consecutive reflections by the same mirror");
    }
  }
}

ReflectionSequence ReflectionSequence::parse(std::string_view text, std::size_t num_mirrors) {
  std::vector<int> indices;
  if (text.empty() || text == "0") {
    return {};
  }
  if (text.find('-') != std::string_view::npos) {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = text.find('-', start);
      const auto token = text.substr(start, end == std::string_view::npos ? text.size() - start
                                                                          : end - start);
      if (token.empty()) {
        throw InvalidSequence("empty index in sequence label");
      }
      int value = 0;
      for (char c : token) {
        if (c < '0' || c > '9') {
          throw InvalidSequence("non-digit in sequence label");
        }
        value = value * 10 + (c - '0');
      }
      indices.push_back(value);
      if (end == std::string_view::npos) {
        break;
      }
      start = end + 1;
    }
  } else {
    for (char c : text) {
      if (c < '1' || c > '9') {
        throw InvalidSequence("invalid character in sequence label");
      }
      indices.push_back(c - '0');
    }
  }
  ReflectionSequence seq(std::move(indices));
  seq.validate(num_mirrors);
  return seq;
}

ReflectionSequence ReflectionSequence::reflected_by(int mirror) const {
  std::vector<int> indices;
  indices.reserve(indices_.size() + 1);
  indices.push_back(mirror);
  indices.insert(indices.end(), indices_.begin(), indices_.end());
  return ReflectionSequence(std::move(indices));
}

ReflectionSequence ReflectionSequence::inner() const {
  if (indices_.empty()) {
    throw InvalidSequence("direct view has no inner sequence");
  }
  ReflectionSequence out;
  out.indices_.assign(indices_.begin() + 1, indices_.end());
  return out;
}

void ReflectionSequence::validate(std::size_t num_mirrors) const {
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] < 1 || static_cast<std::size_t>(indices_[k]) > num_mirrors) {
      throw InvalidSequence("mirror index out of range");
    }
    if (k > 0 && indices_[k] == indices_[k - 1]) {
      throw InvalidSequence("consecutive reflections by the same mirror");
    }
  }
}

std::string ReflectionSequence::to_string(std::size_t num_mirrors) const {
  if (indices_.empty()) {
    return "0";
  }
  std::string out;
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (num_mirrors > 9 && k > 0) {
      out += '-';
    }
    out += std::to_string(indices_[k]);
  }
  return out;
}

std::strong_ordering ReflectionSequence::operator<=>(const ReflectionSequence& other) const {
  if (auto c = indices_.size() <=> other.indices_.size(); c != 0) {
    return c;
  }
  return indices_ <=> other.indices_;
}

ReflectionTransform make_reflection(const Mirror& mirror) {
  const Vec3& n = mirror.normal();
  ReflectionTransform s;
  s.linear = Mat3::Identity() - 2.0 * n * n.transpose();
  s.translation = -2.0 * mirror.distance() * n;
  return s;
}

ReflectionTransform make_reflection(const Vec3& normal, double distance) {
  return make_reflection(Mirror(normal, distance));
}

Point3 reflect_point(const ReflectionTransform& s, const Point3& p) { return s.apply(p); }

ReflectionTransform compose_reflections(const ReflectionSequence& seq,
                                        const std::vector<Mirror>& mirrors) {
  seq.validate(mirrors.size());
  ReflectionTransform out;
  // Right-to-left: the innermost mirror acts first.
  for (auto it = seq.indices().rbegin(); it != seq.indices().rend(); ++it) {
    const ReflectionTransform s = make_reflection(mirrors[static_cast<std::size_t>(*it - 1)]);
    out.translation = s.linear * out.translation + s.translation;
    out.linear = s.linear * out.linear;
  }
  return out;
}

Pixel2 project(const CameraIntrinsics& camera, const Point3& p) {
  if (!(p.z() > 0.0)) {
    throw BehindCamera("point is not in front of the camera");
  }
  return {(camera.fx * p.x() + camera.cx * p.z()) / p.z(),
          (camera.fy * p.y() + camera.cy * p.z()) / p.z()};
}

NormalizedPoint normalize(const CameraIntrinsics& camera, const Pixel2& q) {
  return {(q.u - camera.cx) / camera.fx, (q.v - camera.cy) / camera.fy};
}

Vec3 kpc_row(const NormalizedPoint& a, const NormalizedPoint& b) {
  return {a.y - b.y, b.x - a.x, a.x * b.y - b.x * a.y};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace kaleido
