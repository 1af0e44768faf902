#pragma once

#include "kaleido/calibration.hpp"
#include "kaleido/io.hpp"
#include "kaleido/scenarios.hpp"
#include "kaleido/scene.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace kaleido::test {

inline std::string fixture_path(const std::string& name) {
  return std::string(KALEIDO_FIXTURE_DIR) + "/" + name + ".json";
}

/// Scenario loaded from the shipped fixture JSON.
inline Scenario load_fixture(const std::string& name) {
  return scene_from_json(parse_json(read_file(fixture_path(name)))).scenario;
}

/// Candidates of one point with their true labels, in enumeration order.
struct LabeledCandidates {
  std::vector<Pixel2> pixels;
  std::vector<ReflectionSequence> labels;
};

inline LabeledCandidates candidates_of(const SyntheticScene& scene, std::size_t point) {
  LabeledCandidates out;
  for (const auto& obs : scene.visible_observations(point)) {
    out.pixels.push_back(obs.pixel);
    out.labels.push_back(obs.label);
  }
  return out;
}

/// Same mirrors with every distance multiplied by `scale`.
inline std::vector<Mirror> scaled(const std::vector<Mirror>& mirrors, double scale) {
  std::vector<Mirror> out;
  for (const auto& m : mirrors) {
    out.emplace_back(m.normal(), m.distance() * scale);
  }
  return out;
}

/// Angle between two directions with the sign folded out.
inline double folded_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

inline double degrees(double radians) { return radians * 180.0 / std::numbers::pi; }
inline double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

/// Rodrigues rotation of `v` about `axis` by `angle` radians.
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()) * v;
}

}  // namespace kaleido::test
