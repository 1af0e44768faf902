#include "kaleido/scenarios.hpp"

#include "kaleido/errors.hpp"

#include <cmath>
#include <numbers>

namespace kaleido {

namespace {

CameraIntrinsics reference_camera() {
  CameraIntrinsics camera;
  camera.fx = 1000.0;
  camera.fy = 1000.0;
  camera.cx = 800.0;
  camera.cy = 600.0;
  camera.width = 1600;
  camera.height = 1200;
  return camera;
}

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

}  // namespace

Scenario two_mirror_order3() {
  // Hinge line through (0, 0, 1200), tilted 30 degrees from the image y axis toward the
  // optical axis. The mirror planes contain the hinge and open by 25 degrees to each
  // side of the direction from the hinge back to the camera.
  const double half_angle = radians(25.0);
  const double tilt = radians(30.0);
  const Vec3 hinge_point(0.0, 0.0, 1200.0);
  const Vec3 axis(0.0, std::cos(tilt), std::sin(tilt));
  Vec3 toward_camera = -hinge_point;
  toward_camera -= toward_camera.dot(axis) * axis;
  toward_camera.normalize();
  const Vec3 side = axis.cross(toward_camera);

  Scenario s;
  s.name = "two-mirror-order3";
  s.config.camera = reference_camera();
  for (double sign : {1.0, -1.0}) {
    const Vec3 in_plane = std::cos(half_angle) * toward_camera + sign * std::sin(half_angle) * side;
    Vec3 n = axis.cross(in_plane).normalized();
    double d = -n.dot(hinge_point);
    if (d < 0.0) {
      n = -n;
      d = -d;
    }
    s.config.mirrors.emplace_back(n, d);
  }
  s.config.max_order = 3;
  s.nominal_point = Point3(5.0, 60.0, 900.0);
  s.half_extent = Vec3(15.0, 15.0, 30.0);
  return s;
}

Scenario three_mirror_order2() {
  const double tilt = radians(5.0);
  const double inradius = 150.0;  // at the nominal depth
  const double depth = 1000.0;
  Scenario s;
  s.name = "three-mirror-order2";
  s.config.camera = reference_camera();
  for (int k = 0; k < 3; ++k) {
    const double azimuth = radians(90.0 + 120.0 * k);
    const Vec3 n(-std::cos(azimuth) * std::cos(tilt), -std::sin(azimuth) * std::cos(tilt),
                 -std::sin(tilt));
    const double d = inradius * std::cos(tilt) + std::sin(tilt) * depth;
    s.config.mirrors.emplace_back(n, d);
  }
  s.config.max_order = 2;
  s.nominal_point = Point3(10.0, -5.0, depth);
  s.half_extent = Vec3(30.0, 30.0, 50.0);
  return s;
}

Scenario scenario_by_name(std::string_view name) {
  if (name == "two-mirror-order3") {
    return two_mirror_order3();
  }
  if (name == "three-mirror-order2") {
    return three_mirror_order2();
  }
  throw InvalidInput("unknown scenario '" + std::string(name) + "'");
}

Point3 sample_point(const Scenario& scenario, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Point3 p = scenario.nominal_point;
    for (int axis = 0; axis < 3; ++axis) {
      p(axis) += rng.uniform(-scenario.half_extent(axis), scenario.half_extent(axis));
    }
    if (fully_visible(p, scenario.config)) {
      return p;
    }
  }
  throw InvalidInput("scenario box yields no fully visible point");
}

std::vector<Point3> sample_points(const Scenario& scenario, std::size_t count, Rng& rng) {
  std::vector<Point3> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(sample_point(scenario, rng));
  }
  return out;
}

}  // namespace kaleido
