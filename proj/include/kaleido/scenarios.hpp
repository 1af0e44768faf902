#pragma once

#include "kaleido/rng.hpp"
#include "kaleido/scene.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace kaleido {

/// A fixed mirror configuration with a nominal scene point and the box around it that
/// randomized trials sample from.
struct Scenario {
  std::string name;
  MirrorSystemConfig config;
  Point3 nominal_point = Point3::Zero();
  Vec3 half_extent = Vec3::Zero();
};

/// Two mirrors hinged at 50 degrees, every reflection up to third order visible.
Scenario two_mirror_order3();
/// Three mirrors forming a triangular pyramid, each tilted 5 degrees off the optical
/// axis; all ten projections up to second order visible.
Scenario three_mirror_order2();

/// Looks up "two-mirror-order3" or "three-mirror-order2"; throws InvalidInput otherwise.
Scenario scenario_by_name(std::string_view name);

/// Rejection-samples a point inside the scenario box for which every sequence up to
/// max_order is visible.
Point3 sample_point(const Scenario& scenario, Rng& rng);
std::vector<Point3> sample_points(const Scenario& scenario, std::size_t count, Rng& rng);

}  // namespace kaleido
