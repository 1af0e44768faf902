#pragma once

#include "kaleido/geometry.hpp"

#include <cstdint>
#include <vector>

namespace kaleido {

struct MirrorSystemConfig {
  CameraIntrinsics camera;
  std::vector<Mirror> mirrors;
  int max_order = 2;
  std::uint64_t seed = 0;
  double sigma = 0.0;

  std::size_t num_mirrors() const { return mirrors.size(); }

  /// Requires at least two mirrors, no parallel pair and max_order >= 1. With
  /// `require_facing`, every pair must also satisfy n_i^T n_j < 0.
  void validate(bool require_facing = true) const;
};

/// One projection of a scene point. `point` indexes SyntheticScene::points.
struct LabeledObservation {
  std::size_t point = 0;
  ReflectionSequence label;
  Pixel2 pixel;
  bool visible = false;
};

struct SyntheticScene {
  CameraIntrinsics camera;
  std::vector<Mirror> ground_truth_mirrors;
  std::vector<Point3> points;
  std::vector<LabeledObservation> observations;

  std::size_t num_mirrors() const { return ground_truth_mirrors.size(); }

  /// Visible observations of one point, in enumeration order.
  std::vector<LabeledObservation> visible_observations(std::size_t point) const;
  /// Visible pixels of one point with the labels withheld.
  std::vector<Pixel2> candidates(std::size_t point) const;
};

/// All sequences of order 0..max_order without repeated adjacent indices, ordered by
/// order and then lexicographically.
std::vector<ReflectionSequence> enumerate_reflections(std::size_t num_mirrors, int max_order);
std::vector<ReflectionSequence> enumerate_reflections(const MirrorSystemConfig& config);

/// Unfolds the light path bounce by bounce: the ray toward the virtual point must
/// leave through mirror i1 before any other mirror, the reflected ray must then leave
/// through i2, and so on; the final leg must reach p0 without crossing any mirror.
/// The projection must also fall inside the image.
bool is_visible(const ReflectionSequence& seq, const Point3& p0, const CameraIntrinsics& camera,
                const std::vector<Mirror>& mirrors);
bool is_visible(const ReflectionSequence& seq, const Point3& p0,
                const MirrorSystemConfig& config);

/// True when every sequence up to config.max_order is visible.
bool fully_visible(const Point3& p0, const MirrorSystemConfig& config);

/// Noise-free scene with one observation per (point, sequence); invisible ones keep
/// visible = false and a NaN pixel when the virtual point is behind the camera.
SyntheticScene synthesize_projections(const MirrorSystemConfig& config,
                                      const std::vector<Point3>& points);

/// Adds N(0, sigma^2) to both coordinates of each visible observation. Point k draws
/// from Rng::stream(seed, k) in observation order. sigma = 0 returns the input as is.
SyntheticScene inject_noise(SyntheticScene scene, double sigma, std::uint64_t seed);

}  // namespace kaleido
