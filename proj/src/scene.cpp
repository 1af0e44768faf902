#include "kaleido/scene.hpp"

#include "kaleido/errors.hpp"
#include "kaleido/rng.hpp"

#include <cmath>
#include <limits>

namespace kaleido {

void MirrorSystemConfig::validate(bool require_facing) const {
  camera.validate();
  if (mirrors.size() < 2) {
    throw InvalidInput("a mirror system needs at least two mirrors");
  }
  if (max_order < 1) {
    throw InvalidInput("max_order must be at least 1");
  }
  if (!(sigma >= 0.0)) {
    throw InvalidInput("sigma must be non-negative");
  }
  for (std::size_t i = 0; i < mirrors.size(); ++i) {
    for (std::size_t j = i + 1; j < mirrors.size(); ++j) {
      const double c = mirrors[i].normal().dot(mirrors[j].normal());
      if (std::abs(c) >= 1.0 - 1e-9) {
        throw InvalidInput("mirrors " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                           " are parallel");
      }
      if (require_facing && !(c < 0.0)) {
        throw InvalidInput("mirrors " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                           " do not face each other");
      }
    }
  }
}

std::vector<LabeledObservation> SyntheticScene::visible_observations(std::size_t point) const {
  std::vector<LabeledObservation> out;
  for (const auto& obs : observations) {
    if (obs.point == point && obs.visible) {
      out.push_back(obs);
    }
  }
  return out;
}

std::vector<Pixel2> SyntheticScene::candidates(std::size_t point) const {
  std::vector<Pixel2> out;
  for (const auto& obs : visible_observations(point)) {
    out.push_back(obs.pixel);
  }
  return out;
}

std::vector<ReflectionSequence> enumerate_reflections(std::size_t num_mirrors, int max_order) {
  std::vector<ReflectionSequence> out;
  out.emplace_back();
  std::vector<std::vector<int>> frontier{{}};
  for (int order = 1; order <= max_order; ++order) {
    std::vector<std::vector<int>> next;
    for (const auto& prefix : frontier) {
      for (int m = 1; m <= static_cast<int>(num_mirrors); ++m) {
        if (!prefix.empty() && prefix.back() == m) {
          continue;
        }
        auto seq = prefix;
        seq.push_back(m);
        next.push_back(std::move(seq));
      }
    }
    for (const auto& seq : next) {
      out.emplace_back(seq);
    }
    frontier = std::move(next);
  }
  return out;
}

std::vector<ReflectionSequence> enumerate_reflections(const MirrorSystemConfig& config) {
  return enumerate_reflections(config.num_mirrors(), config.max_order);
}

namespace {

// Nearest mirror crossed by the segment start + t * dir, t in (0, 1), skipping `skip`.
// Returns the 0-based mirror index or -1.
int first_crossing(const Point3& start, const Vec3& dir, const std::vector<Mirror>& mirrors,
                   int skip, double* t_out) {
  int best = -1;
  double best_t = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < mirrors.size(); ++m) {
    if (static_cast<int>(m) == skip) {
      continue;
    }
    const double den = mirrors[m].normal().dot(dir);
    if (std::abs(den) < 1e-300) {
      continue;
    }
    const double t = -mirrors[m].signed_distance(start) / den;
    if (t > 1e-12 && t < best_t) {
      best_t = t;
      best = static_cast<int>(m);
    }
  }
  *t_out = best_t;
  return best;
}

}  // namespace

bool is_visible(const ReflectionSequence& seq, const Point3& p0, const CameraIntrinsics& camera,
                const std::vector<Mirror>& mirrors) {
  seq.validate(mirrors.size());
  Point3 target = compose_reflections(seq, mirrors).apply(p0);
  if (!(target.z() > 0.0) || !camera.contains(project(camera, target))) {
    return false;
  }
  Point3 start = Point3::Zero();
  int previous = -1;
  for (int index : seq.indices()) {
    double t = 0.0;
    const int hit = first_crossing(start, target - start, mirrors, previous, &t);
    if (hit != index - 1 || !(t < 1.0)) {
      return false;
    }
    const Mirror& mirror = mirrors[static_cast<std::size_t>(hit)];
    start = start + t * (target - start);
    target = make_reflection(mirror).apply(target);
    previous = hit;
  }
  double t = 0.0;
  const int hit = first_crossing(start, target - start, mirrors, previous, &t);
  return hit < 0 || !(t < 1.0);
}

bool is_visible(const ReflectionSequence& seq, const Point3& p0,
                const MirrorSystemConfig& config) {
  return is_visible(seq, p0, config.camera, config.mirrors);
}

bool fully_visible(const Point3& p0, const MirrorSystemConfig& config) {
  for (const auto& seq : enumerate_reflections(config)) {
    if (!is_visible(seq, p0, config)) {
      return false;
    }
  }
  return true;
}

SyntheticScene synthesize_projections(const MirrorSystemConfig& config,
                                      const std::vector<Point3>& points) {
  config.validate(false);
  SyntheticScene scene;
  scene.camera = config.camera;
  scene.ground_truth_mirrors = config.mirrors;
  scene.points = points;
  const auto sequences = enumerate_reflections(config);
  std::vector<ReflectionTransform> transforms;
  transforms.reserve(sequences.size());
  for (const auto& seq : sequences) {
    transforms.push_back(compose_reflections(seq, config.mirrors));
  }
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Point3& p0 = points[k];
    if (!(p0.z() > 0.0)) {
      throw BehindCamera("scene point " + std::to_string(k) + " is behind the camera");
    }
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      LabeledObservation obs;
      obs.point = k;
      obs.label = sequences[s];
      const Point3 p = transforms[s].apply(p0);
      if (p.z() > 0.0) {
        obs.pixel = project(config.camera, p);
        obs.visible = is_visible(sequences[s], p0, config.camera, config.mirrors);
      } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        obs.pixel = {nan, nan};
      }
      scene.observations.push_back(std::move(obs));
    }
  }
  return scene;
}

SyntheticScene inject_noise(SyntheticScene scene, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) {
    throw InvalidInput("noise sigma must be non-negative");
  }
  if (sigma == 0.0) {
    return scene;
  }
  std::vector<Rng> streams;
  streams.reserve(scene.points.size());
  for (std::size_t k = 0; k < scene.points.size(); ++k) {
    streams.push_back(Rng::stream(seed, k));
  }
  for (auto& obs : scene.observations) {
    if (!obs.visible) {
      continue;
    }
    Rng& rng = streams.at(obs.point);
    obs.pixel.u += sigma * rng.normal();
    obs.pixel.v += sigma * rng.normal();
  }
  return scene;
}

}  // namespace kaleido
