#include "kaleido/metrics.hpp"

#include "kaleido/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kaleido {

namespace {

// acos(|a.b|) written with atan2, which stays accurate for nearly parallel vectors.
double folded_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

void require_same_count(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth) {
  if (estimated.size() != truth.size() || truth.empty()) {
    throw InvalidInput("estimate and ground truth must have the same, non-zero mirror count");
  }
}

}  // namespace

std::vector<int> align_mirrors(const std::vector<Mirror>& estimated,
                               const std::vector<Mirror>& truth) {
  require_same_count(estimated, truth);
  std::vector<int> perm(truth.size());
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      cost += folded_angle(estimated[k].normal(),
                           truth[static_cast<std::size_t>(perm[k] - 1)].normal());
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ReflectionSequence relabel(const ReflectionSequence& seq, const std::vector<int>& perm) {
  std::vector<int> out;
  for (int m : seq.indices()) {
    if (m < 1 || static_cast<std::size_t>(m) > perm.size()) {
      throw InvalidInput("label uses a mirror outside the permutation");
    }
    out.push_back(perm[static_cast<std::size_t>(m - 1)]);
  }
  return ReflectionSequence(std::move(out));
}

OrderAccuracy metric_Em(const std::map<std::size_t, ReflectionSequence>& assigned,
                        const std::vector<ReflectionSequence>& truth, int max_order,
                        const std::vector<int>& perm) {
  if (max_order < 0) {
    throw InvalidInput("max_order must be non-negative");
  }
  const auto orders = static_cast<std::size_t>(max_order) + 1;
  OrderAccuracy out{std::vector<std::size_t>(orders, 0), std::vector<std::size_t>(orders, 0),
                    std::vector<double>(orders, 1.0)};
  for (std::size_t c = 0; c < truth.size(); ++c) {
    const std::size_t m = truth[c].order();
    if (m >= orders) {
      throw InvalidInput("true label exceeds max_order");
    }
    ++out.total[m];
    const auto it = assigned.find(c);
    if (it == assigned.end()) {
      continue;
    }
    const ReflectionSequence label = perm.empty() ? it->second : relabel(it->second, perm);
    if (label == truth[c]) {
      ++out.correct[m];
    }
  }
  for (std::size_t m = 0; m < orders; ++m) {
    if (out.total[m] > 0) {
      out.accuracy[m] = static_cast<double>(out.correct[m]) / static_cast<double>(out.total[m]);
    }
  }
  return out;
}

double metric_En(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth) {
  require_same_count(estimated, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += folded_angle(estimated[i].normal(), truth[i].normal());
  }
  return sum / static_cast<double>(truth.size());
}

double metric_Ed(const std::vector<Mirror>& estimated, const std::vector<Mirror>& truth) {
  require_same_count(estimated, truth);
  const double se = 1.0 / estimated.front().distance();
  const double st = 1.0 / truth.front().distance();
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += std::abs(estimated[i].distance() * se - truth[i].distance() * st);
  }
  return sum / static_cast<double>(truth.size());
}

double metric_Erep(const CameraIntrinsics& camera, const CalibrationEstimate& estimate,
                   const std::vector<LabeledProjection>& observations) {
  return reprojection_error(camera, estimate, observations).mean;
}

}  // namespace kaleido
