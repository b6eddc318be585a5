#include "multicam/geometry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "multicam/common/error.hpp"

namespace multicam {

namespace {

// mean ||A x + b|| over the model points.
double mean_affine_norm(const Eigen::Matrix3d &A, const Eigen::Vector3d &b,
                        const PointCloud &points) {
  double sum = 0.0;
  for (const auto &x : points) sum += (A * x + b).norm();
  return sum / static_cast<double>(points.size());
}

Eigen::Vector3d centroid(const PointCloud &points) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto &p : points) c += p;
  return c / static_cast<double>(points.size());
}

}  // namespace

double add(const Pose &a, const Pose &b, const ObjectModel &model) {
  if (model.points.empty()) throw Error(ErrorCode::kInvalidModel, "empty model");
  const Eigen::Matrix3d A = a.rotation_matrix() - b.rotation_matrix();
  const Eigen::Vector3d t = a.translation() - b.translation();
  return mean_affine_norm(A, t, model.points);
}

double add_s(const Pose &a, const Pose &b, const ObjectModel &model) {
  if (model.points.empty()) throw Error(ErrorCode::kInvalidModel, "empty model");
  const Pose rel = b.inverse() * a;
  double sum = 0.0;
  for (const auto &x : model.points) {
    const Eigen::Vector3d y = rel * x;
    double best = std::numeric_limits<double>::infinity();
    for (const auto &p : model.points) best = std::min(best, (y - p).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(model.points.size());
}

std::optional<SymmetricMatch> symmetric_distance_within(const Pose &a,
                                                        const Pose &b,
                                                        const ObjectModel &model,
                                                        double cutoff) {
  if (model.points.empty()) throw Error(ErrorCode::kInvalidModel, "empty model");
  const Eigen::Matrix3d Ra = a.rotation_matrix();
  const Eigen::Matrix3d Rb = b.rotation_matrix();
  const Eigen::Vector3d dt = a.translation() - b.translation();
  const std::size_t n = model.symmetries.size();

  // Branch and bound: by convexity of the norm, ||A c + b|| (c = model
  // centroid) lower-bounds mean ||A x + b||. Candidates are visited in bound
  // order and the scan stops once the bound exceeds the best exact value.
  const Eigen::Vector3d c = centroid(model.points);
  struct Candidate {
    double bound;
    std::size_t index;
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Pose &s = model.symmetries[i];
    Candidate cand;
    cand.index = i;
    cand.A = Ra * s.rotation_matrix() - Rb;
    cand.b = Ra * s.translation() + dt;
    cand.bound = (cand.A * c + cand.b).norm();
    if (cand.bound <= cutoff) candidates.push_back(std::move(cand));
  }
  if (candidates.empty()) return std::nullopt;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate &l, const Candidate &r) {
                     return l.bound < r.bound;
                   });

  SymmetricMatch best;
  best.distance = std::numeric_limits<double>::infinity();
  for (const auto &cand : candidates) {
    if (cand.bound > best.distance) break;
    const double d = mean_affine_norm(cand.A, cand.b, model.points);
    if (d < best.distance ||
        (d == best.distance && cand.index < best.symmetry_index)) {
      best.distance = d;
      best.symmetry_index = cand.index;
    }
  }
  if (best.distance > cutoff) return std::nullopt;
  best.symmetry = model.symmetries[best.symmetry_index];
  return best;
}

SymmetricMatch symmetric_distance(const Pose &a, const Pose &b,
                                  const ObjectModel &model) {
  return *symmetric_distance_within(a, b, model,
                                    std::numeric_limits<double>::infinity());
}

double add_auc(std::span<const double> errors, double max_threshold) {
  if (errors.empty()) throw Error(ErrorCode::kEmptyInput, "add_auc: no errors");
  if (!(max_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "add_auc: threshold must be > 0");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  for (double e : sorted) {
    if (!(e >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "add_auc: negative or NaN error");
  }
  std::sort(sorted.begin(), sorted.end());

  // accuracy(tau) = #{e < tau} / n is a step function rising by 1/n at each
  // sorted error; integrate it exactly up to max_threshold.
  const double n = static_cast<double>(sorted.size());
  double area = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (sorted[k] >= max_threshold) break;
    const double next = k + 1 < sorted.size()
                            ? std::min(sorted[k + 1], max_threshold)
                            : max_threshold;
    area += (next - sorted[k]) * static_cast<double>(k + 1) / n;
  }
  return std::clamp(area / max_threshold, 0.0, 1.0);
}

CameraPoseError camera_pose_error(const Pose &estimate, const Pose &truth) {
  CameraPoseError err;
  err.translation_mm = (estimate.translation() - truth.translation()).norm() * 1000.0;
  const Eigen::Matrix3d delta =
      truth.rotation_matrix().transpose() * estimate.rotation_matrix();
  err.rotation_deg = rotation_angle(delta) * 180.0 / std::numbers::pi;
  return err;
}

}  // namespace multicam
