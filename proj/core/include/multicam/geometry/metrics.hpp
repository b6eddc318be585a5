#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "multicam/geometry/object_model.hpp"
#include "multicam/geometry/pose.hpp"

namespace multicam {

inline constexpr double kDefaultAucThreshold = 0.10;  // meters

/// Average distance of corresponding model points (meters).
double add(const Pose &a, const Pose &b, const ObjectModel &model);

/// Average distance from each transformed point to the closest point of the
/// other transformed cloud. Never larger than add().
double add_s(const Pose &a, const Pose &b, const ObjectModel &model);

struct SymmetricMatch {
  double distance = 0.0;
  std::size_t symmetry_index = 0;
  Pose symmetry;
};

/// min over S of add(a * S, b). Ties resolve to the lowest symmetry index, so
/// the identity wins whenever it is optimal.
SymmetricMatch symmetric_distance(const Pose &a, const Pose &b,
                                  const ObjectModel &model);

/// As symmetric_distance(), but gives up as soon as the result is provably
/// above `cutoff` (returns nullopt). Used on hot paths that only need to know
/// whether a pair passes a gate.
std::optional<SymmetricMatch> symmetric_distance_within(const Pose &a,
                                                        const Pose &b,
                                                        const ObjectModel &model,
                                                        double cutoff);

/// Area under the accuracy-vs-threshold curve on [0, max_threshold],
/// normalized to [0, 1]. Throws EmptyInput for an empty list.
double add_auc(std::span<const double> errors,
               double max_threshold = kDefaultAucThreshold);

struct CameraPoseError {
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
};

CameraPoseError camera_pose_error(const Pose &estimate, const Pose &truth);

}  // namespace multicam
