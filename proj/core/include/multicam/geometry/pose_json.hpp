#pragma once

#include <nlohmann/json.hpp>

#include "multicam/geometry/pose.hpp"

namespace multicam {

/// [qw, qx, qy, qz, tx, ty, tz], translations in meters.
nlohmann::json pose_to_json(const Pose &pose);

/// Throws ParseError unless `j` is an array of 7 numbers.
Pose pose_from_json(const nlohmann::json &j);

}  // namespace multicam
