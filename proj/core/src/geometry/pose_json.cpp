#include "multicam/geometry/pose_json.hpp"

#include <cmath>

#include "multicam/common/error.hpp"

namespace multicam {

nlohmann::json pose_to_json(const Pose &pose) {
  const auto a = to_array(pose);
  return nlohmann::json(std::vector<double>(a.begin(), a.end()));
}

Pose pose_from_json(const nlohmann::json &j) {
  if (!j.is_array() || j.size() != 7)
    throw Error(ErrorCode::kParseError, "pose must be an array of 7 numbers");
  std::array<double, 7> a{};
  for (std::size_t i = 0; i < 7; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kParseError, "pose entry is not a number");
    a[i] = j[i].get<double>();
  }
  const double n2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3];
  if (!(std::abs(n2 - 1.0) < 1e-3))
    throw Error(ErrorCode::kParseError, "pose quaternion is not unit norm");
  return pose_from_array(a);
}

}  // namespace multicam
