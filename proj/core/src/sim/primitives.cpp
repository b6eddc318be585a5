#include "multicam/sim/primitives.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "multicam/common/error.hpp"

namespace multicam {

std::string_view to_string(Shape shape) {
  switch (shape) {
    case Shape::kBox: return "box";
    case Shape::kCylinder: return "cylinder";
    case Shape::kTube: return "tube";
    case Shape::kLBracket: return "l_bracket";
  }
  return "box";
}

Shape shape_from_string(std::string_view s) {
  if (s == "box") return Shape::kBox;
  if (s == "cylinder") return Shape::kCylinder;
  if (s == "tube") return Shape::kTube;
  if (s == "l_bracket" || s == "L-bracket" || s == "l-bracket") return Shape::kLBracket;
  throw Error(ErrorCode::kInvalidConfig, "unknown shape '" + std::string(s) + "'");
}

namespace {

using Eigen::Vector3d;
constexpr double kPi = std::numbers::pi;

// Uniform sample on the surface of an axis-aligned box centered at `c`.
Vector3d sample_box_surface(std::mt19937_64 &rng, const Vector3d &half, const Vector3d &c) {
  const double ax = half.y() * half.z(), ay = half.x() * half.z(), az = half.x() * half.y();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> face(0.0, ax + ay + az);
  const double f = face(rng);
  const double sign = u(rng) < 0 ? -1.0 : 1.0;
  Vector3d p(u(rng) * half.x(), u(rng) * half.y(), u(rng) * half.z());
  if (f < ax) p.x() = sign * half.x();
  else if (f < ax + ay) p.y() = sign * half.y();
  else p.z() = sign * half.z();
  return p + c;
}

void box_corners(PointCloud &out, const Vector3d &half, const Vector3d &c) {
  for (int i = 0; i < 8; ++i)
    out.emplace_back(c + Vector3d((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                                  (i & 4) ? half.z() : -half.z()));
}

// Point on a solid of revolution about z, azimuth drawn from [0, sector).
Vector3d sample_revolution(std::mt19937_64 &rng, double outer, double inner, double length,
                           double sector) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double half = 0.5 * length;
  const double a_outer = 2 * kPi * outer * length;
  const double a_inner = inner > 0 ? 2 * kPi * inner * length : 0.0;
  const double a_cap = 2 * kPi * (outer * outer - inner * inner) / 2.0;  // both caps, halved per cap
  const double pick = u01(rng) * (a_outer + a_inner + 2 * a_cap);
  const double phi = u01(rng) * sector;
  double r;
  double z;
  if (pick < a_outer) {
    r = outer;
    z = (2 * u01(rng) - 1) * half;
  } else if (pick < a_outer + a_inner) {
    r = inner;
    z = (2 * u01(rng) - 1) * half;
  } else {
    // area-uniform radius on the annulus
    r = std::sqrt(inner * inner + u01(rng) * (outer * outer - inner * inner));
    z = pick < a_outer + a_inner + a_cap ? half : -half;
  }
  return {r * std::cos(phi), r * std::sin(phi), z};
}

std::vector<double> check_dims(std::span<const double> dims, std::size_t n, std::string_view what) {
  if (dims.size() != n)
    throw Error(ErrorCode::kInvalidConfig,
                std::string(what) + " expects " + std::to_string(n) + " dimensions");
  for (double d : dims)
    if (!(d > 0) || !std::isfinite(d))
      throw Error(ErrorCode::kInvalidConfig, std::string(what) + " dimensions must be positive");
  return {dims.begin(), dims.end()};
}

// Replicates `base` over the orbit of `syms`.
PointCloud replicate(const PointCloud &base, const std::vector<Pose> &syms) {
  PointCloud out;
  out.reserve(base.size() * syms.size());
  for (const auto &s : syms)
    for (const auto &p : base) out.push_back(s * p);
  return out;
}

}  // namespace

ObjectModel primitive_model(Shape shape, std::span<const double> dims, int symmetry_order,
                            int category_id, std::size_t n_points, std::string name) {
  if (symmetry_order < 1) throw Error(ErrorCode::kInvalidConfig, "symmetry order must be >= 1");
  if (n_points < 8) throw Error(ErrorCode::kInvalidConfig, "need at least 8 sample points");
  // Fixed stream per shape so a model is a pure function of its parameters.
  std::mt19937_64 rng(0x5EED0000ULL + static_cast<unsigned>(shape));
  const Vector3d z_axis = Vector3d::UnitZ();
  std::vector<Pose> syms = cyclic_symmetries(z_axis, symmetry_order);
  const std::size_t per_orbit = std::max<std::size_t>(1, n_points / syms.size());
  PointCloud base;

  switch (shape) {
    case Shape::kBox: {
      const auto d = check_dims(dims, 3, "box");
      if (symmetry_order != 1 && symmetry_order != 2 && symmetry_order != 4)
        throw Error(ErrorCode::kInvalidConfig, "box supports symmetry order 1, 2 or 4");
      if (symmetry_order == 4 && d[0] != d[1])
        throw Error(ErrorCode::kInvalidConfig, "4-fold box needs equal x and y");
      const Vector3d half(d[0] / 2, d[1] / 2, d[2] / 2);
      PointCloud corners;
      box_corners(corners, half, Vector3d::Zero());
      // Corners already form a closed orbit; only the random samples are replicated.
      while (base.size() + corners.size() / syms.size() < per_orbit)
        base.push_back(sample_box_surface(rng, half, Vector3d::Zero()));
      PointCloud pts = replicate(base, syms);
      pts.insert(pts.end(), corners.begin(), corners.end());
      return make_object_model(category_id, std::move(pts), std::move(syms), std::move(name));
    }
    case Shape::kCylinder:
    case Shape::kTube: {
      double outer, inner, length;
      if (shape == Shape::kCylinder) {
        const auto d = check_dims(dims, 2, "cylinder");
        outer = d[0];
        inner = 0.0;
        length = d[1];
      } else {
        const auto d = check_dims(dims, 3, "tube");
        outer = d[0];
        inner = d[1];
        length = d[2];
        if (!(inner < outer)) throw Error(ErrorCode::kInvalidConfig, "tube inner radius must be < outer");
      }
      const double sector = 2 * kPi / symmetry_order;
      // Rim points at azimuth 0 on both caps; for even orders their orbit
      // contains the opposite rim point, so the diameter is exact.
      base.emplace_back(outer, 0.0, length / 2);
      base.emplace_back(outer, 0.0, -length / 2);
      while (base.size() < per_orbit) base.push_back(sample_revolution(rng, outer, inner, length, sector));
      PointCloud pts = replicate(base, syms);
      return make_object_model(category_id, std::move(pts), std::move(syms), std::move(name));
    }
    case Shape::kLBracket: {
      const auto d = check_dims(dims, 4, "L-bracket");
      if (symmetry_order != 1) throw Error(ErrorCode::kInvalidConfig, "L-bracket is asymmetric");
      if (d[0] == d[1]) throw Error(ErrorCode::kInvalidConfig, "L-bracket legs must differ in length");
      const double lx = d[0], ly = d[1], w = d[2], th = d[3];
      // Leg A along x, leg B along y, sharing the corner square; origin at
      // the bounding-box center.
      const Vector3d off(-lx / 2, -ly / 2, 0.0);
      const Vector3d half_a(lx / 2, w / 2, th / 2), ca(lx / 2, w / 2, 0.0);
      const Vector3d half_b(w / 2, ly / 2, th / 2), cb(w / 2, ly / 2, 0.0);
      PointCloud pts;
      box_corners(pts, half_a, ca + off);
      box_corners(pts, half_b, cb + off);
      const double area_a = lx * w, area_b = ly * w;
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      while (pts.size() < n_points) {
        if (u01(rng) * (area_a + area_b) < area_a)
          pts.push_back(sample_box_surface(rng, half_a, ca + off));
        else
          pts.push_back(sample_box_surface(rng, half_b, cb + off));
      }
      return make_object_model(category_id, std::move(pts), {}, std::move(name));
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown shape");
}

}  // namespace multicam
