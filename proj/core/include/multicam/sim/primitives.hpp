#pragma once

#include <span>
#include <string_view>

#include "multicam/geometry/object_model.hpp"

namespace multicam {

enum class Shape { kBox, kCylinder, kTube, kLBracket };

std::string_view to_string(Shape shape);
Shape shape_from_string(std::string_view s);  // throws InvalidConfig

inline constexpr std::size_t kDefaultPrimitivePoints = 512;

/// Surface-sampled surrogate model. `dims` per shape:
///   box        {x, y, z}                  symmetry order 1, 2 or 4 about z
///   cylinder   {radius, length}           any order about z (axis)
///   tube       {outer, inner, length}     any order about z
///   L-bracket  {leg_x, leg_y, width, thickness}, leg_x != leg_y, order 1
/// Samples are replicated over the symmetry orbit so every symmetry maps the
/// cloud onto itself exactly; corners / rim points keep the diameter exact.
/// Throws InvalidConfig for bad dims or an unsupported order.
ObjectModel primitive_model(Shape shape, std::span<const double> dims,
                            int symmetry_order, int category_id = 0,
                            std::size_t n_points = kDefaultPrimitivePoints,
                            std::string name = {});

}  // namespace multicam
