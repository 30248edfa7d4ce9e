#pragma once

#include <Eigen/Core>

namespace mjw {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline double det2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Rotation by +pi/2.
inline Vec2 perp(const Vec2& a) { return {-a.y(), a.x()}; }

constexpr double kPi = 3.14159265358979323846;

}  // namespace mjw
