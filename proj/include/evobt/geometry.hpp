#pragma once

#include <cmath>
#include <numbers>

namespace evobt {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr bool operator==(const Vec2&) const = default;

    double length() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).length(); }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

inline Vec2 from_heading(double radians) { return {std::cos(radians), std::sin(radians)}; }

inline double heading_of(Vec2 v) { return std::atan2(v.y, v.x); }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a < 0) a += two_pi;
    return a - std::numbers::pi;
}

/// Unsigned angle between two vectors in [0, pi]; pi when either is zero.
inline double angle_between(Vec2 a, Vec2 b) {
    const double la = a.length();
    const double lb = b.length();
    if (la == 0.0 || lb == 0.0) return std::numbers::pi;
    double c = dot(a, b) / (la * lb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return std::acos(c);
}

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace evobt
