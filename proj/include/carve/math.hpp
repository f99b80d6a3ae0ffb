#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace carve {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double radians(double deg) { return deg * (kPi / 180.0); }
inline double degrees(double rad) { return rad * (180.0 / kPi); }

// Axis-aligned box in world space.
struct Box3 {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return 0.5 * (lo + hi); }
    bool contains(const Vec3& p) const {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
               p.y() <= hi.y() && p.z() >= lo.z() && p.z() <= hi.z();
    }
    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    static Box3 empty() {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {Vec3(inf, inf, inf), Vec3(-inf, -inf, -inf)};
    }
};

// UV-space rectangle, [lo, hi] inclusive.
struct Box2 {
    Vec2 lo{0, 0};
    Vec2 hi{0, 0};
    Vec2 extent() const { return hi - lo; }
};

}  // namespace carve
