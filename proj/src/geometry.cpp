#include "lncade/geometry.hpp"

namespace lncade {

Mat3 rotation_from_axis_angle(const Vec3& axis, double angle_rad) {
    const double n = norm(axis);
    if (std::abs(n - 1.0) > 1e-9) throw DataError("rotation axis must be unit length");

    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    const double t = 1.0 - c;
    const double ax = axis.x, ay = axis.y, az = axis.z;

    Mat3 r;
    r.m[0][0] = c + ax * ax * t;
    r.m[0][1] = ax * ay * t - az * s;
    r.m[0][2] = ax * az * t + ay * s;
    r.m[1][0] = ay * ax * t + az * s;
    r.m[1][1] = c + ay * ay * t;
    r.m[1][2] = ay * az * t - ax * s;
    r.m[2][0] = az * ax * t - ay * s;
    r.m[2][1] = az * ay * t + ax * s;
    r.m[2][2] = c + az * az * t;
    return r;
}

Vec3 random_unit_vector(Rng& rng) {
    const double z = 1.0 - 2.0 * rng.next_double();
    const double phi = 6.283185307179586476925286766559 * rng.next_double();
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 random_in_ball(Rng& rng, double radius) {
    if (radius <= 0.0) return {0.0, 0.0, 0.0};
    for (;;) {
        const Vec3 p{rng.uniform(-radius, radius), rng.uniform(-radius, radius),
                     rng.uniform(-radius, radius)};
        if (dot(p, p) <= radius * radius) return p;
    }
}

}  // namespace lncade
