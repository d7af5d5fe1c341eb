#include <doctest.h>

#include <cmath>

#include "lncade/errors.hpp"
#include "lncade/geometry.hpp"
#include "lncade/rng.hpp"

using namespace lncade;

namespace {

double max_abs_off_identity(const Mat3& m) {
    double worst = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(m.m[r][c] - (r == c ? 1.0 : 0.0)));
    return worst;
}

}  // namespace

TEST_CASE("random_unit_vector: unit norm and determinism") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const Vec3 v = random_unit_vector(rng);
        CHECK(std::abs(norm(v) - 1.0) < 1e-12);
    }
    Rng a(99), b(99);
    for (int i = 0; i < 10; ++i) {
        const Vec3 va = random_unit_vector(a);
        const Vec3 vb = random_unit_vector(b);
        CHECK(va.x == vb.x);
        CHECK(va.y == vb.y);
        CHECK(va.z == vb.z);
    }
}

TEST_CASE("random_unit_vector: isotropy (Monte-Carlo mean near zero)") {
    Rng rng(12);
    Vec3 mean{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) mean += random_unit_vector(rng);
    mean = mean * (1.0 / n);
    CHECK(norm(mean) < 0.05);
}

TEST_CASE("rotation_from_axis_angle: zero angle is the identity") {
    Rng rng(13);
    for (int i = 0; i < 10; ++i) {
        const Mat3 r = rotation_from_axis_angle(random_unit_vector(rng), 0.0);
        CHECK(max_abs_off_identity(r) < 1e-15);
    }
}

TEST_CASE("rotation_from_axis_angle: quarter turn about z maps x to y") {
    const Mat3 r = rotation_from_axis_angle({0, 0, 1}, M_PI / 2.0);
    const Vec3 y = r.apply({1, 0, 0});
    CHECK(std::abs(y.x) < 1e-12);
    CHECK(std::abs(y.y - 1.0) < 1e-12);
    CHECK(std::abs(y.z) < 1e-12);
}

TEST_CASE("rotation_from_axis_angle: orthonormal, det +1, axis fixed") {
    Rng rng(14);
    for (int i = 0; i < 300; ++i) {
        const Vec3 axis = random_unit_vector(rng);
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const Mat3 r = rotation_from_axis_angle(axis, angle);

        CHECK(max_abs_off_identity(r * r.transposed()) < 1e-9);
        CHECK(std::abs(r.determinant() - 1.0) < 1e-9);

        const Vec3 fixed = r.apply(axis);
        CHECK(norm(fixed - axis) < 1e-12);
    }
}

TEST_CASE("rotation_from_axis_angle: rejects non-unit axes") {
    CHECK_THROWS_AS(rotation_from_axis_angle({1.0, 1.0, 0.0}, 0.3), DataError);
    CHECK_THROWS_AS(rotation_from_axis_angle({0.0, 0.0, 0.0}, 0.3), DataError);
}

TEST_CASE("random_in_ball: stays inside, zero radius degenerates") {
    Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 p = random_in_ball(rng, 3.0);
        CHECK(norm(p) <= 3.0);
    }
    const Vec3 z = random_in_ball(rng, 0.0);
    CHECK(norm(z) == 0.0);
}

TEST_CASE("random_in_ball: radius distribution matches uniform volume") {
    // mean distance of a uniform ball point is 3R/4
    Rng rng(16);
    const int n = 20000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += norm(random_in_ball(rng, 1.0));
    CHECK(sum / n == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("rng substreams are independent of draw interleaving") {
    Rng a = Rng::substream(42, 5);
    Rng other = Rng::substream(42, 6);
    (void)other.next_u64();
    Rng b = Rng::substream(42, 5);
    for (int i = 0; i < 8; ++i) CHECK(a.next_u64() == b.next_u64());
}
