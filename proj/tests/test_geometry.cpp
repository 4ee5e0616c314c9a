#include "doctest.h"

#include "bruhatlab/geometry.hpp"

#include <random>

using namespace bruhatlab;

TEST_CASE("poisson bivector in both charts") {
    CHECK(poisson_bivector({Chart::Undotted, 0.0}) == 1.0);
    CHECK(poisson_bivector({Chart::Dotted, 0.0}) == 0.0);
    // Push forward d_x ^ d_y under zdot = 1/z: the Jacobian determinant is |z|^{-4}.
    for (cplx z : {cplx(0.5, 0.2), cplx(-2.0, 1.0), cplx(0.1, -3.0)}) {
        const double h = 1e-6;
        const cplx dx = (1.0 / (z + h) - 1.0 / (z - h)) / (2.0 * h);
        const cplx dy = (1.0 / (z + cplx(0, h)) - 1.0 / (z - cplx(0, h))) / (2.0 * h);
        const double jac = dx.real() * dy.imag() - dx.imag() * dy.real();
        const double pushed = poisson_bivector({Chart::Undotted, z}) * jac;
        CHECK(pushed == doctest::Approx(poisson_bivector({Chart::Dotted, 1.0 / z})).epsilon(1e-8));
    }
}

TEST_CASE("leaf metric is Euclidean") {
    for (cplx z : {cplx(0.0, 0.0), cplx(3.0, 4.0)}) {
        const auto g = leaf_metric({Chart::Undotted, z});
        CHECK(g[0] == 1.0);
        CHECK(g[1] == 0.0);
        CHECK(g[2] == 0.0);
        CHECK(g[3] == 1.0);
    }
    CHECK_THROWS_AS(leaf_metric({Chart::Dotted, 0.0}), Error);
}

TEST_CASE("fiber distance") {
    const UnitPoint x = point_from_z(cplx(0.3, -0.4));
    const GroupoidElement a = fiber_element(x, cplx(1.0, 2.0)), b = fiber_element(x, cplx(-0.5, 0.5));
    CHECK(fiber_distance(a, a) == 0.0);
    CHECK(fiber_distance(a, b) == doctest::Approx(std::abs(cplx(1.5, 1.5))));
    CHECK_THROWS_AS(fiber_distance(a, fiber_element(point_from_z(2.0), 0.0)), Error);

    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 1000; ++i) {
        const GroupoidElement p = fiber_element(x, {nd(gen), nd(gen)}), q = fiber_element(x, {nd(gen), nd(gen)}),
                              r = fiber_element(x, {nd(gen), nd(gen)});
        CHECK(fiber_distance(p, r) <= fiber_distance(p, q) + fiber_distance(q, r) + 1e-12);
    }
}

TEST_CASE("right invariance of fiber distance") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const UnitPoint x = point_from_z({nd(gen), nd(gen)});
        const GroupoidElement a = fiber_element(x, {nd(gen), nd(gen)}), b = fiber_element(x, {nd(gen), nd(gen)});
        // c has target x, so a c and b c lie on the fiber over source(c).
        const UnitPoint y = point_from_z({nd(gen), nd(gen)});
        const GroupoidElement c = inverse(fiber_element(x, point_z(y) - point_z(x)));
        CHECK(fiber_distance(multiply(a, c), multiply(b, c)) == doctest::Approx(fiber_distance(a, b)).epsilon(1e-8));
    }
}

TEST_CASE("singular fiber scale is the regular-fiber limit") {
    const double c = singular_fiber_scale();
    CHECK(c == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(singular_fiber_scale_limit(4) == doctest::Approx(c).epsilon(1e-6));
    const GroupoidElement a = canonicalize(1.0, 0.0, 0.0), b = canonicalize(1.0, 0.0, cplx(3.0, 4.0));
    CHECK(fiber_distance(a, b) == doctest::Approx(5.0 * c));
}

TEST_CASE("fiber volumes") {
    const UnitPoint x = point_from_z(cplx(0.2, 0.1));
    const double sq = fiber_region_volume(
        x,
        [&](const GroupoidElement& g) {
            const cplx q = fiber_offset(g);
            return q.real() >= 0.0 && q.real() < 1.0 && q.imag() >= 0.0 && q.imag() < 1.0;
        },
        2.0, 0.01);
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-9));
    // Quadratic growth of balls: log-log slope 2.
    std::vector<double> lr, lv;
    for (double r : {1.0, 3.0, 10.0, 30.0}) {
        const double v = fiber_region_volume(
            x, [&](const GroupoidElement& g) { return std::abs(fiber_offset(g)) < r; }, r * 1.1, r / 50.0);
        lr.push_back(std::log(r));
        lv.push_back(std::log(v));
    }
    const double slope = (lv.back() - lv.front()) / (lr.back() - lr.front());
    CHECK(slope == doctest::Approx(2.0).epsilon(0.025));
}

TEST_CASE("round volume") {
    CHECK(round_volume({Chart::Undotted, 0.0}) == 1.0);
    // Closed form: int_0^R 2 pi r (1 + r^2)^{-2} dr = pi R^2 / (1 + R^2); midpoint rule on [0, 200].
    const int n = 200000;
    const double R = 200.0, h = R / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = (i + 0.5) * h;
        s += 2.0 * kPi * r * round_volume({Chart::Undotted, r}) * h;
    }
    CHECK(s == doctest::Approx(kPi * R * R / (1.0 + R * R)).epsilon(1e-7));
    // Chart change at |z| = 1: the dotted density times |d zdot / dz|^2 = |z|^{-4} matches.
    const cplx z = std::polar(1.0, 0.8);
    CHECK(round_volume({Chart::Dotted, 1.0 / z}) / std::pow(std::abs(z), 4) ==
          doctest::Approx(round_volume({Chart::Undotted, z})));
}

TEST_CASE("chart point conversions") {
    const ChartPoint p{Chart::Undotted, cplx(2.0, -1.0)};
    const ChartPoint q = to_dotted(p);
    CHECK(std::abs(q.coord - 1.0 / p.coord) < 1e-15);
    CHECK(std::abs(to_undotted(q).coord - p.coord) < 1e-15);
    CHECK_THROWS_AS(to_undotted({Chart::Dotted, 0.0}), Error);
    CHECK(is_singular(from_unit_point({1.0, 0.0})));
}
