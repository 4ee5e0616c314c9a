#include "doctest.h"

#include "bruhatlab/kernel.hpp"

#include <sstream>

using namespace bruhatlab;

namespace {

FiberKernel gaussian(const Grid& g, double s2) {
    // Unit-mass Gaussian exp(-r^2 / (2 s2)) / (2 pi s2).
    return FiberKernel::invariant(g, [s2](double x, double y) {
        return cplx(std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * kPi * s2), 0.0);
    });
}

FiberKernel exponential(const Grid& g, double eps) {
    return FiberKernel::invariant(g, [eps](double x, double y) { return cplx(std::exp(-eps * std::hypot(x, y)), 0.0); });
}

double sup_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("delta is the convolution identity") {
    const Grid g = Grid::from_extent(6.0, 0.1);
    const FiberKernel f = gaussian(g, 0.5);
    const FiberKernel c = convolve(FiberKernel::delta(g), f);
    CHECK(sup_diff(c.samples, f.samples) < 1e-14);
}

TEST_CASE("gaussian convolution adds variances") {
    const Grid g = Grid::from_extent(8.0, 0.05);
    const FiberKernel c = convolve(gaussian(g, 0.3), gaussian(g, 0.5));
    const FiberKernel ref = gaussian(g, 0.8);
    CHECK(sup_diff(c.samples, ref.samples) < 1e-10);
}

TEST_CASE("min decay law under convolution") {
    const Grid g = Grid::from_extent(16.0, 1.0 / 16);
    FiberKernel a = exponential(g, 2.0), b = exponential(g, 1.0);
    a.decay_class = 2.0;
    b.decay_class = 1.0;
    const FiberKernel c = convolve(a, b);
    REQUIRE(c.decay_class.has_value());
    CHECK(*c.decay_class == doctest::Approx(1.0 - kDecaySlack));
    CHECK(decay_rate(c).rate >= 0.95);
}

TEST_CASE("decay rate regression") {
    const Grid g = Grid::from_extent(12.0, 1.0 / 16);
    const DecayFit f = decay_rate(FiberKernel::invariant(g, [](double x, double y) {
        return cplx(std::exp(-2.0 * std::hypot(x, y)), 0.0);
    }));
    CHECK(f.rate == doctest::Approx(2.0).epsilon(0.01));
    CHECK_FALSE(f.super_exponential);
    CHECK(decay_rate(gaussian(Grid::from_extent(6.0, 0.05), 0.5)).super_exponential);
}

TEST_CASE("one norm") {
    const Grid g = Grid::from_extent(8.0, 0.05);
    CHECK(one_norm(FiberKernel::delta(g)) == doctest::Approx(1.0));
    CHECK(one_norm(gaussian(g, 0.5)) == doctest::Approx(1.0).epsilon(1e-6));
    const FiberKernel a = gaussian(g, 0.4), b = exponential(g, 3.0);
    CHECK(one_norm(convolve(a, b)) <= one_norm(a) * one_norm(b) * (1.0 + 1e-3));
}

TEST_CASE("convolution associativity") {
    const Grid g = Grid::from_extent(6.0, 0.1);
    auto bump = [&](double cx, double w) {
        return FiberKernel::invariant(g, [=](double x, double y) {
            const double q = ((x - cx) * (x - cx) + y * y) / (w * w);
            return cplx(q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0, 0.0);
        });
    };
    const FiberKernel a = bump(0.5, 1.0), b = bump(-0.3, 0.8), c = bump(0.0, 1.2);
    const FiberKernel l = convolve(convolve(a, b), c), r = convolve(a, convolve(b, c));
    double peak = 0.0;
    for (const cplx& v : l.samples) peak = std::max(peak, std::abs(v));
    CHECK(sup_diff(l.samples, r.samples) / peak < 1e-6);
}

TEST_CASE("operator application and vector representation") {
    const Grid g = Grid::from_extent(5.0, 0.1);
    const FiberKernel k = gaussian(g, 0.3);
    SectionOnG one;
    one.eval = [](const GroupoidElement&) { return cplx(1.0, 0.0); };
    const UnitPoint x = point_from_z(cplx(0.4, 0.2));
    const cplx v = apply_operator(k, one).eval(fiber_element(x, 0.3));
    CHECK(std::abs(v - 1.0) < 1e-6);

    SectionOnG u;
    u.eval = [](const GroupoidElement& a) {
        const cplx q = fiber_offset(a);
        return cplx(std::exp(-std::norm(q - cplx(0.2, 0.0))), 0.0);
    };
    u.support_radius = 8.0;
    const SectionOnG du = apply_operator(FiberKernel::delta(g), u);
    const GroupoidElement a = fiber_element(x, cplx(0.5, -0.3));
    CHECK(std::abs(du.eval(a) - u.eval(a)) < 1e-12);

    auto f = [](const ChartPoint& p) {
        const cplx z = to_undotted(p).coord;
        return cplx(std::exp(-0.1 * std::norm(z)), 0.0);
    };
    const ChartPoint base{Chart::Undotted, cplx(0.5, 0.5)};
    CHECK(std::abs(vector_rep(FiberKernel::delta(g), f, base) - f(base)) < 1e-12);
    CHECK(std::abs(vector_rep(k, [](const ChartPoint&) { return cplx(1.0, 0.0); }, base) - 1.0) < 1e-6);
    // Multiplicativity: nu(k o k) f = nu(k)(nu(k) f) on an invariant Gaussian pair.
    const FiberKernel kk = convolve(k, k);
    auto nuf = [&](const ChartPoint& p) { return vector_rep(k, f, p); };
    const cplx lhs = vector_rep(kk, f, base), rhs = vector_rep(k, nuf, base);
    CHECK(std::abs(lhs - rhs) < 1e-6);
}

TEST_CASE("snapshot round trip and grid checks") {
    const Grid g = Grid::from_extent(2.0, 0.25);
    FiberKernel k = gaussian(g, 0.5);
    k.decay_class = 1.5;
    std::stringstream ss;
    write_snapshot(ss, k);
    const FiberKernel r = read_snapshot(ss);
    CHECK(r.grid == g);
    CHECK(r.decay_class.value() == 1.5);
    CHECK(sup_diff(r.samples, k.samples) == 0.0);
    std::stringstream bad("nonsense");
    CHECK_THROWS_AS(read_snapshot(bad), Error);
    CHECK_THROWS_AS(convolve(k, gaussian(Grid::from_extent(2.0, 0.2), 0.5)), Error);
    std::ostringstream csv;
    write_csv(csv, k);
    CHECK(csv.str().rfind("base_chart,base_re,base_im,x,y,re,im\n", 0) == 0);
}
