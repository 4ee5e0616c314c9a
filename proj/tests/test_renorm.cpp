#include "doctest.h"

#include "bruhatlab/renorm.hpp"

using namespace bruhatlab;

namespace {

constexpr double kGammaE = 0.57721566490153286061;

// E_1(x) = -gamma - log x - sum_{n>=1} (-x)^n / (n n!), fine for small x.
double expint_e1(double x) {
    double s = 0.0, term = 1.0;
    for (int n = 1; n < 60; ++n) {
        term *= -x / n;
        s += term / n;
    }
    return -kGammaE - std::log(x) - s;
}

// Upper incomplete gamma Gamma(-m, x) by the downward recurrence from Gamma(0, x) = E_1(x).
double upper_gamma_negative(int m, double x) {
    double g = expint_e1(x);
    for (int a = 0; a > -m; --a) g = (g - std::pow(x, a - 1) * std::exp(-x)) / (a - 1);
    return g;
}

const std::vector<double> kLadder = geometric_ladder(8.0, 1024.0, 15);

}  // namespace

TEST_CASE("cutoff integral matches the incomplete gamma function") {
    const RadialFunction F = [](double l) { return std::exp(-l); };
    for (double r0 : {10.0, 100.0, 1000.0}) {
        CHECK(cutoff_integral(F, 1, r0) == doctest::Approx(expint_e1(1.0 / r0)).epsilon(1e-10));
        CHECK(cutoff_integral(F, 3, r0) == doctest::Approx(upper_gamma_negative(2, 1.0 / r0)).epsilon(1e-10));
    }
}

TEST_CASE("finite part of the exponential") {
    const RadialFunction F = [](double l) { return std::exp(-l); };
    const DerivativeFn dF = [](int m, double x) { return (m % 2 ? -1.0 : 1.0) * std::exp(-x); };
    const RenormalizedValue k1 = cutoff_expand(F, 1, kLadder);
    CHECK(k1.log_coeff == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(k1.finite_part == doctest::Approx(-kGammaE).epsilon(1e-7));

    // Gamma(-2, eps) = 1 / (2 eps^2) - 1 / eps - (log eps) / 2 + 3/4 - gamma/2 + O(eps).
    const double oracle = 0.75 - 0.5 * kGammaE;
    const RenormalizedValue k3 = cutoff_expand(F, 3, kLadder);
    CHECK(k3.finite_part == doctest::Approx(oracle).epsilon(1e-7));
    CHECK(k3.log_coeff == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(k3.power_coeffs.size() == 2);
    CHECK(k3.power_coeffs[0] == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(k3.power_coeffs[1] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(renorm_constant_formula(dF, 3) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(std::abs(renorm_constant_formula_uncorrected(dF, 3) - oracle) > 1.0);
}

TEST_CASE("constant formula agrees with the fit") {
    struct Case {
        RadialFunction F;
        DerivativeFn dF;
    };
    const std::vector<Case> cases{
        {[](double l) { return l * std::exp(-l); },
         [](int m, double x) { return (m % 2 ? -1.0 : 1.0) * (x - m) * std::exp(-x); }},
        {[](double l) { return std::exp(-2.0 * l); },
         [](int m, double x) { return std::pow(-2.0, m) * std::exp(-2.0 * x); }},
        {[](double l) { return 1.0 / (1.0 + l * l * l * l * l); }, {}},
    };
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const DerivativeFn dF = cases[c].dF ? cases[c].dF : finite_difference_derivatives(cases[c].F, 1e-2);
        for (int k = 1; k <= 3; ++k) {
            const RenormalizedValue v = cutoff_expand(cases[c].F, k, kLadder);
            CHECK(v.finite_part == doctest::Approx(renorm_constant_formula(dF, k)).epsilon(1e-6));
        }
    }
}

TEST_CASE("finite difference derivatives") {
    const DerivativeFn d = finite_difference_derivatives([](double x) { return std::sin(x); }, 1e-2);
    CHECK(d(0, 0.3) == doctest::Approx(std::sin(0.3)));
    CHECK(d(1, 0.3) == doctest::Approx(std::cos(0.3)).epsilon(1e-8));
    CHECK(d(2, 0.3) == doctest::Approx(-std::sin(0.3)).epsilon(1e-7));
}

TEST_CASE("ladder validation") {
    CHECK_THROWS_AS(fit_cutoff_values({1, 2, 3}, {1, 2, 3}, 1), Error);
    CHECK_THROWS_AS(fit_cutoff_values({1, 2, 3, 3, 5, 6}, {1, 2, 3, 4, 5, 6}, 1), Error);
    CHECK_THROWS_AS(geometric_ladder(10.0, 1.0, 5), Error);
    const auto l = geometric_ladder(8.0, 1024.0, 15);
    CHECK(l.front() == doctest::Approx(8.0));
    CHECK(l.back() == doctest::Approx(1024.0));
}

TEST_CASE("renormalized round area") {
    const LeafDensity rho = round_density([](const ChartPoint&) { return 1.0; });
    CHECK(renormalized_integral_value(rho) == doctest::Approx(kPi).epsilon(1e-7));
}

TEST_CASE("trace defect") {
    DefectOptions o;
    o.w_nodes = 32;
    o.angular_nodes = 32;
    o.panels_per_octave = 2;
    o.ladder = geometric_ladder(8.0, 256.0, 8);
    DottedGaussian a;
    a.s = 0.7;
    a.sigma = 0.6;
    a.a = cplx(0.1, 0.1);
    a.b = cplx(0.2, 0.1);
    const SectionOnG bump = dotted_bump(a);
    CHECK(std::abs(trace_defect_lhs(bump, bump, o).finite_part) < 1e-12);
    CHECK(std::abs(trace_defect_rhs(bump, bump, o)) < 1e-12);

    DottedGaussian fspec, gspec;
    fspec.s = 0.5;
    fspec.sigma = 0.5;
    gspec.a = cplx(0.2, 0.0);
    gspec.s = 0.7;
    gspec.b = cplx(0.3, 0.0);
    gspec.sigma = 0.5;
    const SectionOnG f = dotted_gaussian(fspec), g = dotted_gaussian(gspec);
    const double lhs = trace_defect_lhs(f, g, o).finite_part, rhs = trace_defect_rhs(f, g, o);
    CHECK(std::abs(rhs) > 1e-3);
    CHECK(std::abs(lhs - rhs) < 1e-2 * std::abs(rhs));
    CHECK(trace_defect_rhs(g, f, o) == doctest::Approx(-rhs).epsilon(1e-8));
}
