#include "doctest.h"

#include "bruhatlab/heat.hpp"
#include "bruhatlab/symbol.hpp"

using namespace bruhatlab;

namespace {

double sup_diff(const FiberKernel& a, const FiberKernel& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) m = std::max(m, std::abs(a.samples[i] - b.samples[i]));
    return m;
}

FiberKernel exact_gaussian(const Grid& g, double t, double f = 0.0) {
    return FiberKernel::invariant(g, [=](double x, double y) { return cplx(std::exp(-f * t) * gaussian_q(std::hypot(x, y), t), 0.0); });
}

FiberKernel bump_kernel(const Grid& g) {
    return FiberKernel::invariant(g, [](double x, double y) {
        const double r2 = x * x + y * y;
        return cplx(0.4 * std::exp(-r2 / 0.5) * bump_profile(std::sqrt(r2), 2.0), 0.0);
    });
}

double mass(const FiberKernel& k) {
    double s = 0.0;
    for (const cplx& v : k.samples) s += v.real();
    return s * k.grid.h * k.grid.h;
}

}  // namespace

TEST_CASE("gaussian heat kernel") {
    CHECK(gaussian_q(0.0, 1.0) == doctest::Approx(1.0 / (4.0 * kPi)));
    const Grid g = Grid::from_extent(12.0, 0.05);
    for (double t : {0.1, 0.5, 1.0}) CHECK(mass(exact_gaussian(g, t)) == doctest::Approx(1.0).epsilon(1e-10));
    const FiberKernel c = convolve(exact_gaussian(g, 0.2), exact_gaussian(g, 0.3));
    CHECK(sup_diff(c, exact_gaussian(g, 0.5)) < 1e-8);
}

TEST_CASE("cutoff profile") {
    const CutoffSpec c{1.0};
    CHECK(c.chi(0.4) == 1.0);
    CHECK(c.chi(1.0) == 0.0);
    for (double d = 0.5; d < 1.0; d += 0.01) {
        CHECK(c.chi(d) >= 0.0);
        CHECK(c.chi(d) <= 1.0);
        const double h = 1e-6;
        CHECK(c.dchi(d) == doctest::Approx((c.chi(d + h) - c.chi(d - h)) / (2 * h)).epsilon(1e-5));
    }
    CHECK(CutoffSpec{}.trivial());
}

TEST_CASE("transport coefficients") {
    const Grid g = Grid::from_extent(3.0, 0.1);
    const auto zero = phi_coefficients([](cplx) { return 0.0; }, g, 3);
    for (int i = 1; i <= 3; ++i)
        for (double v : zero[i]) CHECK(v == 0.0);
    const double c = 0.7;
    const auto cst = phi_coefficients([c](cplx) { return c; }, g, 4);
    double fact = 1.0;
    for (int i = 0; i <= 4; ++i) {
        if (i > 0) fact *= i;
        for (double v : cst[i]) CHECK(std::abs(v - std::pow(-c, i) / fact) < 1e-10);
    }
    auto bump = [](cplx p) { return std::exp(-std::norm(p - cplx(0.3, 0.1))); };
    const auto b = phi_coefficients(bump, g, 1);
    // Independent midpoint quadrature of -int_0^1 F(tau p) dtau.
    for (auto [i, j] : {std::pair<int, int>{5, 7}, {20, 12}, {30, 30}}) {
        const cplx p(g.coord(i), g.coord(j));
        double s = 0.0;
        const int n = 4000;
        for (int k = 0; k < n; ++k) s += bump((k + 0.5) / n * p) / n;
        CHECK(b[1][g.index(i, j)] == doctest::Approx(-s).epsilon(1e-7));
    }
}

TEST_CASE("gaussian parametrix") {
    const Grid g = Grid::from_extent(4.0, 0.05);
    PerturbationSpec free;
    CHECK(sup_diff(parametrix_GN(free, CutoffSpec{}, 3, 0.2, g), exact_gaussian(g, 0.2)) == 0.0);
    double res = 0.0;
    for (const cplx& v : parametrix_residual(free, CutoffSpec{}, 3, 0.2, g).samples) res = std::max(res, std::abs(v));
    CHECK(res == 0.0);

    PerturbationSpec pot;
    pot.f = 0.8;
    const double t = 0.3;
    const FiberKernel gn = parametrix_GN(pot, CutoffSpec{}, 3, t, g);
    const double x = -pot.f * t, partial = 1.0 + x + x * x / 2.0 + x * x * x / 6.0;
    CHECK(sup_diff(gn, exact_gaussian(g, t, 0.0)) > 0.0);
    CHECK(gn.samples[g.center()].real() == doctest::Approx(partial * gaussian_q(0.0, t)).epsilon(1e-14));

    // Residual sup scales like t^{N - 1} for n = 2.
    const int N = 3;
    std::vector<double> lt, lr;
    for (double tt : {0.01, 0.02, 0.05, 0.1}) {
        double m = 0.0;
        for (const cplx& v : parametrix_residual(pot, CutoffSpec{}, N, tt, g).samples) m = std::max(m, std::abs(v));
        lt.push_back(std::log(tt));
        lr.push_back(std::log(m));
    }
    CHECK((lr.back() - lr.front()) / (lt.back() - lt.front()) == doctest::Approx(N - 1.0).epsilon(0.05));

    // Initial condition on a wide Gaussian section.
    const Grid wide = Grid::from_extent(40.0, 0.5);
    std::vector<cplx> u(wide.size());
    for (int i = 0; i < wide.n; ++i)
        for (int j = 0; j < wide.n; ++j)
            u[wide.index(i, j)] = std::exp(-(wide.coord(i) * wide.coord(i) + wide.coord(j) * wide.coord(j)) / 100.0);
    const std::vector<cplx> gu = apply_parametrix(free, 3, 1e-3, u, wide);
    double err = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) err = std::max(err, std::abs(gu[k] - u[k]));
    CHECK(err < 1e-4);
}

TEST_CASE("levi series against closed forms") {
    const Grid g = Grid::from_extent(10.0, 0.05);
    const std::vector<double> ts{0.01, 0.1, 1.0};
    const HeatSeriesState free = levi_series(PerturbationSpec{}, CutoffSpec{}, 3, ts, g);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const FiberKernel ref = exact_gaussian(g, ts[i]);
        CHECK(sup_diff(free.kernels[i], ref) / ref.samples[g.center()].real() < 1e-8);
        CHECK(mass(free.kernels[i]) == doctest::Approx(1.0).epsilon(1e-6));
        for (const cplx& v : free.kernels[i].samples) CHECK(v.real() >= 0.0);
    }
    PerturbationSpec pot;
    pot.f = 0.7;
    const HeatSeriesState p3 = levi_series(pot, CutoffSpec{}, 3, ts, g), p4 = levi_series(pot, CutoffSpec{}, 4, ts, g);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const FiberKernel ref = exact_gaussian(g, ts[i], pot.f);
        CHECK(sup_diff(p3.kernels[i], ref) / ref.samples[g.center()].real() < 1e-6);
        CHECK(sup_diff(p3.kernels[i], p4.kernels[i]) / ref.samples[g.center()].real() < 1e-10);
    }
    CHECK_THROWS_AS(levi_series(pot, CutoffSpec{}, 2, ts, g), Error);
    CHECK_THROWS_AS(levi_series(pot, CutoffSpec{1.0}, 3, ts, g), Error);
}

TEST_CASE("levi and duhamel agree for a smoothing perturbation") {
    const Grid g = Grid::from_extent(6.0, 0.1);
    PerturbationSpec spec;
    spec.f = 0.3;
    spec.k_kernel = bump_kernel(g);
    const HeatSeriesState st = levi_series(spec, CutoffSpec{}, 3, {0.5}, g);
    const DuhamelResult d = duhamel_series(spec, 0.5, g);
    CHECK(sup_diff(st.kernels[0], d.kernel) < 1e-5);
    CHECK(sup_diff(st.kernels[0], heat_closed_form(spec, 0.5, g)) < 1e-8);
    std::vector<double> qn;
    for (const auto& v : st.term_norms) qn.push_back(v[0]);
    CHECK(fit_factorial_envelope(qn, 0.5, 0).within_factor_two);
    for (double r : st.heat_residual) CHECK(r < 1e-6);

    PerturbationSpec unperturbed;
    unperturbed.f = 0.3;
    CHECK(sup_diff(duhamel_series(unperturbed, 0.5, g).kernel, exact_gaussian(g, 0.5, 0.3)) < 1e-8);
}

TEST_CASE("factorial envelope fit") {
    std::vector<double> norms;
    const double C = 2.0, M = 1.5, t = 0.7;
    double fact = 1.0;
    for (int k = 1; k <= 10; ++k) {
        fact *= k;
        norms.push_back(C * std::pow(M, k) * std::pow(t, k) / fact);
    }
    const FactorialEnvelope e = fit_factorial_envelope(norms, t, 0);
    CHECK(e.log_c == doctest::Approx(std::log(C)));
    CHECK(e.log_m == doctest::Approx(std::log(M)));
    CHECK(e.within_factor_two);
}

TEST_CASE("off-diagonal decay certificates") {
    const Grid g = Grid::from_extent(6.0, 0.05);
    CHECK(offdiag_decay_check(exact_gaussian(g, 0.1), 5.0).pass);
    PerturbationSpec spec;
    spec.f = 0.3;
    spec.k_kernel = bump_kernel(Grid::from_extent(8.0, 0.1));
    const HeatSeriesState st = levi_series(spec, CutoffSpec{}, 3, {1.0}, Grid::from_extent(8.0, 0.1));
    const DecayCertificate c = offdiag_decay_check(st.kernels[0], 1.0);
    CHECK(c.pass);
    CHECK(std::isfinite(c.c));
    CHECK_THROWS_AS(offdiag_decay_check(exact_gaussian(g, 0.1), 0.5), Error);
}

TEST_CASE("short time fit") {
    std::vector<double> ts;
    for (int i = 0; i < 9; ++i) ts.push_back(1e-3 * std::pow(10.0, 2.0 * i / 8.0));
    std::vector<double> free, pot;
    const double c = 0.4;
    for (double t : ts) {
        free.push_back(gaussian_q(0.0, t));
        pot.push_back(std::exp(-c * t) * gaussian_q(0.0, t));
    }
    const ShortTimeFit a = short_time_fit(ts, free);
    CHECK(a.coeffs[0] == doctest::Approx(1.0));
    for (std::size_t i = 1; i < a.coeffs.size(); ++i) CHECK(std::abs(a.coeffs[i]) < 1e-8);
    const ShortTimeFit b = short_time_fit(ts, pot);
    CHECK(b.coeffs[1] == doctest::Approx(-c).epsilon(1e-6));
    CHECK(b.residual < 1e-4);
    CHECK_THROWS_AS(short_time_fit({0.01, 0.02, 0.03, 0.04, 0.05, 0.06}, free), Error);
}
