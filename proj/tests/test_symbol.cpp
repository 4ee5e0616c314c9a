#include "doctest.h"

#include "bruhatlab/fft.hpp"
#include "bruhatlab/symbol.hpp"

using namespace bruhatlab;

namespace {

FiberKernel normalized_gaussian(const Grid& g, double s) {
    return FiberKernel::invariant(g, [s](double x, double y) {
        return cplx(std::exp(-(x * x + y * y) / (2.0 * s * s)) / (2.0 * kPi * s * s), 0.0);
    });
}

// K_0(r) = int_0^inf exp(-r cosh u) du by the trapezoid rule (spectrally accurate for this integrand).
double bessel_k0(double r) {
    const double h = 1e-3;
    double s = 0.5 * std::exp(-r);
    for (int i = 1; i < 20000; ++i) s += std::exp(-r * std::cosh(i * h));
    return s * h;
}

}  // namespace

TEST_CASE("laplace fourier transform") {
    const Grid g = Grid::from_extent(6.0, 0.05);
    CHECK(std::abs(laplace_fourier(FiberKernel::delta(g), cplx(0.7, 0.2), cplx(-1.1, 0.1)) - 1.0) < 1e-12);
    const double s = 0.6;
    const FiberKernel k = normalized_gaussian(g, s);
    for (auto [z1, z2] : {std::pair<cplx, cplx>{0.5, -1.0}, {cplx(0.3, 0.4), cplx(1.0, -0.2)}}) {
        const cplx expect = std::exp(-0.5 * s * s * (z1 * z1 + z2 * z2));
        CHECK(std::abs(laplace_fourier(k, z1, z2) - expect) < 1e-10);
    }
    const Symbol lap{1.0, 1.0, std::nullopt};
    CHECK(std::abs(lap(cplx(1.0, 0.5), cplx(0.0, 0.3)) - (1.0 + cplx(1.0, 0.5) * cplx(1.0, 0.5) + cplx(0.0, 0.3) * cplx(0.0, 0.3))) < 1e-15);

    FiberKernel decaying = k;
    decaying.decay_class = 0.5;
    CHECK_THROWS_AS(laplace_fourier(decaying, cplx(0.0, 0.6), 0.0), Error);
}

TEST_CASE("transform is a homomorphism for convolution") {
    const Grid g = Grid::from_extent(6.0, 0.05);
    const FiberKernel a = normalized_gaussian(g, 0.5), b = FiberKernel::invariant(g, [](double x, double y) {
        return cplx(bump_profile(std::hypot(x - 0.3, y), 1.5), 0.0);
    });
    const FiberKernel c = convolve(a, b);
    const cplx z1(0.8, 0.2), z2(-0.4, 0.1);
    CHECK(std::abs(laplace_fourier(c, z1, z2) - laplace_fourier(a, z1, z2) * laplace_fourier(b, z1, z2)) < 1e-6);
}

TEST_CASE("fourier round trip on the grid") {
    const Grid g = Grid::from_extent(3.0, 0.1);
    const FiberKernel k = normalized_gaussian(g, 0.4);
    const std::vector<cplx> back = fourier_to_grid(grid_to_fourier(k.samples, g), g);
    double m = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) m = std::max(m, std::abs(back[i] - k.samples[i]));
    CHECK(m < 1e-12);
}

TEST_CASE("contour shift leaves the inverse transform unchanged") {
    // Grid function on a small box; its transform is a trigonometric polynomial, so the inverse
    // integral over a shifted Brillouin zone equals the unshifted one.
    const Grid g = Grid::from_extent(2.0, 0.1);
    const FiberKernel k = FiberKernel::invariant(g, [](double x, double y) {
        return cplx(std::exp(-(x * x + y * y)) * bump_profile(std::hypot(x, y), 2.0), 0.0);
    });
    const int m = 48;
    const double span = 2.0 * kPi / g.h, dxi = span / m;
    for (double eta : {0.25, 0.5}) {
        for (auto [px, py] : {std::pair<double, double>{0.0, 0.0}, {0.5, -0.3}, {-1.0, 0.7}}) {
            cplx acc = 0.0;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    const cplx z1(-0.5 * span + a * dxi, eta), z2(-0.5 * span + b * dxi, -eta);
                    acc += laplace_fourier(k, z1, z2) * std::exp(cplx(0.0, 1.0) * (px * z1 + py * z2));
                }
            acc *= dxi * dxi / (4.0 * kPi * kPi);
            const int i = g.half() + static_cast<int>(std::lround(px / g.h));
            const int j = g.half() + static_cast<int>(std::lround(py / g.h));
            CHECK(std::abs(acc - k.samples[g.index(i, j)]) < 1e-8);
        }
    }
}

TEST_CASE("strip ellipticity") {
    const StripSpec strip{0.5};
    const EllipticityVerdict ok = strip_ellipticity(Symbol{1.0, 1.0, std::nullopt}, strip);
    CHECK(ok.pass);
    CHECK(ok.stabilized);
    CHECK(ok.c_lower > 0.0);
    const EllipticityVerdict bad = strip_ellipticity(Symbol{0.0, 1.0, std::nullopt}, strip);
    CHECK_FALSE(bad.pass);
    CHECK(std::abs(bad.witness[0]) + std::abs(bad.witness[1]) == 0.0);

    const Grid g = Grid::from_extent(6.0, 0.1);
    StripSpec zero_order{0.5, 0.0};
    const EllipticityVerdict smooth = strip_ellipticity(Symbol{0.0, 0.0, normalized_gaussian(g, 0.5)}, zero_order);
    CHECK_FALSE(smooth.lower_ok);
    CHECK(std::abs(smooth.witness[0]) + std::abs(smooth.witness[1]) > 1.0);
}

TEST_CASE("fredholm verdicts") {
    const StripSpec strip{0.5};
    CHECK(fredholm_verdict(true, Symbol{1.0, 1.0, std::nullopt}, strip).fredholm);
    CHECK_FALSE(fredholm_verdict(true, Symbol{0.0, 1.0, std::nullopt}, strip).fredholm);
    CHECK_FALSE(fredholm_verdict(false, Symbol{1.0, 1.0, std::nullopt}, strip).fredholm);
    const Grid g = Grid::from_extent(4.0, 0.1);
    FiberKernel k = FiberKernel::invariant(g, [](double x, double y) {
        return cplx(0.05 * std::exp(-(x * x + y * y)) * bump_profile(std::hypot(x, y), 3.5), 0.0);
    });
    CHECK(fredholm_verdict(true, Symbol{1.0, 1.0, k}, strip).fredholm);
}

TEST_CASE("inverse kernel of the identity is the delta") {
    const Grid g = Grid::from_extent(2.0, 0.125);
    const FiberKernel k = inverse_kernel(Symbol{1.0, 0.0, std::nullopt}, StripSpec{0.5, 0.0}, 0.4, g);
    const FiberKernel d = FiberKernel::delta(g);
    double m = 0.0;
    for (std::size_t i = 0; i < k.samples.size(); ++i) m = std::max(m, std::abs(k.samples[i] - d.samples[i]));
    CHECK(m < 1e-9 * d.samples[g.center()].real());
}

TEST_CASE("inverse kernel of the shifted laplacian") {
    const Grid g = Grid::from_extent(12.0, 1.0 / 16);
    const Symbol sym{1.0, 1.0, std::nullopt};
    const FiberKernel k = inverse_kernel(sym, StripSpec{0.5}, 0.45, g);
    for (double r : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const int i = g.half() + static_cast<int>(std::lround(r / g.h));
        const double ref = bessel_k0(r) / (2.0 * kPi);
        CHECK(std::abs(k.samples[g.index(i, g.half())].real() - ref) / ref < 1e-3);
    }
    const DecayFit f = decay_rate(k);
    CHECK(f.rate > 0.9);
    CHECK(f.rate < 1.0 + kDecaySlack);

    // (Delta + 1) applied to k * u returns u for a smooth test function u.
    std::vector<cplx> u(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) u[g.index(i, j)] = std::exp(-0.5 * (std::pow(g.coord(i) - 0.3, 2) + g.coord(j) * g.coord(j)));
    std::vector<cplx> kh = grid_to_fourier(k.samples, g), uh = grid_to_fourier(u, g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x1 = grid_frequency(g, i), x2 = grid_frequency(g, j);
            const std::size_t idx = g.index(i, j);
            kh[idx] = (sym(x1, x2) * kh[idx] - 1.0) * uh[idx];
        }
    double res = 0.0;
    for (const cplx& v : fourier_to_grid(kh, g)) res = std::max(res, std::abs(v));
    CHECK(res < 1e-4);

    CHECK_THROWS_AS(inverse_kernel(Symbol{0.0, 1.0, std::nullopt}, StripSpec{0.5}, 0.45, g), Error);
    CHECK_THROWS_AS(inverse_kernel(sym, StripSpec{0.5}, 0.6, g), Error);
}

TEST_CASE("parametrix on the singular fiber") {
    const Grid g = Grid::from_extent(12.0, 1.0 / 16);
    const Symbol sym{1.0, 1.0, std::nullopt};
    const FiberKernel k = inverse_kernel(sym, StripSpec{0.5}, 0.45, g);
    const auto [q, rest] = split_kernel(k, 1.0);
    const FiberKernel s = singular_complement(sym, q);
    const std::vector<ChartPoint> bases{{Chart::Dotted, 0.0}, {Chart::Dotted, 0.2}, {Chart::Undotted, 0.5}};
    const FiberKernel par = assemble_parametrix(q, s, CutoffBump{0.5, 1.0}, bases);
    const ResidualNorms rn = singular_residual(sym, par);
    CHECK(rn.sup < 1e-6);
    // Away from the cutoff support only Q remains.
    double diff = 0.0;
    for (std::size_t i = 0; i < q.samples.size(); ++i) diff = std::max(diff, std::abs(par.family[2][i] - q.samples[i]));
    CHECK(diff == 0.0);

    FiberKernel zero = s;
    std::fill(zero.samples.begin(), zero.samples.end(), cplx(0.0, 0.0));
    const FiberKernel same = assemble_parametrix(q, zero, CutoffBump{0.5, 1.0}, bases);
    for (std::size_t b = 0; b < bases.size(); ++b) CHECK(same.family[b] == q.samples);
    CHECK_THROWS_AS(assemble_parametrix(q, s, CutoffBump{2.0, 1.0}, bases), Error);
}
