#include "bruhatlab/renorm.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bruhatlab {

namespace {

void check_ladder(const std::vector<double>& ladder, const char* op) {
    if (ladder.size() < 6) throw Error("InvalidLadder", op, "ladder needs at least 6 rungs");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0)) throw Error("InvalidLadder", op, "rungs must be positive");
        if (i > 0 && !(ladder[i] > ladder[i - 1])) throw Error("InvalidLadder", op, "ladder must increase strictly");
    }
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double harmonic(int n) {
    double h = 0.0;
    for (int j = 1; j <= n; ++j) h += 1.0 / j;
    return h;
}

// Fornberg weights for the m-th derivative at 0 on the given nodes.
std::vector<double> fornberg(int m, const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0];
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i];
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

double eval_real(const SectionOnG& f, const GroupoidElement& e) { return std::real(f.eval(e)); }

// Dotted coordinates of an element, or nullopt when the source is [0, 1].
bool dotted_coords(const GroupoidElement& e, cplx& zdot, cplx& wdot) {
    if (std::abs(e.alpha) < 1e-300) return false;
    const auto c = chart_xdot_coords(e);
    zdot = c.first;
    wdot = c.second;
    return true;
}

// Both factors see |wdot| = |w|, so either support bounds the w-integration box.
double w_box(const SectionOnG& f, const SectionOnG& g, const DefectOptions& opt) {
    return std::min({opt.w_extent, f.support_radius, g.support_radius});
}

}  // namespace

std::vector<double> default_ladder() { return {8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0}; }

std::vector<double> geometric_ladder(double lo, double hi, int rungs) {
    if (rungs < 2 || !(lo > 0.0) || !(hi > lo)) throw Error("InvalidLadder", "geometric_ladder", "need 0 < lo < hi and rungs >= 2");
    std::vector<double> out(rungs);
    for (int i = 0; i < rungs; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (rungs - 1));
    out.back() = hi;
    return out;
}

namespace {

// lambda = e^u turns the singular weight into a smooth exponential.
struct LogIntegrand {
    const RadialFunction& F;
    int k;
    double operator()(double u) const {
        const double l = std::exp(u);
        const double wgt = std::exp((1.0 - k) * u);
        if (!std::isfinite(l) || wgt == 0.0) return 0.0;
        const double v = F(l) * wgt;
        return std::isfinite(v) ? v : 0.0;
    }
};

// int_a^b in u, split into pieces of unit length.
double log_segment(const LogIntegrand& g, double a, double b) {
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);
    const int pieces = std::max(1, static_cast<int>(std::ceil(hi - lo)));
    const double step = (hi - lo) / pieces;
    KahanSum acc;
    for (int p = 0; p < pieces; ++p)
        acc.add(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo + p * step, lo + (p + 1) * step, 6,
                                                                               1e-14));
    return sign * acc.value();
}

double log_tail(const LogIntegrand& g) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
}

// Cutoff integrals on an increasing ladder, sharing the tail and the segments between rungs.
std::vector<double> cutoff_integrals(const RadialFunction& F, int k, const std::vector<double>& ladder) {
    if (k < 1) throw Error("InvalidOrder", "cutoff_integral", "k must be >= 1");
    const LogIntegrand g{F, k};
    std::vector<double> out(ladder.size());
    if (ladder.empty()) return out;
    double acc = log_tail(g) + log_segment(g, -std::log(ladder[0]), 0.0);
    out[0] = acc;
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        acc += log_segment(g, -std::log(ladder[i]), -std::log(ladder[i - 1]));
        out[i] = acc;
    }
    return out;
}

}  // namespace

double cutoff_integral(const RadialFunction& F, int k, double r0) {
    if (!(r0 > 0.0)) throw Error("InvalidLadder", "cutoff_integral", "r0 must be positive");
    return cutoff_integrals(F, k, {r0})[0];
}

RenormalizedValue fit_cutoff_values(const std::vector<double>& ladder, const std::vector<double>& values, int k,
                                    double max_residual) {
    check_ladder(ladder, "cutoff_expand");
    if (k < 1) throw Error("InvalidOrder", "cutoff_expand", "k must be >= 1");
    if (values.size() != ladder.size()) throw Error("SizeMismatch", "cutoff_expand", "values and ladder differ in size");
    const int rows = static_cast<int>(ladder.size());
    const int base = (k - 1) + 2;
    const int tail = std::max(0, std::min(6, rows - base - 1));
    const int cols = base + tail;

    std::vector<double> a(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        const double r = ladder[i];
        int c = 0;
        for (int j = 1; j <= k - 1; ++j) a[i * cols + c++] = std::pow(r, j);
        a[i * cols + c++] = std::log(r);
        a[i * cols + c++] = 1.0;
        for (int m = 1; m <= tail; ++m) a[i * cols + c++] = std::pow(r, -m);
    }
    // Column equilibration.
    std::vector<double> scale(cols, 0.0);
    for (int c = 0; c < cols; ++c) {
        for (int i = 0; i < rows; ++i) scale[c] = std::max(scale[c], std::abs(a[i * cols + c]));
        for (int i = 0; i < rows; ++i) a[i * cols + c] /= scale[c];
    }
    double resid = 0.0;
    std::vector<double> x = least_squares(a, rows, cols, values, &resid);
    for (int c = 0; c < cols; ++c) x[c] /= scale[c];

    RenormalizedValue out;
    out.ladder = ladder;
    out.values = values;
    out.tail_terms = tail;
    int c = 0;
    for (int j = 1; j <= k - 1; ++j) out.power_coeffs.push_back(x[c++]);
    out.log_coeff = x[c++];
    out.finite_part = x[c++];
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, std::abs(v));
    out.fit_residual = vmax > 0.0 ? resid / std::sqrt(static_cast<double>(rows)) / vmax : 0.0;
    if (out.fit_residual > max_residual)
        throw Error("FitResidualExceeded", "cutoff_expand",
                    "relative rms residual " + std::to_string(out.fit_residual) + " exceeds " + std::to_string(max_residual));
    return out;
}

RenormalizedValue cutoff_expand(const RadialFunction& F, int k, const std::vector<double>& ladder, double max_residual) {
    check_ladder(ladder, "cutoff_expand");
    return fit_cutoff_values(ladder, cutoff_integrals(F, k, ladder), k, max_residual);
}

namespace {

double log_moment(const DerivativeFn& dF, int k) {
    auto g = [&](double l) {
        if (!std::isfinite(l) || l <= 0.0) return 0.0;
        const double v = dF(k, l) * std::log(l);
        return std::isfinite(v) ? v : 0.0;
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double head = ts.integrate(g, 0.0, 1.0, 1e-14);
    const double tail = es.integrate(g, 1.0, std::numeric_limits<double>::infinity(), 1e-14);
    return head + tail;
}

}  // namespace

double renorm_constant_formula(const DerivativeFn& dF, int k) {
    if (k < 1) throw Error("InvalidOrder", "renorm_constant_formula", "k must be >= 1");
    return (harmonic(k - 1) * dF(k - 1, 0.0) - log_moment(dF, k)) / factorial(k - 1);
}

double renorm_constant_formula_uncorrected(const DerivativeFn& dF, int k) {
    if (k < 1) throw Error("InvalidOrder", "renorm_constant_formula_uncorrected", "k must be >= 1");
    return dF(k - 1, 0.0) * harmonic(k - 1) + log_moment(dF, k) / factorial(k - 1);
}

DerivativeFn finite_difference_derivatives(const RadialFunction& F, double step) {
    return [F, step](int m, double x) {
        if (m == 0) return F(x);
        const int half = m / 2 + 2;
        std::vector<double> nodes;
        for (int i = -half; i <= half; ++i) nodes.push_back(i * step);
        const std::vector<double> w = fornberg(m, nodes);
        KahanSum acc;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (w[i] != 0.0) acc.add(w[i] * F(x + nodes[i]));
        return acc.value();
    };
}

RenormalizedValue renormalized_integral(const LeafDensity& rho, const RenormOptions& opt) {
    const int na = opt.angular_nodes;
    // Angular average over zdot = rdot e^{-i theta}; the periodic trapezoid rule is spectral here.
    RadialFunction F = [&rho, na](double rdot) {
        KahanSum acc;
        for (int j = 0; j < na; ++j) {
            const double th = 2.0 * kPi * j / na;
            acc.add(rho(ChartPoint{Chart::Dotted, std::polar(rdot, -th)}));
        }
        return acc.value() * 2.0 * kPi / na;
    };
    return cutoff_expand(F, 3, opt.ladder, opt.max_residual);
}

double renormalized_integral_value(const LeafDensity& rho, const RenormOptions& opt) {
    return renormalized_integral(rho, opt).finite_part;
}

LeafDensity round_density(const std::function<double(const ChartPoint&)>& f) {
    return [f](const ChartPoint& p) {
        // (1 + |z|^2)^{-2} written in either chart.
        double d;
        if (p.chart == Chart::Undotted) {
            d = 1.0 / std::pow(1.0 + std::norm(p.coord), 2);
        } else {
            const double r2 = std::norm(p.coord);
            d = r2 * r2 / std::pow(1.0 + r2, 2);
        }
        return f(p) * d;
    };
}

double renormalized_supertrace(const LeafDensity& str_density, const RenormOptions& opt) {
    return renormalized_integral(str_density, opt).finite_part;
}

double renormalized_supertrace(const std::vector<FiberKernel>& blocks, const std::vector<int>& grading,
                               const RenormOptions& opt) {
    if (blocks.size() != grading.size())
        throw Error("SizeMismatch", "renormalized_supertrace", "one grading sign per block");
    for (const auto& b : blocks)
        if (!b.evaluator) throw Error("MissingEvaluator", "renormalized_supertrace", "diagonal block has no evaluator");
    LeafDensity str = [&blocks, &grading](const ChartPoint& p) {
        double s = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) s += grading[b] * std::real(blocks[b].evaluator(p, 0.0));
        return s;
    };
    return renormalized_supertrace(str, opt);
}

DefectLhs trace_defect_lhs(const SectionOnG& f, const SectionOnG& g, const DefectOptions& opt) {
    check_ladder(opt.ladder, "trace_defect_lhs");
    const double wext = w_box(f, g, opt);
    const GaussRule wr = gauss_legendre(opt.w_nodes, -wext, wext);
    const int nw = opt.w_nodes;

    // Radial panels: [0, rho_min], then log-spaced panels with every rung as a breakpoint.
    std::vector<double> breaks{0.0, opt.rho_min};
    std::vector<std::size_t> rung_break;
    double lo = opt.rho_min;
    for (double r : opt.ladder) {
        const int pieces = std::max(1, static_cast<int>(std::ceil(opt.panels_per_octave * std::log2(r / lo))));
        for (int p = 1; p <= pieces; ++p) breaks.push_back(lo * std::pow(r / lo, static_cast<double>(p) / pieces));
        breaks.back() = r;
        rung_break.push_back(breaks.size() - 1);
        lo = r;
    }
    const std::size_t panels = breaks.size() - 1;
    const GaussRule unit = gauss_legendre(opt.radial_nodes, 0.0, 1.0);
    const int na = opt.angular_nodes;

    std::vector<double> node_value(panels * opt.radial_nodes, 0.0);
    parallel_for(panels * opt.radial_nodes, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t p = idx / opt.radial_nodes;
            const int q = static_cast<int>(idx % opt.radial_nodes);
            const double a = breaks[p], b = breaks[p + 1];
            const double rho = a + (b - a) * unit.x[q];
            const double wrho = (b - a) * unit.w[q];
            KahanSum ring;
            for (int j = 0; j < na; ++j) {
                const cplx z = std::polar(rho, 2.0 * kPi * j / na);
                KahanSum inner;
                for (int i1 = 0; i1 < nw; ++i1) {
                    for (int i2 = 0; i2 < nw; ++i2) {
                        const cplx w(wr.x[i1], wr.x[i2]);
                        const GroupoidElement e = chart_x(z, w);
                        const GroupoidElement ei = chart_x(z + std::conj(w), -w);
                        const double v = eval_real(f, ei) * eval_real(g, e) - eval_real(g, ei) * eval_real(f, e);
                        inner.add(wr.w[i1] * wr.w[i2] * v);
                    }
                }
                ring.add(inner.value());
            }
            node_value[idx] = ring.value() * (2.0 * kPi / na) * rho * wrho;
        }
    });
    std::vector<double> values;
    KahanSum acc;
    std::size_t next = 0;
    for (std::size_t p = 0; p < panels; ++p) {
        for (int q = 0; q < opt.radial_nodes; ++q) acc.add(node_value[p * opt.radial_nodes + q]);
        if (next < rung_break.size() && p + 1 == rung_break[next]) {
            values.push_back(acc.value());
            ++next;
        }
    }
    DefectLhs out;
    out.fit = fit_cutoff_values(opt.ladder, values, opt.fit_order, opt.max_residual);
    out.finite_part = out.fit.finite_part;
    return out;
}

double trace_defect_rhs(const SectionOnG& f, const SectionOnG& g, const DefectOptions& opt) {
    const double wext = w_box(f, g, opt);
    const GaussRule wr = gauss_legendre(opt.rhs_nodes, -wext, wext);
    const int n = opt.rhs_nodes;
    const double hs = opt.fd_step;
    auto prod = [&](cplx zdot, cplx w) {
        return eval_real(f, chart_xdot(zdot, std::conj(w))) * eval_real(g, chart_xdot(zdot, -std::conj(w)));
    };
    std::vector<double> rows(n, 0.0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i1 = begin; i1 < end; ++i1) {
            KahanSum acc;
            for (int i2 = 0; i2 < n; ++i2) {
                const cplx w(wr.x[i1], wr.x[i2]);
                const double dx = (prod(cplx(hs, 0.0), w) - prod(cplx(-hs, 0.0), w)) / (2.0 * hs);
                const double dy = (prod(cplx(0.0, hs), w) - prod(cplx(0.0, -hs), w)) / (2.0 * hs);
                acc.add(wr.w[i2] * (w.real() * dx + w.imag() * dy));
            }
            rows[i1] = wr.w[i1] * acc.value();
        }
    });
    KahanSum total;
    for (double r : rows) total.add(r);
    return -kPi * total.value();
}

SectionOnG dotted_gaussian(const DottedGaussian& spec) {
    SectionOnG s;
    s.eval = [spec](const GroupoidElement& e) -> cplx {
        cplx zd, wd;
        if (!dotted_coords(e, zd, wd)) return 0.0;
        const double q = std::norm(zd - spec.a) / (spec.s * spec.s) + std::norm(wd - spec.b) / (spec.sigma * spec.sigma);
        return spec.amplitude * std::exp(-q);
    };
    // Numerical support: the factor is below e^{-36} beyond 6 sigma.
    s.support_radius = std::abs(spec.b) + 6.0 * spec.sigma;
    return s;
}

SectionOnG dotted_bump(const DottedGaussian& spec) {
    SectionOnG s;
    s.eval = [spec](const GroupoidElement& e) -> cplx {
        cplx zd, wd;
        if (!dotted_coords(e, zd, wd)) return 0.0;
        const double q = std::norm(zd - spec.a) / (spec.s * spec.s) + std::norm(wd - spec.b) / (spec.sigma * spec.sigma);
        if (q >= 1.0) return 0.0;
        return spec.amplitude * std::exp(1.0 - 1.0 / (1.0 - q));
    };
    s.support_radius = std::abs(spec.b) + spec.sigma;
    return s;
}

}  // namespace bruhatlab
