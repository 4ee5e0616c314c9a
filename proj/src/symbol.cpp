#include "bruhatlab/symbol.hpp"

#include "bruhatlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bruhatlab {

namespace {

double fft_coord(int a, int m) { return a < m / 2 ? a : a - m; }

// Laplace-Fourier transform of an invariant kernel at xi + i eta for every xi of an m x m periodic box.
std::vector<cplx> box_transform(const FiberKernel& k, int m, double h, double eta1, double eta2) {
    const Grid& g = k.grid;
    std::vector<cplx> buf(static_cast<std::size_t>(m) * m);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const int a = ((i - g.half()) % m + m) % m, b = ((j - g.half()) % m + m) % m;
            const double w = std::exp(eta1 * g.coord(i) + eta2 * g.coord(j));
            buf[static_cast<std::size_t>(a) * m + b] += w * k.samples[g.index(i, j)];
        }
    dft2(buf, m, true);
    for (auto& v : buf) v *= h * h;
    return buf;
}

cplx nearest_sample(const FiberKernel& k, std::size_t b, cplx offset) {
    const Grid& g = k.grid;
    const int i = static_cast<int>(std::lround(offset.real() / g.h)) + g.half();
    const int j = static_cast<int>(std::lround(offset.imag() / g.h)) + g.half();
    if (i < 0 || j < 0 || i >= g.n || j >= g.n) return 0.0;
    return k.at_base(b)[g.index(i, j)];
}

double dotted_radius(const ChartPoint& x) {
    if (x.chart == Chart::Dotted) return std::abs(x.coord);
    if (x.coord == cplx(0.0, 0.0)) return std::numeric_limits<double>::infinity();
    return 1.0 / std::abs(x.coord);
}

}  // namespace

cplx laplace_fourier(const FiberKernel& kappa, cplx z1, cplx z2) {
    const double im = std::hypot(z1.imag(), z2.imag());
    if (kappa.decay_class) {
        if (im >= *kappa.decay_class)
            throw Error("DecayViolation", "laplace_fourier", "|Im zeta| reaches the decay class of the kernel");
    } else if (im > 0.0 && !is_compact_on_grid(kappa, 1e-8)) {
        throw Error("DecayViolation", "laplace_fourier", "kernel has no decay class and is not compact");
    }
    const Grid& g = kappa.grid;
    std::vector<cplx> e1(g.n), e2(g.n);
    for (int i = 0; i < g.n; ++i) {
        e1[i] = std::exp(cplx(0.0, -1.0) * g.coord(i) * z1);
        e2[i] = std::exp(cplx(0.0, -1.0) * g.coord(i) * z2);
    }
    cplx acc = 0.0;
    const auto& s = kappa.at_base(0);
    for (int i = 0; i < g.n; ++i) {
        cplx row = 0.0;
        for (int j = 0; j < g.n; ++j) row += s[g.index(i, j)] * e2[j];
        acc += e1[i] * row;
    }
    return acc * g.h * g.h;
}

cplx Symbol::operator()(cplx z1, cplx z2) const {
    cplx v = c0 + c2 * (z1 * z1 + z2 * z2);
    if (smoothing) v += laplace_fourier(*smoothing, z1, z2);
    return v;
}

std::vector<std::array<double, 2>> strip_shifts(double theta) {
    std::vector<std::array<double, 2>> out;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) {
            const double e1 = 0.5 * theta * a, e2 = 0.5 * theta * b;
            if (std::hypot(e1, e2) <= theta * (1.0 + 1e-12)) out.push_back({e1, e2});
        }
    const double d = theta / std::sqrt(2.0);
    for (int a : {-1, 1})
        for (int b : {-1, 1}) out.push_back({a * d, b * d});
    return out;
}

SymbolGrid sample_symbol(const Symbol& sym, const StripSpec& strip, double lambda, int nodes) {
    SymbolGrid g;
    g.lambda = lambda;
    g.nodes = nodes;
    g.order = strip.m;
    g.shifts = strip_shifts(strip.theta);
    for (const auto& eta : g.shifts) {
        std::vector<cplx> vals(static_cast<std::size_t>(nodes) * nodes);
        parallel_for(static_cast<std::size_t>(nodes), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                for (int j = 0; j < nodes; ++j)
                    vals[i * nodes + j] = sym(cplx(g.node(static_cast<int>(i)), eta[0]), cplx(g.node(j), eta[1]));
        });
        g.values.push_back(std::move(vals));
    }
    return g;
}

EllipticityVerdict strip_ellipticity(const SymbolGrid& grid, const StripSpec& strip, const EllipticityOptions& opt) {
    EllipticityVerdict v;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::array<cplx, 2> arg_lo{}, arg_hi{};
    for (std::size_t s = 0; s < grid.shifts.size(); ++s)
        for (int i = 0; i < grid.nodes; ++i)
            for (int j = 0; j < grid.nodes; ++j) {
                const cplx z1(grid.node(i), grid.shifts[s][0]), z2(grid.node(j), grid.shifts[s][1]);
                const double mod = std::sqrt(std::norm(z1) + std::norm(z2));
                const double r = std::abs(grid.values[s][static_cast<std::size_t>(i) * grid.nodes + j]) /
                                 std::pow(1.0 + mod, strip.m);
                // Ties go to the smallest |zeta|.
                if (r < lo || (r == lo && mod < std::sqrt(std::norm(arg_lo[0]) + std::norm(arg_lo[1])))) {
                    lo = r;
                    arg_lo = {z1, z2};
                }
                if (r > hi) {
                    hi = r;
                    arg_hi = {z1, z2};
                }
            }
    v.c_lower = lo;
    v.c_upper = hi;
    v.lambda = grid.lambda;
    v.lower_ok = std::isfinite(lo) && lo > opt.lower_floor * std::max(hi, 1e-300) &&
                 (strip.c_lower <= 0.0 || lo >= strip.c_lower);
    v.upper_ok = std::isfinite(hi) && (strip.c_upper <= 0.0 || hi <= strip.c_upper);
    v.witness = !v.lower_ok ? arg_lo : (!v.upper_ok ? arg_hi : arg_lo);
    v.pass = v.lower_ok && v.upper_ok;
    return v;
}

EllipticityVerdict strip_ellipticity(const Symbol& sym, const StripSpec& strip, const EllipticityOptions& opt) {
    EllipticityVerdict best;
    bool first = true;
    double lambda = opt.lambda0;
    for (int oct = 0; oct < opt.max_octaves; ++oct, lambda *= 2.0) {
        const EllipticityVerdict cur = strip_ellipticity(sample_symbol(sym, strip, lambda, opt.nodes), strip, opt);
        if (first) {
            best = cur;
            best.octaves = 1;
            first = false;
            continue;
        }
        const double old_lo = best.c_lower, old_hi = best.c_upper;
        if (cur.c_lower < best.c_lower) {
            best.c_lower = cur.c_lower;
            if (!cur.lower_ok || best.lower_ok) best.witness = cur.witness;
        }
        if (cur.c_upper > best.c_upper) best.c_upper = cur.c_upper;
        best.lambda = lambda;
        best.octaves = oct + 1;
        const double d_lo = std::abs(best.c_lower - old_lo) / std::max(old_lo, 1e-300);
        const double d_hi = std::abs(best.c_upper - old_hi) / std::max(old_hi, 1e-300);
        if ((d_lo < opt.drift || best.c_lower == 0.0) && d_hi < opt.drift) {
            best.stabilized = true;
            break;
        }
    }
    const double lo = best.c_lower, hi = best.c_upper;
    best.lower_ok = best.stabilized && lo > opt.lower_floor * std::max(hi, 1e-300) &&
                    (strip.c_lower <= 0.0 || lo >= strip.c_lower);
    best.upper_ok = best.stabilized && std::isfinite(hi) && (strip.c_upper <= 0.0 || hi <= strip.c_upper);
    best.pass = best.lower_ok && best.upper_ok;
    return best;
}

FiberKernel inverse_kernel(const Symbol& sym, const StripSpec& strip, double eps, const Grid& out,
                           InverseDiagnostics* diag) {
    if (!(eps > 0.0) || eps >= strip.theta)
        throw Error("EllipticityFailure", "inverse_kernel", "need 0 < eps < theta");
    const EllipticityVerdict ver = strip_ellipticity(sym, strip);
    if (!ver.pass) throw Error("EllipticityFailure", "inverse_kernel", "symbol is not elliptic on the strip");
    const double h = out.h;
    if (sym.smoothing && sym.smoothing->grid.h != h)
        throw Error("GridMismatch", "inverse_kernel", "smoothing kernel spacing differs from the output grid");

    // The periodic box must hide the e^{eps |p|}-amplified wrap-around images from the output window.
    const double lout = out.extent();
    const double lb = std::max(lout + 8.0, (7.0 + (2.0 + eps) * lout) / 2.0 + 2.0);
    const int m = fft_good_size(2 * static_cast<int>(std::ceil(lb / h)));
    const double dxi = 2.0 * kPi / (m * h);
    const double mu = std::max(2.0, 2.0 * strip.theta);
    if (diag) {
        diag->pole_proximity = strip.theta - eps < 0.25 * strip.theta;
        diag->box_nodes = m;
        diag->box_extent = 0.5 * m * h;
        diag->reference_mu = mu;
    }
    const std::size_t mm = static_cast<std::size_t>(m) * m;
    const bool use_ref = sym.c2 != 0.0;
    auto reference = [&](cplx z1, cplx z2) { return 1.0 / (sym.c2 * (mu * mu + z1 * z1 + z2 * z2)); };

    FiberKernel res;
    res.grid = out;
    res.samples.assign(out.size(), 0.0);
    const double norm = 1.0 / (static_cast<double>(m) * m * h * h);
    for (int d = 0; d < 4; ++d) {
        const double th = 0.25 * kPi + 0.5 * kPi * d;
        const double e1 = eps * std::cos(th), e2 = eps * std::sin(th);
        std::vector<cplx> khat;
        if (sym.smoothing) khat = box_transform(*sym.smoothing, m, h, e1, e2);
        std::vector<cplx> buf(mm);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const cplx z1(fft_coord(a, m) * dxi, e1), z2(fft_coord(b, m) * dxi, e2);
                const std::size_t idx = static_cast<std::size_t>(a) * m + b;
                cplx s = sym.c0 + sym.c2 * (z1 * z1 + z2 * z2);
                if (sym.smoothing) s += khat[idx];
                buf[idx] = 1.0 / s - (use_ref ? reference(z1, z2) : cplx(0.0));
            }
        dft2(buf, m, false);
        for (int i = 0; i < out.n; ++i)
            for (int j = 0; j < out.n; ++j) {
                const double x = out.coord(i), y = out.coord(j);
                double ang = std::atan2(y, x);
                if (ang < 0.0) ang += 2.0 * kPi;
                const int sector = (x == 0.0 && y == 0.0) ? 0 : std::min(3, static_cast<int>(ang / (0.5 * kPi)));
                if (sector != d) continue;
                const int a = ((i - out.half()) % m + m) % m, b = ((j - out.half()) % m + m) % m;
                res.samples[out.index(i, j)] = norm * std::exp(-(e1 * x + e2 * y)) * buf[static_cast<std::size_t>(a) * m + b];
            }
    }
    if (use_ref) {
        // The reference inverts in closed form: K_0(mu r) / (2 pi c2). Its origin sample is fixed so that the
        // lattice mass equals the exact mass 1 / (c2 mu^2), which cancels the log-singular aliasing term.
        const int reach = static_cast<int>(std::ceil(18.0 / (mu * h)));
        double lattice = 0.0;
        for (int i = -reach; i <= reach; ++i)
            for (int j = -reach; j <= reach; ++j)
                if (i != 0 || j != 0) lattice += std::cyl_bessel_k(0.0, mu * h * std::hypot(i, j));
        const double origin = 1.0 / (sym.c2 * mu * mu * h * h) - lattice / (2.0 * kPi * sym.c2);
        for (int i = 0; i < out.n; ++i)
            for (int j = 0; j < out.n; ++j) {
                const double r = out.radius(i, j);
                res.samples[out.index(i, j)] += r == 0.0 ? origin : std::cyl_bessel_k(0.0, mu * r) / (2.0 * kPi * sym.c2);
            }
    }
    res.decay_class = eps;
    double c = 0.0;
    for (int i = 0; i < out.n; ++i)
        for (int j = 0; j < out.n; ++j)
            c = std::max(c, std::abs(res.samples[out.index(i, j)]) * std::exp(eps * out.radius(i, j)));
    res.decay_constant = c;
    return res;
}

FredholmVerdict fredholm_verdict(bool principal_symbol_positive, const Symbol& singular_fiber_symbol,
                                 const StripSpec& strip, const EllipticityOptions& opt) {
    FredholmVerdict v;
    v.principal_ok = principal_symbol_positive;
    v.strip = strip_ellipticity(singular_fiber_symbol, strip, opt);
    v.fredholm = v.principal_ok && v.strip.pass;
    return v;
}

double bump_profile(double d, double r) {
    if (!std::isfinite(r)) return 1.0;
    if (d <= 0.5 * r) return 1.0;
    if (d >= r) return 0.0;
    const double u = (2.0 * d - r) / r;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

std::pair<FiberKernel, FiberKernel> split_kernel(const FiberKernel& kappa, double radius) {
    if (kappa.kind != KernelKind::Invariant) throw Error("KindMismatch", "split_kernel", "expects an invariant kernel");
    FiberKernel q = kappa, s = kappa;
    q.decay_class.reset();
    q.decay_constant = 0.0;
    const Grid& g = kappa.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double chi = bump_profile(g.radius(i, j), radius);
            q.samples[g.index(i, j)] *= chi;
            s.samples[g.index(i, j)] *= 1.0 - chi;
        }
    return {q, s};
}

FiberKernel singular_complement(const Symbol& sym, const FiberKernel& q_uniform) {
    const Grid& g = q_uniform.grid;
    const std::vector<cplx> qhat = grid_to_fourier(q_uniform.at_base(0), g);
    std::vector<cplx> khat;
    const bool same_grid = sym.smoothing && sym.smoothing->grid == g;
    if (same_grid) khat = grid_to_fourier(sym.smoothing->samples, g);
    std::vector<cplx> shat(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x1 = grid_frequency(g, i), x2 = grid_frequency(g, j);
            cplx s = sym.c0 + sym.c2 * (x1 * x1 + x2 * x2);
            if (sym.smoothing) s += same_grid ? khat[g.index(i, j)] : laplace_fourier(*sym.smoothing, x1, x2);
            shat[g.index(i, j)] = 1.0 / s - qhat[g.index(i, j)];
        }
    FiberKernel s;
    s.grid = g;
    s.samples = fourier_to_grid(shat, g);
    try {
        s.decay_class = decay_rate(s).certified;
    } catch (const Error&) {
        s.decay_class.reset();
    }
    return s;
}

FiberKernel assemble_parametrix(const FiberKernel& q_uniform, const FiberKernel& s_singular, const CutoffBump& cutoff,
                                const std::vector<ChartPoint>& bases) {
    if (cutoff.radius > cutoff.trivialization_radius)
        throw Error("CutoffSupport", "assemble_parametrix", "bump leaks outside the trivializing neighborhood");
    if (q_uniform.grid != s_singular.grid) throw Error("GridMismatch", "assemble_parametrix", "Q and S grids differ");
    if (q_uniform.kind == KernelKind::Family && q_uniform.bases.size() != bases.size())
        throw Error("GridMismatch", "assemble_parametrix", "Q family is indexed by different bases");
    bool s_zero = true;
    for (const cplx& v : s_singular.samples) s_zero = s_zero && v == cplx(0.0, 0.0);
    if (s_zero && q_uniform.kind == KernelKind::Family) return q_uniform;

    FiberKernel out;
    out.kind = KernelKind::Family;
    out.grid = q_uniform.grid;
    out.bases = bases;
    const double r = cutoff.radius;
    for (std::size_t b = 0; b < bases.size(); ++b) {
        const double chi = is_singular(bases[b]) ? 1.0 : bump_profile(dotted_radius(bases[b]), r);
        std::vector<cplx> v = q_uniform.kind == KernelKind::Family ? q_uniform.family[b] : q_uniform.samples;
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += chi * s_singular.samples[k];
        out.family.push_back(std::move(v));
    }
    const FiberKernel q = q_uniform, s = s_singular;
    out.evaluator = [q, s, r](const ChartPoint& base, cplx offset) {
        const double chi = is_singular(base) ? 1.0 : bump_profile(dotted_radius(base), r);
        const cplx qv = q.evaluator ? q.evaluator(base, offset) : nearest_sample(q, 0, offset);
        return qv + chi * nearest_sample(s, 0, offset);
    };
    if (q_uniform.decay_class || s_singular.decay_class) {
        const double a = q_uniform.decay_class.value_or(std::numeric_limits<double>::infinity());
        const double c = s_singular.decay_class.value_or(std::numeric_limits<double>::infinity());
        out.decay_class = std::min(a, c);
    }
    return out;
}

ResidualNorms singular_residual(const Symbol& sym, const FiberKernel& kappa) {
    const Grid& g = kappa.grid;
    std::size_t base = 0;
    if (kappa.kind == KernelKind::Family) {
        auto it = std::find_if(kappa.bases.begin(), kappa.bases.end(), [](const ChartPoint& p) { return is_singular(p); });
        if (it == kappa.bases.end()) throw Error("SingularLeaf", "singular_residual", "family has no singular base");
        base = static_cast<std::size_t>(it - kappa.bases.begin());
    }
    std::vector<cplx> khat = grid_to_fourier(kappa.at_base(base), g);
    std::vector<cplx> shat;
    const bool same_grid = sym.smoothing && sym.smoothing->grid == g;
    if (same_grid) shat = grid_to_fourier(sym.smoothing->samples, g);
    ResidualNorms r;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double x1 = grid_frequency(g, i), x2 = grid_frequency(g, j);
            cplx s = sym.c0 + sym.c2 * (x1 * x1 + x2 * x2);
            if (sym.smoothing) s += same_grid ? shat[g.index(i, j)] : laplace_fourier(*sym.smoothing, x1, x2);
            cplx& v = khat[g.index(i, j)];
            v = s * v - 1.0;
            r.fourier_sup = std::max(r.fourier_sup, std::abs(v));
        }
    const std::vector<cplx> res = fourier_to_grid(khat, g);
    KahanSum acc;
    for (const cplx& v : res) {
        r.sup = std::max(r.sup, std::abs(v));
        acc.add(std::abs(v) * g.h * g.h);
    }
    r.one_norm = acc.value();
    return r;
}

}  // namespace bruhatlab
