#include "bruhatlab/kernel.hpp"

#include "bruhatlab/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace bruhatlab {

namespace {

ChartPoint translate_base(const ChartPoint& x, cplx q) {
    if (is_singular(x)) return x;
    const ChartPoint u = to_undotted(x);
    return {Chart::Undotted, u.coord + q};
}

void require_same_grid(const FiberKernel& f, const FiberKernel& g, const char* op) {
    if (f.grid != g.grid) throw Error("GridMismatch", op, "kernels live on different grids");
}

void require_integrable(const FiberKernel& k, const char* op) {
    if (k.decay_class) return;
    if (!is_compact_on_grid(k, 1e-8))
        throw Error("NonIntegrable", op, "kernel has neither a decay class nor negligible tail on its grid");
}

std::optional<double> combined_decay(const FiberKernel& f, const FiberKernel& g) {
    if (f.decay_class && g.decay_class) return std::min(*f.decay_class, *g.decay_class) - kDecaySlack;
    if (f.decay_class) return *f.decay_class - kDecaySlack;
    if (g.decay_class) return *g.decay_class - kDecaySlack;
    return std::nullopt;
}

// out(p) = h^2 sum_q f_{x+q}(p - q) g(q) for a family f evaluated off-table.
std::vector<cplx> twisted_convolve(const FiberKernel& f, const ChartPoint& x, const std::vector<cplx>& gx) {
    const Grid& gr = f.grid;
    const int n = gr.n, half = gr.half();
    std::vector<cplx> out(gr.size());
    const double h2 = gr.h * gr.h;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ii = lo; ii < hi; ++ii) {
            const int i = static_cast<int>(ii);
            for (int j = 0; j < n; ++j) {
                cplx acc = 0.0;
                for (int a = 0; a < n; ++a) {
                    const int di = i - a + half;
                    if (di < 0 || di >= n) continue;
                    for (int b = 0; b < n; ++b) {
                        const int dj = j - b + half;
                        if (dj < 0 || dj >= n) continue;
                        const cplx g = gx[gr.index(a, b)];
                        if (g == cplx(0.0, 0.0)) continue;
                        const ChartPoint base = translate_base(x, cplx(gr.coord(a), gr.coord(b)));
                        acc += f.value(base, di, dj) * g;
                    }
                }
                out[gr.index(i, j)] = h2 * acc;
            }
        }
    });
    return out;
}

template <typename T>
void put(std::ostream& os, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        os.write(reinterpret_cast<const char*>(b), sizeof(T));
    } else {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("SnapshotCorrupt", "read_snapshot", "unexpected end of stream");
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

}  // namespace

FiberKernel FiberKernel::invariant(const Grid& g, const std::function<cplx(double, double)>& fn) {
    FiberKernel k;
    k.grid = g;
    k.samples.resize(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) k.samples[g.index(i, j)] = fn(g.coord(i), g.coord(j));
    return k;
}

FiberKernel FiberKernel::delta(const Grid& g, double mass) {
    FiberKernel k;
    k.grid = g;
    k.samples.assign(g.size(), 0.0);
    k.samples[g.center()] = mass / (g.h * g.h);
    return k;
}

FiberKernel FiberKernel::from_evaluator(const Grid& g, const std::vector<ChartPoint>& bases, Evaluator eval) {
    FiberKernel k;
    k.kind = KernelKind::Family;
    k.grid = g;
    k.bases = bases;
    k.evaluator = std::move(eval);
    for (const auto& b : bases) {
        std::vector<cplx> s(g.size());
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) s[g.index(i, j)] = k.evaluator(b, cplx(g.coord(i), g.coord(j)));
        k.family.push_back(std::move(s));
    }
    return k;
}

const std::vector<cplx>& FiberKernel::at_base(std::size_t b) const {
    return kind == KernelKind::Invariant ? samples : family.at(b);
}

cplx FiberKernel::value(const ChartPoint& base, int i, int j) const {
    if (kind == KernelKind::Invariant) return samples[grid.index(i, j)];
    if (evaluator) return evaluator(base, cplx(grid.coord(i), grid.coord(j)));
    for (std::size_t b = 0; b < bases.size(); ++b)
        if (bases[b].chart == base.chart && bases[b].coord == base.coord) return family[b][grid.index(i, j)];
    throw Error("MissingEvaluator", "FiberKernel::value", "family has no evaluator for an off-table base");
}

FiberKernel convolve(const FiberKernel& f, const FiberKernel& g) {
    require_same_grid(f, g, "convolve");
    require_integrable(f, "convolve");
    require_integrable(g, "convolve");
    FiberKernel out;
    out.grid = f.grid;
    out.decay_class = combined_decay(f, g);
    if (f.kind == KernelKind::Invariant && g.kind == KernelKind::Invariant) {
        out.samples = linear_convolve(f.samples, g.samples, f.grid);
        return out;
    }
    out.kind = KernelKind::Family;
    out.bases = g.kind == KernelKind::Family ? g.bases : f.bases;
    for (std::size_t b = 0; b < out.bases.size(); ++b) {
        const std::vector<cplx>& gx = g.kind == KernelKind::Family ? g.family[b] : g.samples;
        if (f.kind == KernelKind::Invariant)
            out.family.push_back(linear_convolve(f.samples, gx, f.grid));
        else
            out.family.push_back(twisted_convolve(f, out.bases[b], gx));
    }
    return out;
}

SectionOnG apply_operator(const FiberKernel& kappa, const SectionOnG& u) {
    require_integrable(kappa, "apply_operator");
    const FiberKernel k = kappa;
    SectionOnG out;
    out.support_radius = u.support_radius + std::sqrt(2.0) * k.grid.extent();
    out.eval = [k, u](const GroupoidElement& a) {
        const UnitPoint x = source(a);
        const ChartPoint xb = from_unit_point(x);
        const cplx p = fiber_offset(a);
        const Grid& gr = k.grid;
        cplx acc = 0.0;
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) {
                const cplx r(gr.coord(i), gr.coord(j));
                const cplx q = p - r;
                if (std::abs(q) > u.support_radius) continue;
                const GroupoidElement b = fiber_element(x, q);
                acc += k.value(translate_base(xb, q), i, j) * u.eval(b);
            }
        return acc * gr.h * gr.h * fiber_volume_density(x);
    };
    return out;
}

cplx vector_rep(const FiberKernel& kappa, const std::function<cplx(const ChartPoint&)>& f, const ChartPoint& x) {
    require_integrable(kappa, "vector_rep");
    const Grid& gr = kappa.grid;
    const double dens = fiber_volume_density(to_unit_point(x));
    cplx acc = 0.0;
    if (is_singular(x)) {
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) acc += kappa.value(x, i, j);
        return acc * f(x) * gr.h * gr.h * dens;
    }
    const ChartPoint xu = to_undotted(x);
    for (int i = 0; i < gr.n; ++i)
        for (int j = 0; j < gr.n; ++j) {
            const cplx r(gr.coord(i), gr.coord(j));
            const ChartPoint y{Chart::Undotted, xu.coord - r};
            acc += kappa.value(y, i, j) * f(y);
        }
    return acc * gr.h * gr.h * dens;
}

double one_norm(const FiberKernel& kappa) {
    require_integrable(kappa, "one_norm");
    const Grid& gr = kappa.grid;
    const double h2 = gr.h * gr.h;
    double best = 0.0;
    const std::size_t nb = kappa.kind == KernelKind::Invariant ? 1 : kappa.bases.size();
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& s = kappa.at_base(b);
        KahanSum fwd, bwd;
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) {
                fwd.add(std::abs(s[gr.index(i, j)]) * h2);
                const int mi = gr.n - 1 - i, mj = gr.n - 1 - j;
                if (kappa.kind == KernelKind::Invariant || !kappa.evaluator) {
                    bwd.add(std::abs(s[gr.index(mi, mj)]) * h2);
                } else {
                    const ChartPoint y = translate_base(kappa.bases[b], cplx(gr.coord(i), gr.coord(j)));
                    bwd.add(std::abs(kappa.value(y, mi, mj)) * h2);
                }
            }
        best = std::max({best, fwd.value(), bwd.value()});
    }
    return best;
}

ShellProfile shell_maxima(const FiberKernel& kappa) {
    const Grid& gr = kappa.grid;
    const int nsh = gr.half() + 1;
    std::vector<double> m(nsh, -1.0), d(nsh, 0.0);
    const std::size_t nb = kappa.kind == KernelKind::Invariant ? 1 : kappa.bases.size();
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& s = kappa.at_base(b);
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) {
                const double r = gr.radius(i, j);
                const int k = static_cast<int>(std::floor(r / gr.h + 0.5));
                if (k >= nsh || r > gr.extent() + 1e-12) continue;
                const double v = std::abs(s[gr.index(i, j)]);
                if (v > m[k]) {
                    m[k] = v;
                    d[k] = r;
                }
            }
    }
    ShellProfile p;
    for (int k = 0; k < nsh; ++k)
        if (m[k] >= 0.0) {
            p.d.push_back(d[k]);
            p.max_abs.push_back(m[k]);
        }
    return p;
}

DecayFit decay_rate(const FiberKernel& kappa, double d_min) {
    const ShellProfile prof = shell_maxima(kappa);
    const Grid& gr = kappa.grid;
    if (d_min < 0.0) d_min = std::max(2.0 * gr.h, gr.extent() / 8.0);
    double peak = 0.0;
    for (double v : prof.max_abs) peak = std::max(peak, v);
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < prof.d.size(); ++k) {
        if (prof.d[k] < d_min) continue;
        if (!(prof.max_abs[k] > 1e-13 * peak) || prof.max_abs[k] < 1e-300) break;
        xs.push_back(prof.d[k]);
        ys.push_back(std::log(prof.max_abs[k]));
    }
    const int m = static_cast<int>(xs.size());
    if (m < 8) throw Error("InsufficientExtent", "decay_rate", "fewer than 8 resolved shells beyond d_min");
    std::vector<double> a(static_cast<std::size_t>(m) * 3);
    for (int k = 0; k < m; ++k) {
        a[3 * k] = 1.0;
        a[3 * k + 1] = -xs[k];
        a[3 * k + 2] = -std::log(xs[k]);
    }
    double res = 0.0;
    const auto c = least_squares(a, m, 3, ys, &res);
    DecayFit fit;
    fit.intercept = c[0];
    fit.rate = c[1];
    fit.nu = c[2];
    fit.residual = res / std::sqrt(static_cast<double>(m));
    fit.certified = fit.rate - kDecaySlack;
    fit.shells = m;
    fit.d_min = xs.front();
    fit.d_max = xs.back();
    // Local two-parameter slopes on the inner and outer thirds detect quadratic log-decay.
    auto slope = [&](int lo, int hi) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int cnt = hi - lo;
        for (int k = lo; k < hi; ++k) {
            sx += xs[k];
            sy += ys[k];
            sxx += xs[k] * xs[k];
            sxy += xs[k] * ys[k];
        }
        return -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    };
    const double inner = slope(0, m / 3), outer = slope(m - m / 3, m);
    fit.super_exponential = outer > 1.2 * inner && outer > 0.0;
    const double covered = (fit.d_max - fit.d_min) * std::max(fit.rate, inner);
    if (!fit.super_exponential && covered < 3.0)
        throw Error("InsufficientExtent", "decay_rate", "tail covers fewer than 3 decay lengths");
    return fit;
}

bool is_compact_on_grid(const FiberKernel& kappa, double rel_tol) {
    const Grid& gr = kappa.grid;
    const std::size_t nb = kappa.kind == KernelKind::Invariant ? 1 : kappa.bases.size();
    double peak = 0.0, ring = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& s = kappa.at_base(b);
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) {
                const double v = std::abs(s[gr.index(i, j)]);
                peak = std::max(peak, v);
                if (i == 0 || j == 0 || i == gr.n - 1 || j == gr.n - 1) ring = std::max(ring, v);
            }
    }
    return ring <= rel_tol * peak;
}

void write_snapshot(std::ostream& os, const FiberKernel& kappa) {
    os.write("BRKS", 4);
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, kappa.kind == KernelKind::Invariant ? 0u : 1u);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(kappa.grid.n));
    put<double>(os, kappa.grid.h);
    put<double>(os, kappa.grid.extent());
    put<double>(os, kappa.decay_class ? *kappa.decay_class : std::nan(""));
    put<double>(os, kappa.decay_constant);
    const std::size_t nb = kappa.kind == KernelKind::Invariant ? 1 : kappa.bases.size();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(kappa.kind == KernelKind::Invariant ? 0 : nb));
    for (std::size_t b = 0; b < nb && kappa.kind == KernelKind::Family; ++b) {
        put<std::uint32_t>(os, kappa.bases[b].chart == Chart::Undotted ? 0u : 1u);
        put<double>(os, kappa.bases[b].coord.real());
        put<double>(os, kappa.bases[b].coord.imag());
    }
    for (std::size_t b = 0; b < nb; ++b)
        for (const cplx& v : kappa.at_base(b)) {
            put<double>(os, v.real());
            put<double>(os, v.imag());
        }
}

FiberKernel read_snapshot(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "BRKS", 4) != 0) throw Error("SnapshotCorrupt", "read_snapshot", "bad magic");
    if (get<std::uint32_t>(is) != 1u) throw Error("SnapshotCorrupt", "read_snapshot", "unsupported version");
    FiberKernel k;
    k.kind = get<std::uint32_t>(is) == 0u ? KernelKind::Invariant : KernelKind::Family;
    k.grid.n = static_cast<int>(get<std::uint32_t>(is));
    k.grid.h = get<double>(is);
    (void)get<double>(is);
    const double dc = get<double>(is);
    if (!std::isnan(dc)) k.decay_class = dc;
    k.decay_constant = get<double>(is);
    const std::uint32_t nb = get<std::uint32_t>(is);
    for (std::uint32_t b = 0; b < nb; ++b) {
        ChartPoint p;
        p.chart = get<std::uint32_t>(is) == 0u ? Chart::Undotted : Chart::Dotted;
        const double re = get<double>(is), im = get<double>(is);
        p.coord = cplx(re, im);
        k.bases.push_back(p);
    }
    auto read_block = [&] {
        std::vector<cplx> s(k.grid.size());
        for (auto& v : s) {
            const double re = get<double>(is), im = get<double>(is);
            v = cplx(re, im);
        }
        return s;
    };
    if (k.kind == KernelKind::Invariant)
        k.samples = read_block();
    else
        for (std::uint32_t b = 0; b < nb; ++b) k.family.push_back(read_block());
    return k;
}

void write_csv(std::ostream& os, const FiberKernel& kappa) {
    const Grid& gr = kappa.grid;
    os << "base_chart,base_re,base_im,x,y,re,im\n";
    const std::size_t nb = kappa.kind == KernelKind::Invariant ? 1 : kappa.bases.size();
    char buf[256];
    for (std::size_t b = 0; b < nb; ++b) {
        const ChartPoint base = kappa.kind == KernelKind::Invariant ? ChartPoint{} : kappa.bases[b];
        const char* chart = kappa.kind == KernelKind::Invariant ? "invariant"
                            : base.chart == Chart::Undotted   ? "undotted"
                                                              : "dotted";
        const auto& s = kappa.at_base(b);
        for (int i = 0; i < gr.n; ++i)
            for (int j = 0; j < gr.n; ++j) {
                const cplx v = s[gr.index(i, j)];
                std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", chart, base.coord.real(),
                              base.coord.imag(), gr.coord(i), gr.coord(j), v.real(), v.imag());
                os << buf;
            }
    }
}

}  // namespace bruhatlab
