#include "bruhatlab/heat.hpp"

#include "bruhatlab/fft.hpp"

#include <algorithm>
#include <cmath>

namespace bruhatlab {

namespace {

using Egf = std::vector<std::vector<cplx>>;  // [degree][frequency], f(t) = e^{-t lambda} sum a_j t^j / j!

std::vector<double> frequency_lambda(const Grid& g) {
    std::vector<double> lam(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double a = grid_frequency(g, i), b = grid_frequency(g, j);
            lam[g.index(i, j)] = a * a + b * b;
        }
    return lam;
}

std::vector<cplx> kernel_hat(const PerturbationSpec& spec, const Grid& g) {
    if (!spec.k_kernel) return std::vector<cplx>(g.size(), 0.0);
    if (spec.k_kernel->grid != g) throw Error("GridMismatch", "heat_engine", "K must live on the heat grid");
    return grid_to_fourier(spec.k_kernel->samples, g);
}

// Volterra convolution int_0^t a(t - s) b(s) ds in exponential-generating coefficients.
Egf volterra(const Egf& a, const Egf& b) {
    const std::size_t len = a.front().size();
    Egf out(a.size() + b.size(), std::vector<cplx>(len, 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            auto& o = out[i + j + 1];
            const auto& x = a[i];
            const auto& y = b[j];
            for (std::size_t f = 0; f < len; ++f) o[f] += x[f] * y[f];
        }
    return out;
}

std::vector<cplx> egf_at(const Egf& a, double t, const std::vector<double>& lam) {
    std::vector<cplx> out(lam.size(), 0.0);
    double c = 1.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (j > 0) c *= t / static_cast<double>(j);
        for (std::size_t f = 0; f < lam.size(); ++f) out[f] += c * a[j][f];
    }
    for (std::size_t f = 0; f < lam.size(); ++f) out[f] *= std::exp(-t * lam[f]);
    return out;
}

double sup_norm(const std::vector<cplx>& v) {
    double s = 0.0;
    for (const cplx& x : v) s = std::max(s, std::abs(x));
    return s;
}

double sup_from_fourier(const std::vector<cplx>& hat, const Grid& g) { return sup_norm(fourier_to_grid(hat, g)); }

double partial_exp(double x, int N) {
    double s = 0.0, term = 1.0;
    for (int i = 0; i <= N; ++i) {
        if (i > 0) term *= x / i;
        s += term;
    }
    return s;
}

double factorial_log(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

double cubic_interp(const std::vector<double>& u, const Grid& g, double x, double y) {
    const double fx = x / g.h + g.half(), fy = y / g.h + g.half();
    const int ix = std::clamp(static_cast<int>(std::floor(fx)) - 1, 0, g.n - 4);
    const int iy = std::clamp(static_cast<int>(std::floor(fy)) - 1, 0, g.n - 4);
    auto weights = [](double s, double w[4]) {
        // Lagrange cubic on nodes 0, 1, 2, 3.
        w[0] = -(s - 1) * (s - 2) * (s - 3) / 6.0;
        w[1] = s * (s - 2) * (s - 3) / 2.0;
        w[2] = -s * (s - 1) * (s - 3) / 2.0;
        w[3] = s * (s - 1) * (s - 2) / 6.0;
    };
    double wx[4], wy[4];
    weights(fx - ix, wx);
    weights(fy - iy, wy);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) acc += wx[a] * wy[b] * u[g.index(ix + a, iy + b)];
    return acc;
}

}  // namespace

double gaussian_q(double d, double t, int n) {
    return std::pow(4.0 * kPi * t, -0.5 * n) * std::exp(-d * d / (4.0 * t));
}

double CutoffSpec::chi(double d) const {
    if (trivial() || d <= 0.5 * r0) return 1.0;
    if (d >= r0) return 0.0;
    const double u = (2.0 * d - r0) / r0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double CutoffSpec::dchi(double d) const {
    if (trivial() || d <= 0.5 * r0 || d >= r0) return 0.0;
    const double u = (2.0 * d - r0) / r0, v = 1.0 - u * u;
    return chi(d) * (-2.0 * u / (v * v)) * (2.0 / r0);
}

double CutoffSpec::d2chi(double d) const {
    if (trivial() || d <= 0.5 * r0 || d >= r0) return 0.0;
    const double u = (2.0 * d - r0) / r0, v = 1.0 - u * u;
    const double p1 = -2.0 * u / (v * v);
    const double p2 = -2.0 / (v * v) - 8.0 * u * u / (v * v * v);
    return chi(d) * (p1 * p1 + p2) * (4.0 / (r0 * r0));
}

std::vector<double> grid_laplacian(const std::vector<double>& u, const Grid& g) {
    const int n = g.n;
    const double h2 = g.h * g.h;
    auto second = [&](int i, int j, bool along_i) {
        auto at = [&](int k) { return along_i ? u[g.index(k, j)] : u[g.index(i, k)]; };
        const int c = along_i ? i : j;
        if (c >= 2 && c <= n - 3)
            return (-at(c - 2) + 16.0 * at(c - 1) - 30.0 * at(c) + 16.0 * at(c + 1) - at(c + 2)) / (12.0 * h2);
        if (c >= 1 && c <= n - 2) return (at(c - 1) - 2.0 * at(c) + at(c + 1)) / h2;
        if (c == 0) return (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2;
        return (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2;
    };
    std::vector<double> out(g.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[g.index(i, j)] = -(second(i, j, true) + second(i, j, false));
    return out;
}

std::vector<std::vector<double>> phi_coefficients(const ScalarField& F, const Grid& g, int i_max) {
    const GaussRule gl = gauss_legendre(24, 0.0, 1.0);
    std::vector<std::vector<double>> phi;
    phi.emplace_back(g.size(), 1.0);
    std::vector<double> fval(g.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) fval[g.index(i, j)] = F(cplx(g.coord(i), g.coord(j)));
    for (int k = 1; k <= i_max; ++k) {
        std::vector<double> next(g.size());
        if (k == 1) {
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j) {
                    double acc = 0.0;
                    for (std::size_t q = 0; q < gl.x.size(); ++q)
                        acc += gl.w[q] * F(gl.x[q] * cplx(g.coord(i), g.coord(j)));
                    next[g.index(i, j)] = -acc;
                }
        } else {
            std::vector<double> src = grid_laplacian(phi.back(), g);
            for (std::size_t q = 0; q < src.size(); ++q) src[q] += fval[q] * phi.back()[q];
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j) {
                    double acc = 0.0;
                    for (std::size_t q = 0; q < gl.x.size(); ++q) {
                        const double tau = gl.x[q];
                        acc += gl.w[q] * std::pow(tau, k - 1) * cubic_interp(src, g, tau * g.coord(i), tau * g.coord(j));
                    }
                    next[g.index(i, j)] = -acc;
                }
        }
        phi.push_back(std::move(next));
    }
    return phi;
}

FiberKernel parametrix_GN(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N, double t, const Grid& g) {
    const double s = partial_exp(-spec.f * t, N);
    return FiberKernel::invariant(g, [&](double x, double y) {
        const double d = std::hypot(x, y);
        return cplx(cutoff.chi(d) * gaussian_q(d, t, spec.n) * s, 0.0);
    });
}

FiberKernel parametrix_residual(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N, double t, const Grid& g) {
    const double s = partial_exp(-spec.f * t, N);
    const double top = spec.f * std::pow(-spec.f, N) * std::exp(N * std::log(t) - factorial_log(N));
    return FiberKernel::invariant(g, [&](double x, double y) {
        const double d = std::hypot(x, y);
        const double q = gaussian_q(d, t, spec.n);
        double v = cutoff.chi(d) * q * (N == 0 ? spec.f : top);
        if (d > 0.0) v += s * q * (d * cutoff.dchi(d) / t - cutoff.d2chi(d) - cutoff.dchi(d) / d);
        return cplx(v, 0.0);
    });
}

std::vector<cplx> apply_parametrix(const PerturbationSpec& spec, int N, double t, const std::vector<cplx>& u,
                                   const Grid& g) {
    const std::vector<double> lam = frequency_lambda(g);
    std::vector<cplx> hat = grid_to_fourier(u, g);
    const double s = partial_exp(-spec.f * t, N);
    for (std::size_t f = 0; f < hat.size(); ++f) hat[f] *= std::exp(-t * lam[f]) * s;
    return fourier_to_grid(hat, g);
}

HeatSeriesState levi_series(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N,
                            const std::vector<double>& t_grid, const Grid& g, const LeviOptions& opt) {
    if (N <= spec.n / 2 + 1) throw Error("OrderTooLow", "levi_series", "need N > n/2 + 1");
    if (!cutoff.trivial())
        throw Error("Unsupported", "levi_series", "finite cutoff radius requires the Laplace-domain path");
    const std::vector<double> lam = frequency_lambda(g);
    const std::vector<cplx> kh = kernel_hat(spec, g);
    const std::size_t nf = g.size();

    HeatSeriesState st;
    st.N = N;
    st.time_grid = t_grid;
    for (int i = 0; i <= N; ++i) st.phi.push_back(std::pow(-spec.f, i) / std::exp(factorial_log(i)));

    Egf gn(N + 1, std::vector<cplx>(nf));
    Egf r(N + 1, std::vector<cplx>(nf));
    for (int i = 0; i <= N; ++i) {
        const double c = std::pow(-spec.f, i);
        for (std::size_t f = 0; f < nf; ++f) {
            gn[i][f] = c;
            r[i][f] = c * kh[f] + (i == N ? c * spec.f : 0.0);
        }
    }
    // Sup norms of the Gaussian parts are taken from direct samples.
    std::vector<double> q_sup(t_grid.size());
    std::vector<FiberKernel> gsamp;
    for (std::size_t a = 0; a < t_grid.size(); ++a) {
        gsamp.push_back(parametrix_GN(spec, cutoff, N, t_grid[a], g));
        q_sup[a] = sup_norm(gsamp.back().samples);
    }

    Egf qacc;  // sum_k (-1)^k G o R^(k)
    Egf rk = r;
    bool zero_r = true;
    for (const auto& row : r)
        for (const cplx& v : row) zero_r = zero_r && v == cplx(0.0, 0.0);

    int k = 1;
    double prev = std::numeric_limits<double>::infinity();
    while (!zero_r) {
        if (k > opt.k_max)
            throw Error("NonConvergence", "levi_series", "term norms did not fall below tolerance within k_max");
        Egf qk = volterra(gn, rk);
        std::vector<double> rn(t_grid.size()), qn(t_grid.size());
        double worst = 0.0;
        for (std::size_t a = 0; a < t_grid.size(); ++a) {
            rn[a] = sup_from_fourier(egf_at(rk, t_grid[a], lam), g);
            qn[a] = sup_from_fourier(egf_at(qk, t_grid[a], lam), g);
            worst = std::max(worst, qn[a] / q_sup[a]);
        }
        st.residual_norms.push_back(rn);
        st.term_norms.push_back(qn);
        if (qacc.size() < qk.size()) qacc.resize(qk.size(), std::vector<cplx>(nf, 0.0));
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t j = 0; j < qk.size(); ++j)
            for (std::size_t f = 0; f < nf; ++f) qacc[j][f] += sign * qk[j][f];
        st.terms = k;
        if (worst < opt.tol) break;
        if (k > 4 && worst > prev) throw Error("NonConvergence", "levi_series", "term norms stopped decreasing");
        prev = worst;
        rk = volterra(r, rk);
        ++k;
    }

    for (std::size_t a = 0; a < t_grid.size(); ++a) {
        const double t = t_grid[a];
        FiberKernel q = gsamp[a];
        if (!qacc.empty()) {
            const std::vector<cplx> corr = fourier_to_grid(egf_at(qacc, t, lam), g);
            for (std::size_t f = 0; f < nf; ++f) q.samples[f] += corr[f];
        }
        st.kernels.push_back(std::move(q));

        // Heat-equation residual with a Richardson-extrapolated central difference in t.
        auto full_hat = [&](double tt) {
            std::vector<cplx> v = qacc.empty() ? std::vector<cplx>(nf, 0.0) : egf_at(qacc, tt, lam);
            const double s = partial_exp(-spec.f * tt, N);
            for (std::size_t f = 0; f < nf; ++f) v[f] += std::exp(-tt * lam[f]) * s;
            return v;
        };
        const double dt = opt.fd_rel_step * t;
        const auto p1 = full_hat(t + dt), m1 = full_hat(t - dt);
        const auto p2 = full_hat(t + 0.5 * dt), m2 = full_hat(t - 0.5 * dt);
        const auto q0 = full_hat(t);
        std::vector<cplx> res(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            const cplx d1 = (p1[f] - m1[f]) / (2.0 * dt), d2 = (p2[f] - m2[f]) / dt;
            const cplx dtq = (4.0 * d2 - d1) / 3.0;
            res[f] = dtq + (lam[f] + spec.f + kh[f]) * q0[f];
        }
        st.heat_residual.push_back(sup_from_fourier(res, g) / sup_norm(st.kernels.back().samples));
    }
    return st;
}

DuhamelResult duhamel_series(const PerturbationSpec& spec, double t, const Grid& g, const DuhamelOptions& opt) {
    const std::vector<double> lam = frequency_lambda(g);
    const std::vector<cplx> kh = kernel_hat(spec, g);
    const std::size_t nf = g.size();
    const int imax = opt.i_max;

    // terms[level][i][f]: i-th nested simplex integral at time t on a grid of cells * 2^level cells.
    std::vector<std::vector<std::vector<cplx>>> terms(3, std::vector<std::vector<cplx>>(imax + 1, std::vector<cplx>(nf, 0.0)));
    for (int level = 0; level < 3; ++level) {
        const int m = opt.cells << level;
        const double dt = t / m;
        parallel_for(nf, [&](std::size_t lo, std::size_t hi) {
            std::vector<cplx> pw(m + 1), prev(m + 1), cur(m + 1);
            for (std::size_t f = lo; f < hi; ++f) {
                const double a = lam[f] + spec.f;
                const cplx w = std::exp(-dt * a);
                pw[0] = 1.0;
                for (int j = 1; j <= m; ++j) pw[j] = pw[j - 1] * w;
                for (int j = 0; j <= m; ++j) prev[j] = pw[j];
                terms[level][0][f] = prev[m];
                const double scale0 = std::abs(prev[m]) + 1e-300;
                for (int i = 1; i <= imax; ++i) {
                    for (int j = 0; j <= m; ++j) {
                        cplx acc = 0.0;
                        if (j > 0) {
                            acc += 0.5 * pw[j] * prev[0];
                            for (int l = 1; l < j; ++l) acc += pw[j - l] * prev[l];
                            acc += 0.5 * prev[j];
                        }
                        cur[j] = dt * kh[f] * acc;
                    }
                    std::swap(prev, cur);
                    terms[level][i][f] = prev[m];
                    if (std::abs(prev[m]) < 1e-20 * scale0 && std::abs(kh[f]) * t / i < 0.5) break;
                }
            }
        });
    }

    DuhamelResult out;
    std::vector<cplx> total(nf, 0.0), coarse(nf, 0.0);
    double first = 0.0;
    for (int i = 0; i <= imax; ++i) {
        std::vector<cplx> r1(nf), r2(nf), fine(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            const cplx a = terms[0][i][f], b = terms[1][i][f], c = terms[2][i][f];
            r1[f] = (4.0 * b - a) / 3.0;
            r2[f] = (4.0 * c - b) / 3.0;
            fine[f] = (16.0 * r2[f] - r1[f]) / 15.0;
        }
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        const double nrm = sup_from_fourier(fine, g);
        out.term_norms.push_back(nrm);
        for (std::size_t f = 0; f < nf; ++f) {
            total[f] += sign * fine[f];
            coarse[f] += sign * r2[f];
        }
        out.terms = i;
        if (i == 0) first = nrm;
        if (i > 0 && nrm < opt.tol * first) break;
        if (i == imax) throw Error("NonConvergence", "duhamel_series", "terms did not decay within i_max");
    }
    std::vector<cplx> diff(nf);
    for (std::size_t f = 0; f < nf; ++f) diff[f] = total[f] - coarse[f];
    out.romberg_change = sup_from_fourier(diff, g);
    out.kernel.grid = g;
    out.kernel.samples = fourier_to_grid(total, g);
    return out;
}

FiberKernel heat_closed_form(const PerturbationSpec& spec, double t, const Grid& g) {
    const std::vector<double> lam = frequency_lambda(g);
    const std::vector<cplx> kh = kernel_hat(spec, g);
    std::vector<cplx> hat(g.size());
    for (std::size_t f = 0; f < hat.size(); ++f) hat[f] = std::exp(-t * (lam[f] + spec.f + kh[f]));
    FiberKernel k;
    k.grid = g;
    k.samples = fourier_to_grid(hat, g);
    return k;
}

FactorialEnvelope fit_factorial_envelope(const std::vector<double>& norms, double t, int shift, double floor_rel) {
    FactorialEnvelope env;
    if (norms.empty()) return env;
    const double top = *std::max_element(norms.begin(), norms.end());
    std::vector<double> a, y;
    for (std::size_t i = 0; i < norms.size(); ++i) {
        const int k = static_cast<int>(i) + 1;
        if (!(norms[i] > floor_rel * top)) break;
        const int e = k - shift;
        a.push_back(1.0);
        a.push_back(static_cast<double>(k));
        y.push_back(std::log(norms[i]) + factorial_log(e) - e * std::log(t));
    }
    env.points = static_cast<int>(y.size());
    if (env.points < 2) {
        env.within_factor_two = env.points == 1;
        if (env.points == 1) env.log_c = y[0] - 1.0;
        return env;
    }
    const auto c = least_squares(a, env.points, 2, y);
    env.log_c = c[0];
    env.log_m = c[1];
    for (int i = 0; i < env.points; ++i)
        env.max_log_ratio = std::max(env.max_log_ratio, std::abs(y[i] - c[0] - c[1] * (i + 1)));
    env.within_factor_two = env.max_log_ratio <= std::log(2.0);
    return env;
}

DecayCertificate offdiag_decay_check(const FiberKernel& q, double lambda) {
    const Grid& g = q.grid;
    if (!(lambda > 0.0) || g.extent() < 6.0 / lambda)
        throw Error("InsufficientExtent", "offdiag_decay_check", "grid extent below 6 / lambda");
    if (lambda * g.h > 2.0)
        throw Error("InsufficientExtent", "offdiag_decay_check", "decay length 1 / lambda below half the grid spacing");
    const ShellProfile prof = shell_maxima(q);
    double peak = 0.0;
    for (double v : prof.max_abs) peak = std::max(peak, v);
    std::vector<double> d, lm;
    for (std::size_t k = 0; k < prof.d.size(); ++k) {
        if (!(prof.max_abs[k] > 1e-14 * peak)) break;
        d.push_back(prof.d[k]);
        lm.push_back(std::log(prof.max_abs[k]));
    }
    DecayCertificate c;
    c.lambda = lambda;
    c.shells = static_cast<int>(d.size());
    if (c.shells < 8) throw Error("InsufficientExtent", "offdiag_decay_check", "fewer than 8 resolved shells");
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        const double v = lm[k] + lambda * d[k];
        if (v > best) {
            best = v;
            arg = k;
        }
    }
    c.c = std::exp(best);
    c.d_peak = d[arg];
    // Local decay beyond the envelope peak must be at least lambda.
    const std::size_t lo = arg, hi = d.size();
    if (hi - lo >= 3) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double cnt = static_cast<double>(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) {
            sx += d[k];
            sy += lm[k];
            sxx += d[k] * d[k];
            sxy += d[k] * lm[k];
        }
        c.outer_slope = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    }
    c.pass = hi - lo >= 3 && c.d_peak < d.back() - g.h && c.outer_slope >= lambda;
    return c;
}

ShortTimeFit short_time_fit(const std::vector<double>& t_ladder, const std::vector<double>& diag_values, int degree) {
    if (t_ladder.size() != diag_values.size() || t_ladder.size() < static_cast<std::size_t>(degree + 2))
        throw Error("IllConditioned", "short_time_fit", "too few ladder points for the requested degree");
    const auto [mn, mx] = std::minmax_element(t_ladder.begin(), t_ladder.end());
    if (*mx > 0.1 * (1.0 + 1e-12) || *mx / *mn < 100.0 * (1.0 - 1e-12))
        throw Error("IllConditioned", "short_time_fit", "ladder must span two decades below 0.1");
    const int rows = static_cast<int>(t_ladder.size()), cols = degree + 1;
    std::vector<double> a(static_cast<std::size_t>(rows) * cols), y(rows);
    for (int r = 0; r < rows; ++r) {
        const double t = t_ladder[r];
        double p = 1.0;
        for (int c = 0; c < cols; ++c, p *= t) a[static_cast<std::size_t>(r) * cols + c] = p;
        y[r] = 4.0 * kPi * t * diag_values[r];
    }
    ShortTimeFit fit;
    double res = 0.0;
    fit.coeffs = least_squares(a, rows, cols, y, &res);
    fit.residual = res / std::sqrt(static_cast<double>(rows));
    return fit;
}

}  // namespace bruhatlab
