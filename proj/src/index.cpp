#include "bruhatlab/index.hpp"

#include "bruhatlab/heat.hpp"
#include "bruhatlab/symbol.hpp"

#include <algorithm>
#include <cmath>

namespace bruhatlab {

namespace {

const cplx kI{0.0, 1.0};

double max_abs(const Mat2& m) { return m.cwiseAbs().maxCoeff(); }

// Supertraces of exp(-t (a + B)) and B exp(-t (a + B)) for real a and traceless Hermitian B,
// B^2 = beta^2. Uses exp(-tB) = cosh(t beta) - sinh(t beta)/beta B and takes each supertrace
// separately, since forming the matrix first rounds away the small traceless part.
struct SplitSupertrace {
    double exp_part;
    double b_exp_part;
};

SplitSupertrace split_supertrace(double a, const Mat2& b, double t, const CliffordModuleSpec& cl) {
    const double beta2 = std::max(0.0, std::real((b * b).trace()) * 0.5);
    const double x = t * std::sqrt(beta2);
    const double sinhc = x < 1e-4 ? t * (1.0 + x * x / 6.0) : std::sinh(x) / std::sqrt(beta2);
    const double str_id = std::real(cl.grading.trace());
    const double str_b = std::real(cl.supertrace(b));
    const double scale = std::exp(-t * a);
    return {scale * (std::cosh(x) * str_id - sinhc * str_b), scale * (std::cosh(x) * str_b - sinhc * beta2 * str_id)};
}

// Round density (1 + |z|^2)^{-2} at a chart point.
double round_factor(const ChartPoint& p) {
    const double r2 = std::norm(p.coord);
    if (p.chart == Chart::Undotted) return 1.0 / ((1.0 + r2) * (1.0 + r2));
    return r2 * r2 / ((1.0 + r2) * (1.0 + r2));
}

}  // namespace

CliffordModuleSpec CliffordModuleSpec::spin_module() {
    CliffordModuleSpec c;
    // Basis (1, e1 + i e2) of wedge(P); gamma(v) = v ^ . - v _| . in this basis.
    c.gamma[0] << 0.0, -1.0, 1.0, 0.0;
    c.gamma[1] << 0.0, kI, kI, 0.0;
    c.grading << 1.0, 0.0, 0.0, -1.0;
    return c;
}

double CliffordModuleSpec::defect() const {
    double d = 0.0;
    const Mat2 id = Mat2::Identity();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Mat2 anti = gamma[i] * gamma[j] + gamma[j] * gamma[i] + 2.0 * (i == j ? 1.0 : 0.0) * id;
            d = std::max(d, max_abs(anti));
        }
        d = std::max(d, max_abs(gamma[i] * grading + grading * gamma[i]));
        d = std::max(d, max_abs(gamma[i] + gamma[i].adjoint()));
    }
    d = std::max(d, max_abs(grading * grading - id));
    return d;
}

Mat2 CliffordModuleSpec::contract(const Eigen::Matrix2d& omega) const {
    return omega(0, 1) * gamma[0] * gamma[1];
}

GradedForm power_series_of_forms(const PowerSeries& h, const Eigen::MatrixXd& omega, int degree_cap) {
    if (degree_cap < 0 || degree_cap > 2)
        throw Error("InvalidDegree", "power_series_of_forms", "degree_cap must lie in [0, 2] on a two-dimensional base");
    GradedForm out;
    for (const auto& m : h.terms) {
        const std::size_t d = m.factors.size();
        if (d == 0) {
            out.deg0 += m.coeff;
        } else if (d == 1 && degree_cap >= 2) {
            const auto [i, j] = m.factors[0];
            out.deg2 += m.coeff * omega(i, j);
        }
        // Two or more 2-form factors wedge to zero.
    }
    return out;
}

PowerSeries a_hat_series(int order) {
    // Eigenvalues of [[0, z], [-z, 0]] are +-iz, so the series is (z/2) / sin(z/2) in z = Z_01.
    // (x/2)/sin(x/2) = sum_k (2^{2k} - 2) |B_{2k}| x^{2k} / (2^{2k} (2k)!).
    static const double bern[] = {1.0, 1.0 / 6.0, 1.0 / 30.0, 1.0 / 42.0, 1.0 / 30.0, 5.0 / 66.0};
    PowerSeries s;
    double fact = 1.0;
    for (int k = 0; 2 * k <= order && k < 6; ++k) {
        if (k > 0) fact *= (2.0 * k - 1.0) * (2.0 * k);
        const double p = std::pow(2.0, 2 * k);
        const double c = k == 0 ? 1.0 : (p - 2.0) * bern[k] / (p * fact);
        Monomial m;
        m.coeff = c;
        m.factors.assign(2 * k, {0, 1});
        s.terms.push_back(m);
    }
    return s;
}

GradedForm a_hat(const CurvatureForms& forms) { return power_series_of_forms(a_hat_series(), forms.R, 2); }

std::vector<Mat2> twisting_curvature(const std::vector<Mat2>& total, const Eigen::Matrix2d& R,
                                     const CliffordModuleSpec& clifford, double tol) {
    const Mat2 gr = clifford.contract(R);
    std::vector<Mat2> out;
    out.reserve(total.size());
    for (const auto& t : total) {
        const Mat2 f = t - gr;
        const double scale = std::max(1.0, max_abs(f));
        for (const auto& g : clifford.gamma)
            if (max_abs(f * g - g * f) > tol * scale)
                throw Error("DecompositionFailure", "twisting_curvature", "residual does not commute with the Clifford action");
        out.push_back(f);
    }
    return out;
}

double geometric_index_term(const std::function<Mat2(const ChartPoint&)>& F_ES, const RenormOptions& opt) {
    // The spin module has rank 2, so the relative supertrace of an element of End_Cl(S) is tr / 2.
    LeafDensity density = [&F_ES](const ChartPoint& p) { return -0.5 * std::real(F_ES(p).trace()); };
    return renormalized_integral_value(density, opt) / (4.0 * kPi);
}

double DiracSpec::curvature(const ChartPoint& p) const { return c0 * round_factor(p); }

Mat2 DiracSpec::clifford_potential(const ChartPoint& p) const {
    return 0.5 * curvature(p) * kI * clifford.gamma[0] * clifford.gamma[1];
}

Mat2 DiracSpec::potential(const ChartPoint& p) const {
    return mass * mass * Mat2::Identity() + clifford_potential(p);
}

double gaussian_diagonal(double t) {
    if (!(t > 0.0)) throw Error("InvalidTime", "gaussian_diagonal", "t must be positive");
    // Periodic images sit e^{-64} below the peak; the frequency cutoff leaves e^{-100}.
    const double e = 8.0 * std::sqrt(t);
    const double h = 0.3 * std::sqrt(t);
    const Grid g = Grid::from_extent(e, h);
    PerturbationSpec spec;
    const FiberKernel k = heat_closed_form(spec, t, g);
    return std::real(k.samples[g.center()]);
}

double heat_supertrace(const DiracSpec& spec, double t, const RenormOptions& opt) {
    const double q0 = gaussian_diagonal(t);
    LeafDensity d = [&spec, t, q0](const ChartPoint& p) {
        return q0 * split_supertrace(spec.mass * spec.mass, spec.clifford_potential(p), t, spec.clifford).exp_part;
    };
    return renormalized_integral_value(d, opt);
}

double heat_supertrace_derivative(const DiracSpec& spec, double t, const RenormOptions& opt) {
    // D^2 e^{-t D^2} on the diagonal: (q0 / t) e^{-tV} + q0 V e^{-tV}, since q0' = -q0 / t.
    const double q0 = gaussian_diagonal(t);
    LeafDensity d = [&spec, t, q0](const ChartPoint& p) {
        const double a = spec.mass * spec.mass;
        const SplitSupertrace st = split_supertrace(a, spec.clifford_potential(p), t, spec.clifford);
        return -((q0 / t + q0 * a) * st.exp_part + q0 * st.b_exp_part);
    };
    return renormalized_integral_value(d, opt);
}

EtaResult eta_term(const DiracSpec& spec, const EtaOptions& opt) {
    if (!(opt.t_min > 0.0) || !(opt.t_max > opt.t_min))
        throw Error("InvalidTime", "eta_term", "need 0 < t_min < t_max");
    EtaResult r;
    auto integrand = [&](double t) {
        ++r.evaluations;
        return heat_supertrace_derivative(spec, t, opt.renorm);
    };

    // Gauss-Legendre on decades of log t; the half rule gives the error estimate.
    const double u0 = std::log(opt.t_min), u1 = std::log(opt.t_max);
    const int panels = std::max(1, static_cast<int>(std::ceil((u1 - u0) / std::log(10.0))));
    const GaussRule full = gauss_legendre(opt.nodes_per_decade, 0.0, 1.0);
    const GaussRule half = gauss_legendre(std::max(2, opt.nodes_per_decade / 2), 0.0, 1.0);
    KahanSum sf, sh;
    double peak = 0.0, dmax = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = u0 + (u1 - u0) * p / panels, b = u0 + (u1 - u0) * (p + 1) / panels;
        for (std::size_t i = 0; i < full.x.size(); ++i) {
            const double u = a + (b - a) * full.x[i];
            const double t = std::exp(u);
            const double v = integrand(t);
            sf.add((b - a) * full.w[i] * v * t);
            peak = std::max(peak, std::abs(v));
            if (i % 4 == 0) {
                // Central difference of the supertrace itself, the independent path.
                const double dt = 1e-3 * t;
                const double num = (heat_supertrace(spec, t + dt, opt.renorm) - heat_supertrace(spec, t - dt, opt.renorm)) /
                                   (2.0 * dt);
                dmax = std::max(dmax, std::abs(num - v));
            }
        }
        for (std::size_t i = 0; i < half.x.size(); ++i) {
            const double u = a + (b - a) * half.x[i];
            const double t = std::exp(u);
            sh.add((b - a) * half.w[i] * integrand(t) * t);
        }
    }
    const double body = sf.value();
    r.quadrature_error = std::abs(sf.value() - sh.value());
    r.derivative_check = peak > 0.0 ? dmax / peak : 0.0;

    // Short-time tail from the fitted expansion 4 pi t S(t) = sum c_j t^j.
    const std::vector<double> ladder = geometric_ladder(opt.t_min / 100.0, opt.t_min, opt.short_ladder);
    std::vector<double> s_vals;
    for (double t : ladder) s_vals.push_back(heat_supertrace(spec, t, opt.renorm));
    auto tail_from = [&](int degree, double* limit) {
        const ShortTimeFit fit = short_time_fit(ladder, s_vals, degree);
        double tail = 0.0;
        for (int j = 2; j <= degree; ++j) tail += fit.coeffs[j] * std::pow(opt.t_min, j - 1) / (4.0 * kPi);
        if (limit) *limit = fit.coeffs[1] / (4.0 * kPi);
        return tail;
    };
    r.short_tail = tail_from(opt.fit_degree, &r.short_time_limit);
    r.short_tail_error = std::abs(r.short_tail - tail_from(opt.fit_degree - 1, nullptr));

    // Long-time tail: plateau minus the supertrace at t_max.
    const double s1 = heat_supertrace(spec, opt.t_max, opt.renorm);
    const double s2 = heat_supertrace(spec, 2.0 * opt.t_max, opt.renorm);
    if (std::abs(s2 - s1) > opt.plateau_drift * std::max(1.0, std::abs(s2)))
        throw Error("PlateauNotReached", "eta_term", "supertrace drifts by " + std::to_string(std::abs(s2 - s1)));
    r.plateau = s2;
    r.long_tail = s2 - s1;
    r.long_tail_error = std::abs(s2 - s1);

    r.eta = r.short_tail + body + r.long_tail;
    return r;
}

IndexReport mckean_singer_index(const DiracSpec& spec, const EtaOptions& opt) {
    const double theta = std::min(0.5, 0.5 * spec.mass);
    const FredholmVerdict fv = fredholm_verdict(true, Symbol{spec.mass * spec.mass, 1.0, std::nullopt}, StripSpec{theta});
    if (!fv.fredholm) throw Error("NotFredholm", "mckean_singer_index", "singular-fiber symbol fails strip ellipticity");

    // Twisting curvature: the curvature term of D^2 is (c/2) i gamma_1 gamma_2 = gamma(F) with F = c, R = 0.
    std::function<Mat2(const ChartPoint&)> F_ES = [&spec](const ChartPoint& p) {
        const Mat2 total = spec.curvature(p) * Mat2::Identity();
        return twisting_curvature({total}, Eigen::Matrix2d::Zero(), spec.clifford).front();
    };
    IndexReport rep;
    rep.geometric = geometric_index_term(F_ES, opt.renorm);
    rep.eta_detail = eta_term(spec, opt);
    rep.eta = rep.eta_detail.eta;
    rep.total = rep.geometric + rep.eta;
    rep.plateau = rep.eta_detail.plateau;
    rep.error_bar = rep.eta_detail.error();
    rep.short_time_gap = std::abs(rep.geometric - rep.eta_detail.short_time_limit);
    rep.consistency_gap = std::abs(rep.total - rep.plateau);
    rep.integer_gap = std::abs(rep.plateau - std::round(rep.plateau));
    rep.consistent = rep.consistency_gap <= rep.error_bar + 1e-12;
    return rep;
}

}  // namespace bruhatlab
