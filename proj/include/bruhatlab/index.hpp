#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/geometry.hpp"
#include "bruhatlab/renorm.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <utility>
#include <vector>

namespace bruhatlab {

using Mat2 = Eigen::Matrix2cd;

// Clifford generators on the spin module S = wedge(P), P spanned by e1 + i e2.
struct CliffordModuleSpec {
    std::array<Mat2, 2> gamma;
    Mat2 grading;

    static CliffordModuleSpec spin_module();
    // Max deviation from the Clifford relations, oddness and skew-adjointness.
    double defect() const;
    // Clifford contraction sum_{i<j} omega_ij gamma_i gamma_j of a 2 x 2 antisymmetric coefficient.
    Mat2 contract(const Eigen::Matrix2d& omega) const;
    cplx supertrace(const Mat2& m) const { return (grading * m).trace(); }
};

// Form of degree 0 and 2 on the two-dimensional base; deg2 is the dx ^ dy coefficient.
struct GradedForm {
    double deg0 = 0.0;
    double deg2 = 0.0;
};

// Monomial coefficient * prod Z_{i j} over the listed index pairs.
struct Monomial {
    std::vector<std::pair<int, int>> factors;
    double coeff = 0.0;
};

struct PowerSeries {
    std::vector<Monomial> terms;
};

// h(omega) truncated at form degree degree_cap (at most 2); omega holds the dx ^ dy coefficients.
GradedForm power_series_of_forms(const PowerSeries& h, const Eigen::MatrixXd& omega, int degree_cap);

// det^{1/2}((Z/2) / sinh(Z/2)) on rank 2 up to the given polynomial order in Z.
PowerSeries a_hat_series(int order = 4);

struct CurvatureForms {
    Eigen::Matrix2d R = Eigen::Matrix2d::Zero();  // algebroid curvature (zero on the flat leaf)
    std::function<Mat2(const ChartPoint&)> F_ES;   // density relative to |dz|^2 dx ^ dy
};

GradedForm a_hat(const CurvatureForms& forms);

// F_ES = total - gamma(R) at each sample; DecompositionFailure if it does not commute with gamma.
std::vector<Mat2> twisting_curvature(const std::vector<Mat2>& total, const Eigen::Matrix2d& R,
                                     const CliffordModuleSpec& clifford, double tol = 1e-10);

// (4 pi)^{-1} renormalized integral of the relative supertrace of -F_ES (rank-2 spin module).
double geometric_index_term(const std::function<Mat2(const ChartPoint&)>& F_ES, const RenormOptions& opt = {});

// Perturbed Dirac operator with square Delta + mass^2 + (c(x)/2) i gamma_1 gamma_2,
// c(x) = c0 (1 + |z|^2)^{-2}, evaluated in the frozen-coefficient model.
struct DiracSpec {
    double mass = 1.0;
    double c0 = 0.5;
    CliffordModuleSpec clifford = CliffordModuleSpec::spin_module();

    double curvature(const ChartPoint& p) const;
    // Traceless part (c/2) i gamma_1 gamma_2, kept apart from mass^2 to avoid cancellation.
    Mat2 clifford_potential(const ChartPoint& p) const;
    Mat2 potential(const ChartPoint& p) const;
};

struct EtaOptions {
    double t_min = 1e-2;          // start of the quadrature; the short-time fit covers [t_min / 100, t_min]
    double t_max = 20.0;          // plateau check compares t_max with 2 t_max
    int nodes_per_decade = 16;
    int short_ladder = 9;
    int fit_degree = 4;
    double plateau_drift = 1e-4;
    RenormOptions renorm = radial_renorm();

    // The model densities are rotation invariant, so a short angular rule is exact.
    static RenormOptions radial_renorm() {
        RenormOptions r;
        r.angular_nodes = 4;
        r.max_residual = 1e-6;
        return r;
    }
};

struct EtaResult {
    double eta = 0.0;
    double quadrature_error = 0.0;  // full rule minus half rule
    double short_tail = 0.0;
    double short_tail_error = 0.0;  // degree d versus d - 1 fit
    double long_tail = 0.0;
    double long_tail_error = 0.0;
    double short_time_limit = 0.0;  // renormalized supertrace as t -> 0+
    double plateau = 0.0;
    double derivative_check = 0.0;  // max |integrand - d/dt RStr| / max |integrand|
    int evaluations = 0;

    double error() const { return quadrature_error + short_tail_error + long_tail_error; }
};

// Renormalized supertrace of exp(-t D^2) and its t-derivative, the supertrace of -D^2 exp(-t D^2).
double heat_supertrace(const DiracSpec& spec, double t, const RenormOptions& opt = {});
double heat_supertrace_derivative(const DiracSpec& spec, double t, const RenormOptions& opt = {});

// Gaussian diagonal (4 pi t)^{-1} taken from the heat engine on a grid adapted to t.
double gaussian_diagonal(double t);

EtaResult eta_term(const DiracSpec& spec, const EtaOptions& opt = {});

struct IndexReport {
    double geometric = 0.0;
    double eta = 0.0;
    double total = 0.0;
    double plateau = 0.0;
    double error_bar = 0.0;
    double consistency_gap = 0.0;    // |total - plateau|
    double integer_gap = 0.0;        // |plateau - nearest integer|
    double short_time_gap = 0.0;     // |geometric - fitted t -> 0+ supertrace|
    bool consistent = false;
    EtaResult eta_detail;
};

IndexReport mckean_singer_index(const DiracSpec& spec, const EtaOptions& opt = {});

}  // namespace bruhatlab
