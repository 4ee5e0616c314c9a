#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/geometry.hpp"
#include "bruhatlab/kernel.hpp"

#include <functional>
#include <vector>

namespace bruhatlab {

using RadialFunction = std::function<double(double)>;
// dF(m, x) = m-th derivative of F at x.
using DerivativeFn = std::function<double(int, double)>;

struct RenormalizedValue {
    std::vector<double> power_coeffs;  // C_1 .. C_{k-1}
    double log_coeff = 0.0;            // R
    double finite_part = 0.0;          // C_0
    double fit_residual = 0.0;         // rms residual relative to max |I(r0)|
    std::vector<double> ladder;
    std::vector<double> values;  // I(r0) on the ladder
    int tail_terms = 0;          // number of r0^{-m} columns in the fit
};

std::vector<double> default_ladder();
// Geometric ladder of `rungs` values from lo to hi.
std::vector<double> geometric_ladder(double lo, double hi, int rungs);

// int_{1/r0}^inf F(l) l^{-k} dl.
double cutoff_integral(const RadialFunction& F, int k, double r0);

// Fits sum C_j r0^j + R log r0 + C_0 + sum D_m r0^{-m} to the cutoff integrals on the ladder.
RenormalizedValue cutoff_expand(const RadialFunction& F, int k, const std::vector<double>& ladder,
                                double max_residual = 1e-9);
// Same fit applied to precomputed values I(r0).
RenormalizedValue fit_cutoff_values(const std::vector<double>& ladder, const std::vector<double>& values, int k,
                                    double max_residual = 1e-9);

// C_0 = ((k-1)!)^{-1} (H_{k-1} F^{(k-1)}(0) - int_0^inf F^{(k)}(l) log l dl), H the harmonic number.
double renorm_constant_formula(const DerivativeFn& dF, int k);
// Variant without the 1/(k-1)! on the harmonic term and with the log moment added; kept to show the mismatch.
double renorm_constant_formula_uncorrected(const DerivativeFn& dF, int k);

// Central finite-difference derivatives of F with the given step (fourth-order stencils).
DerivativeFn finite_difference_derivatives(const RadialFunction& F, double step);

// Density relative to leaf Lebesgue measure |dz|^2; evaluated at dotted chart points.
using LeafDensity = std::function<double(const ChartPoint&)>;

struct RenormOptions {
    std::vector<double> ladder = geometric_ladder(8.0, 1024.0, 15);
    int angular_nodes = 128;
    double max_residual = 1e-9;
};

// Angular average in the dotted chart followed by cutoff_expand with k = 3.
RenormalizedValue renormalized_integral(const LeafDensity& rho, const RenormOptions& opt = {});
double renormalized_integral_value(const LeafDensity& rho, const RenormOptions& opt = {});
// Density of f mu_0 relative to |dz|^2.
LeafDensity round_density(const std::function<double(const ChartPoint&)>& f);

// Renormalized supertrace of a graded family given by its diagonal blocks on units.
// blocks[b] must carry an evaluator; grading[b] is +1 or -1.
double renormalized_supertrace(const std::vector<FiberKernel>& blocks, const std::vector<int>& grading,
                               const RenormOptions& opt = {});
// Same from a supertrace density str(kappa|_M) given directly.
double renormalized_supertrace(const LeafDensity& str_density, const RenormOptions& opt = {});

struct DefectOptions {
    std::vector<double> ladder = default_ladder();
    int radial_nodes = 8;       // Gauss-Legendre nodes per radial panel
    int panels_per_octave = 4;
    int angular_nodes = 64;
    int w_nodes = 48;           // per axis on the w box
    double w_extent = 6.0;      // cap on the half-width of the w box
    double rho_min = 0.05;
    double fd_step = 1e-4;
    int rhs_nodes = 64;
    double max_residual = 1e-6;
    // Divergence order of the z-disk fit; 1 keeps only the log column, 3 adds r0 and r0^2.
    int fit_order = 1;
};

struct DefectLhs {
    RenormalizedValue fit;
    double finite_part = 0.0;
};

// Finite part of int_{|z| < r0} (f o g - g o f) |dz|^2 over the ladder.
DefectLhs trace_defect_lhs(const SectionOnG& f, const SectionOnG& g, const DefectOptions& opt = {});

// -pi int (Re w d/dxdot + Im w d/dydot)(f(xdot(zdot, conj w)) g(xdot(zdot, -conj w)))|_{zdot = 0} |dw|^2,
// with the transverse derivative taken by central differences.
double trace_defect_rhs(const SectionOnG& f, const SectionOnG& g, const DefectOptions& opt = {});

// f(a) = exp(-|zdot - a|^2 / s^2 - |wdot - b|^2 / sigma^2) in the dotted chart.
struct DottedGaussian {
    cplx a{0.0, 0.0};
    double s = 0.5;
    cplx b{0.0, 0.0};
    double sigma = 0.5;
    cplx amplitude{1.0, 0.0};
};
SectionOnG dotted_gaussian(const DottedGaussian& spec);

// Compactly supported bump exp(1 - 1/(1 - q)) with q the squared scaled dotted distance.
SectionOnG dotted_bump(const DottedGaussian& spec);

}  // namespace bruhatlab
