#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/kernel.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace bruhatlab {

// (4 pi t)^{-n/2} exp(-d^2 / 4t).
double gaussian_q(double d, double t, int n = 2);

struct CutoffSpec {
    double r0 = std::numeric_limits<double>::infinity();  // infinite radius means chi == 1
    double chi(double d) const;
    double dchi(double d) const;
    double d2chi(double d) const;
    bool trivial() const { return !std::isfinite(r0); }
};

// Delta + F + K with Delta the nonnegative flat Laplacian, F a constant and K an invariant kernel.
struct PerturbationSpec {
    double f = 0.0;
    std::optional<FiberKernel> k_kernel;
    int n = 2;
};

using ScalarField = std::function<double(cplx)>;

// Phi_0..Phi_{i_max} on the grid from the transport recursion on a flat fiber.
std::vector<std::vector<double>> phi_coefficients(const ScalarField& F, const Grid& g, int i_max);

// Nonnegative five- and nine-point Laplacian (fourth order in the interior).
std::vector<double> grid_laplacian(const std::vector<double>& u, const Grid& g);

// chi(|p|) q(|p|, t) sum_{i <= N} t^i Phi_i(p) with Phi_i = (-f)^i / i!.
FiberKernel parametrix_GN(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N, double t, const Grid& g);

// (d_t + Delta + F) G_N evaluated in closed form (K excluded).
FiberKernel parametrix_residual(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N, double t, const Grid& g);

// G_N o u with the Gaussian part applied as an exact Fourier multiplier (cutoff == 1).
std::vector<cplx> apply_parametrix(const PerturbationSpec& spec, int N, double t, const std::vector<cplx>& u,
                                   const Grid& g);

struct LeviOptions {
    double tol = 1e-12;       // relative truncation tolerance on sup ||Q^(k)||
    int k_max = 30;
    double fd_rel_step = 1e-3;  // time step of the residual check, relative to t
};

struct HeatSeriesState {
    int N = 0;
    std::vector<double> phi;  // Phi_i values (constant on flat fibers with constant F)
    std::vector<double> time_grid;
    int terms = 0;                                   // number of Levi corrections kept
    std::vector<std::vector<double>> residual_norms;  // [k-1][t] sup ||R^(k)(t)||
    std::vector<std::vector<double>> term_norms;      // [k-1][t] sup ||Q^(k)(t)||
    std::vector<double> heat_residual;                // sup |(d_t + P) Q| / sup |Q| per t
    std::vector<FiberKernel> kernels;                 // Q(t)
};

HeatSeriesState levi_series(const PerturbationSpec& spec, const CutoffSpec& cutoff, int N,
                            const std::vector<double>& t_grid, const Grid& g, const LeviOptions& opt = {});

struct DuhamelOptions {
    int i_max = 40;
    int cells = 32;      // coarsest uniform time grid; Romberg uses cells, 2 cells, 4 cells
    double tol = 1e-14;  // relative truncation of term norms
};

struct DuhamelResult {
    FiberKernel kernel;
    std::vector<double> term_norms;  // sup norm of t^i-order term
    double romberg_change = 0.0;     // sup difference between the last two Romberg levels
    int terms = 0;
};

DuhamelResult duhamel_series(const PerturbationSpec& spec, double t, const Grid& g, const DuhamelOptions& opt = {});

// exp(-t (Delta + f + K)) by a single Fourier multiplier; reference for tests.
FiberKernel heat_closed_form(const PerturbationSpec& spec, double t, const Grid& g);

struct FactorialEnvelope {
    double log_c = 0.0;
    double log_m = 0.0;
    double max_log_ratio = 0.0;  // max |log(observed / envelope)|
    int points = 0;
    bool within_factor_two = false;
};

// Fits log(norm_k * (k - shift)! / t^(k - shift)) = log C + k log M over k = 1..K.
FactorialEnvelope fit_factorial_envelope(const std::vector<double>& norms, double t, int shift, double floor_rel = 1e-12);

struct DecayCertificate {
    bool pass = false;
    double lambda = 0.0;
    double c = 0.0;           // sup of shell max * e^{lambda d}
    double outer_slope = 0.0;  // local log-decay rate on the outermost resolved window
    double d_peak = 0.0;
    int shells = 0;
};

DecayCertificate offdiag_decay_check(const FiberKernel& q, double lambda);

struct ShortTimeFit {
    std::vector<double> coeffs;  // Q_0, Q_1, ... for n = 2
    double residual = 0.0;       // rms residual of 4 pi t Q(t) on the ladder
};

ShortTimeFit short_time_fit(const std::vector<double>& t_ladder, const std::vector<double>& diag_values,
                            int degree = 4);

}  // namespace bruhatlab
