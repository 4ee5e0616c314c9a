#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/geometry.hpp"
#include "bruhatlab/kernel.hpp"

#include <array>
#include <optional>
#include <vector>

namespace bruhatlab {

struct StripSpec {
    double theta = 0.5;    // half-width of the strip |Im zeta| <= theta (Euclidean norm of Im zeta)
    double m = 2.0;        // order
    double c_upper = 0.0;  // optional required constants; 0 disables the check
    double c_lower = 0.0;
};

// Symbol c0 + c2 (zeta1^2 + zeta2^2) + hat(K)(zeta) of a singular-fiber operator
// c0 + c2 Delta + K with K an invariant smoothing kernel.
struct Symbol {
    double c0 = 0.0;
    double c2 = 0.0;
    std::optional<FiberKernel> smoothing;

    cplx operator()(cplx z1, cplx z2) const;
    double order() const { return c2 != 0.0 ? 2.0 : 0.0; }
    bool principal_positive() const { return c2 > 0.0; }
};

// sigma(zeta) = int kappa(p) exp(-i <p, zeta>) dp by trapezoidal quadrature.
cplx laplace_fourier(const FiberKernel& kappa, cplx z1, cplx z2);

// Samples of a symbol on a tensor grid of Re zeta in [-lambda, lambda]^2, one block per imaginary shift.
struct SymbolGrid {
    double lambda = 0.0;
    int nodes = 0;
    double order = 0.0;
    std::vector<std::array<double, 2>> shifts;
    std::vector<std::vector<cplx>> values;

    double node(int i) const { return nodes == 1 ? 0.0 : -lambda + 2.0 * lambda * i / (nodes - 1); }
};

// 5 x 5 imaginary levels clipped to the strip plus the four diagonal boundary points.
std::vector<std::array<double, 2>> strip_shifts(double theta);

SymbolGrid sample_symbol(const Symbol& sym, const StripSpec& strip, double lambda, int nodes = 33);

struct EllipticityVerdict {
    bool pass = false;
    bool upper_ok = false;
    bool lower_ok = false;
    bool stabilized = false;
    double c_upper = 0.0;  // sup of |sigma| / (1 + |zeta|)^m on the sampled strip
    double c_lower = 0.0;  // inf of the same ratio
    std::array<cplx, 2> witness{};  // zeta attaining the failing bound (or the infimum)
    double lambda = 0.0;            // box half-width at which the bounds stabilized
    int octaves = 0;
};

struct EllipticityOptions {
    double lambda0 = 4.0;
    int max_octaves = 9;
    int nodes = 33;
    double drift = 1e-3;
    double lower_floor = 1e-6;
};

// Checks both bounds on a single sampled grid.
EllipticityVerdict strip_ellipticity(const SymbolGrid& grid, const StripSpec& strip,
                                     const EllipticityOptions& opt = {});
// Doubles the box until both constants drift by less than opt.drift per octave.
EllipticityVerdict strip_ellipticity(const Symbol& sym, const StripSpec& strip, const EllipticityOptions& opt = {});

struct InverseDiagnostics {
    bool pole_proximity = false;
    int box_nodes = 0;
    double box_extent = 0.0;
    double reference_mu = 0.0;
};

// Kernel of 1/sigma by four quadrant contour shifts of magnitude eps.
FiberKernel inverse_kernel(const Symbol& sym, const StripSpec& strip, double eps, const Grid& out,
                           InverseDiagnostics* diag = nullptr);

struct FredholmVerdict {
    bool fredholm = false;
    bool principal_ok = false;
    EllipticityVerdict strip;
};

FredholmVerdict fredholm_verdict(bool principal_symbol_positive, const Symbol& singular_fiber_symbol,
                                 const StripSpec& strip, const EllipticityOptions& opt = {});

// Smooth radial bump: 1 for d <= r/2, 0 for d >= r, same profile as the heat cutoff.
double bump_profile(double d, double r);

struct CutoffBump {
    double radius = 0.5;               // in the dotted base coordinate around the singular point
    double trivialization_radius = 1.0;
};

// Splits a kernel into chi(|p|) kappa (compact) and the remainder.
std::pair<FiberKernel, FiberKernel> split_kernel(const FiberKernel& kappa, double radius);

// Singular-fiber complement S with hat(S) = 1/sigma - hat(Q) on the frequency grid of Q.
FiberKernel singular_complement(const Symbol& sym, const FiberKernel& q_uniform);

// Family Q_x + chi(x) S over the given bases; chi is the bump in the dotted coordinate.
FiberKernel assemble_parametrix(const FiberKernel& q_uniform, const FiberKernel& s_singular, const CutoffBump& cutoff,
                                const std::vector<ChartPoint>& bases);

struct ResidualNorms {
    double sup = 0.0;
    double one_norm = 0.0;
    double fourier_sup = 0.0;
};

// Residual sym o kappa - delta on the singular fiber, with sym applied as a Fourier multiplier.
ResidualNorms singular_residual(const Symbol& sym, const FiberKernel& kappa);

}  // namespace bruhatlab
