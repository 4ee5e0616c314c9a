#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/geometry.hpp"
#include "bruhatlab/groupoid.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bruhatlab {

enum class KernelKind { Invariant, Family };

// Reduced kernel sampled on a fiber grid of offsets (target-z on regular fibers, -w on the
// singular fiber). A family is sampled per base point and may carry an evaluator for
// base points off the table, which twisted compositions need.
struct FiberKernel {
    using Evaluator = std::function<cplx(const ChartPoint& base, cplx offset)>;

    KernelKind kind = KernelKind::Invariant;
    Grid grid;
    std::vector<cplx> samples;
    std::vector<ChartPoint> bases;
    std::vector<std::vector<cplx>> family;
    Evaluator evaluator;
    std::optional<double> decay_class;
    double decay_constant = 0.0;

    static FiberKernel invariant(const Grid& g, const std::function<cplx(double, double)>& fn);
    static FiberKernel delta(const Grid& g, double mass = 1.0);
    static FiberKernel from_evaluator(const Grid& g, const std::vector<ChartPoint>& bases, Evaluator eval);

    // Samples of the family at base b (or the invariant samples).
    const std::vector<cplx>& at_base(std::size_t b) const;
    // Value at an arbitrary base and grid node, falling back to the sampled table.
    cplx value(const ChartPoint& base, int i, int j) const;
};

struct SectionOnG {
    std::function<cplx(const GroupoidElement&)> eval;
    double support_radius = std::numeric_limits<double>::infinity();
};

// f o g (a) = int f(a b^{-1}) g(b) dmu(b).
FiberKernel convolve(const FiberKernel& f, const FiberKernel& g);

SectionOnG apply_operator(const FiberKernel& kappa, const SectionOnG& u);

// (nu(kappa) f)(x) = int kappa(b^{-1}) f(t(b)) dmu(b) over the s-fiber of x.
cplx vector_rep(const FiberKernel& kappa, const std::function<cplx(const ChartPoint&)>& f, const ChartPoint& x);

double one_norm(const FiberKernel& kappa);

struct DecayFit {
    double rate = 0.0;       // fitted epsilon in log m(d) = a - eps d - nu log d
    double nu = 0.0;
    double intercept = 0.0;
    double residual = 0.0;   // rms of the log fit
    double certified = 0.0;  // rate minus the fit slack
    bool super_exponential = false;
    int shells = 0;
    double d_min = 0.0, d_max = 0.0;
};

constexpr double kDecaySlack = 0.05;

struct ShellProfile {
    std::vector<double> d;
    std::vector<double> max_abs;
};

// Maxima of |kappa| over shells of width h inside the inscribed disk.
ShellProfile shell_maxima(const FiberKernel& kappa);

DecayFit decay_rate(const FiberKernel& kappa, double d_min = -1.0);

// True if the outer ring of the grid is negligible relative to the peak.
bool is_compact_on_grid(const FiberKernel& kappa, double rel_tol = 1e-10);

// Snapshot: little-endian binary record, see docs/formats.md.
void write_snapshot(std::ostream& os, const FiberKernel& kappa);
FiberKernel read_snapshot(std::istream& is);
void write_csv(std::ostream& os, const FiberKernel& kappa);

}  // namespace bruhatlab
