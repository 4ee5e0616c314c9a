#pragma once

#include "bruhatlab/common.hpp"

#include <utility>

namespace bruhatlab {

// Point of CP(1) as a normalized pair (alpha, beta) in canonical T-gauge.
struct UnitPoint {
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
};

// Element [alpha, beta]^w of T \ (SU(2) x N), canonical under
// (alpha, beta, w) ~ (e^{it} alpha, e^{it} beta, e^{2it} w).
struct GroupoidElement {
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
    cplx w{0.0, 0.0};
};

struct IwasawaFactors {
    cplx alpha_prime;
    cplx beta_prime;
    double a_prime = 1.0;
    cplx n_prime;
};

constexpr double kPhaseTolerance = 1e-12;
constexpr double kComposeTolerance = 1e-9;

IwasawaFactors iwasawa_nk(cplx w, const UnitPoint& k);

GroupoidElement canonicalize(cplx alpha, cplx beta, cplx w);
UnitPoint canonical_point(cplx alpha, cplx beta);

UnitPoint source(const GroupoidElement& g);
UnitPoint target(const GroupoidElement& g);
std::pair<UnitPoint, UnitPoint> source_target(const GroupoidElement& g);

GroupoidElement unit(const UnitPoint& x);
GroupoidElement inverse(const GroupoidElement& g);
GroupoidElement multiply(const GroupoidElement& g1, const GroupoidElement& g2);

// x(z, w): source [z, 1], target z + conj(w) in the undotted chart.
GroupoidElement chart_x(cplx z, cplx w);
// xdot(zdot, wdot): source [1, zdot]; agrees with chart_x(z, w) at zdot = 1/z, wdot = z^2 w / |z|^2.
GroupoidElement chart_xdot(cplx zdot, cplx wdot);

// Coordinates of an element in either chart (inverse of chart_x / chart_xdot).
// chart_x_coords fails with SingularLeaf on the fiber over [1, 0].
std::pair<cplx, cplx> chart_x_coords(const GroupoidElement& g);
std::pair<cplx, cplx> chart_xdot_coords(const GroupoidElement& g);

// Undotted coordinate z = alpha / beta of a point; fails with SingularLeaf at [1, 0].
cplx point_z(const UnitPoint& p);
UnitPoint point_from_z(cplx z);
UnitPoint point_from_zdot(cplx zdot);

// Fubini-Study sine distance sqrt(1 - |<p, q>|^2).
double chordal_distance(const UnitPoint& p, const UnitPoint& q);
// Sup distance of canonical coordinates (alpha, beta, w).
double element_distance(const GroupoidElement& a, const GroupoidElement& b);

struct MultBound {
    double q = 1.0;
    bool bound_ok = true;
};

// Q = |beta|^2 + |alpha - w conj(beta)|^2; bound_ok checks Q >= 1/(4|w|^2) when |w| > 1.
MultBound mult_differential_bound(cplx alpha, cplx beta, cplx w);
// Closed-form minimum of Q over the unit sphere for fixed w.
double mult_differential_min(cplx w);

}  // namespace bruhatlab
