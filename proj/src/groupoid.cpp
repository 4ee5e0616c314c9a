#include "bruhatlab/groupoid.hpp"

#include <cmath>

namespace bruhatlab {

namespace {

// Phase u with |u| = 1 that rotates (alpha, beta) into canonical gauge.
cplx gauge_phase(cplx alpha, cplx beta) {
    const double b = std::abs(beta);
    if (b >= kPhaseTolerance) return std::conj(beta) / b;
    return std::conj(alpha) / std::abs(alpha);
}

bool is_canonical(cplx alpha, cplx beta) {
    if (beta.imag() != 0.0) return false;
    if (beta.real() >= kPhaseTolerance) return true;
    return beta.real() == 0.0 && alpha == cplx(1.0, 0.0);
}

void normalize(cplx& alpha, cplx& beta, const char* op) {
    const double n2 = std::norm(alpha) + std::norm(beta);
    if (!(n2 > 1e-300)) throw Error("NotOnSphere", op, "(alpha, beta) = (0, 0)");
    if (std::abs(n2 - 1.0) > 1e-14) {
        const double n = std::sqrt(n2);
        alpha /= n;
        beta /= n;
    }
}

}  // namespace

IwasawaFactors iwasawa_nk(cplx w, const UnitPoint& k) {
    const cplx a = k.alpha, b = k.beta;
    // n k = [[a - w conj(b), b + w conj(a)], [-conj(b), conj(a)]]
    const cplx c00 = a - w * std::conj(b), c01 = b + w * std::conj(a);
    const cplx c10 = -std::conj(b), c11 = std::conj(a);
    const double norm = std::sqrt(std::norm(c00) + std::norm(c10));
    IwasawaFactors f;
    f.alpha_prime = c00 / norm;
    f.beta_prime = b / norm;
    f.a_prime = norm;
    // k'^{-1} n k = a' n' is upper triangular; read n' off its (0, 1) entry.
    const cplx m01 = std::conj(f.alpha_prime) * c01 - f.beta_prime * c11;
    f.n_prime = m01 / norm;
    return f;
}

GroupoidElement canonicalize(cplx alpha, cplx beta, cplx w) {
    normalize(alpha, beta, "canonicalize");
    if (is_canonical(alpha, beta)) return {alpha, beta, w};
    const cplx u = gauge_phase(alpha, beta);
    GroupoidElement g;
    if (std::abs(beta) >= kPhaseTolerance) {
        g.alpha = u * alpha;
        g.beta = cplx(std::abs(beta), 0.0);
    } else {
        g.alpha = cplx(1.0, 0.0);
        g.beta = cplx(0.0, 0.0);
    }
    g.w = u * u * w;
    return g;
}

UnitPoint canonical_point(cplx alpha, cplx beta) {
    const GroupoidElement g = canonicalize(alpha, beta, 0.0);
    return {g.alpha, g.beta};
}

UnitPoint source(const GroupoidElement& g) { return {g.alpha, g.beta}; }

UnitPoint target(const GroupoidElement& g) {
    return canonical_point(g.alpha - g.w * std::conj(g.beta), g.beta);
}

std::pair<UnitPoint, UnitPoint> source_target(const GroupoidElement& g) { return {source(g), target(g)}; }

GroupoidElement unit(const UnitPoint& x) { return canonicalize(x.alpha, x.beta, 0.0); }

GroupoidElement inverse(const GroupoidElement& g) {
    return canonicalize(g.alpha - g.w * std::conj(g.beta), g.beta, -g.w);
}

GroupoidElement multiply(const GroupoidElement& g1, const GroupoidElement& g2) {
    const UnitPoint s1 = source(g1);
    const cplx ta = g2.alpha - g2.w * std::conj(g2.beta);
    const double n = std::sqrt(std::norm(ta) + std::norm(g2.beta));
    const UnitPoint t2{ta / n, g2.beta / n};
    const double d = chordal_distance(s1, t2);
    if (d > kComposeTolerance)
        throw Error("CompositionMismatch", "multiply", "source(g1) and target(g2) differ by " + std::to_string(d));
    // Rewrite g1 in the gauge where its SU(2) part equals the lift t2, then add N-parts.
    cplx u = s1.alpha * std::conj(t2.alpha) + s1.beta * std::conj(t2.beta);
    u /= std::abs(u);
    const cplx ub = std::conj(u);
    return canonicalize(g2.alpha, g2.beta, ub * ub * g1.w + g2.w);
}

GroupoidElement chart_x(cplx z, cplx w) {
    const double r = std::sqrt(1.0 + std::norm(z));
    return canonicalize(z / r, 1.0 / r, -std::conj(w));
}

GroupoidElement chart_xdot(cplx zdot, cplx wdot) {
    const double r = std::sqrt(1.0 + std::norm(zdot));
    return canonicalize(1.0 / r, zdot / r, -std::conj(wdot));
}

std::pair<cplx, cplx> chart_x_coords(const GroupoidElement& g) {
    if (std::abs(g.beta) < kPhaseTolerance)
        throw Error("SingularLeaf", "chart_x_coords", "element lies on the singular fiber");
    // Rotate into the gauge beta > 0 (already canonical, but accept any input).
    const cplx u = std::conj(g.beta) / std::abs(g.beta);
    return {g.alpha / g.beta, -std::conj(u * u * g.w)};
}

std::pair<cplx, cplx> chart_xdot_coords(const GroupoidElement& g) {
    if (std::abs(g.alpha) < 1e-300)
        throw Error("ChartDomain", "chart_xdot_coords", "source is [0, 1]");
    const cplx u = std::conj(g.alpha) / std::abs(g.alpha);
    return {g.beta / g.alpha, -std::conj(u * u * g.w)};
}

cplx point_z(const UnitPoint& p) {
    if (std::abs(p.beta) < kPhaseTolerance) throw Error("SingularLeaf", "point_z", "point is [1, 0]");
    return p.alpha / p.beta;
}

UnitPoint point_from_z(cplx z) {
    const double r = std::sqrt(1.0 + std::norm(z));
    return canonical_point(z / r, 1.0 / r);
}

UnitPoint point_from_zdot(cplx zdot) {
    const double r = std::sqrt(1.0 + std::norm(zdot));
    return canonical_point(1.0 / r, zdot / r);
}

double chordal_distance(const UnitPoint& p, const UnitPoint& q) {
    // |det[p q]| equals sqrt(1 - |<p, q>|^2) for unit vectors without the cancellation.
    return std::abs(p.alpha * q.beta - p.beta * q.alpha);
}

double element_distance(const GroupoidElement& a, const GroupoidElement& b) {
    return std::max({std::abs(a.alpha - b.alpha), std::abs(a.beta - b.beta), std::abs(a.w - b.w)});
}

MultBound mult_differential_bound(cplx alpha, cplx beta, cplx w) {
    MultBound r;
    r.q = std::norm(beta) + std::norm(alpha - w * std::conj(beta));
    const double aw = std::abs(w);
    r.bound_ok = aw <= 1.0 || r.q >= 1.0 / (4.0 * aw * aw);
    return r;
}

double mult_differential_min(cplx w) {
    const double s = 2.0 + std::norm(w);
    // Smaller root of x^2 - s x + 1, written to avoid cancellation.
    return 2.0 / (s + std::sqrt(s * s - 4.0));
}

}  // namespace bruhatlab
