#include "bruhatlab/geometry.hpp"

#include <cmath>

namespace bruhatlab {

ChartPoint to_undotted(const ChartPoint& p) {
    if (p.chart == Chart::Undotted) return p;
    if (p.coord == cplx(0.0, 0.0)) throw Error("SingularLeaf", "to_undotted", "zdot = 0 is the point [1, 0]");
    return {Chart::Undotted, 1.0 / p.coord};
}

ChartPoint to_dotted(const ChartPoint& p) {
    if (p.chart == Chart::Dotted) return p;
    if (p.coord == cplx(0.0, 0.0)) throw Error("ChartDomain", "to_dotted", "z = 0 is outside the dotted chart");
    return {Chart::Dotted, 1.0 / p.coord};
}

UnitPoint to_unit_point(const ChartPoint& p) {
    return p.chart == Chart::Undotted ? point_from_z(p.coord) : point_from_zdot(p.coord);
}

ChartPoint from_unit_point(const UnitPoint& x) {
    if (std::abs(x.beta) < kPhaseTolerance) return {Chart::Dotted, 0.0};
    return {Chart::Undotted, x.alpha / x.beta};
}

bool is_singular(const ChartPoint& p) { return p.chart == Chart::Dotted && p.coord == cplx(0.0, 0.0); }

double poisson_bivector(const ChartPoint& p) {
    const double r2 = std::norm(p.coord);
    return p.chart == Chart::Undotted ? 1.0 + r2 : r2 * (1.0 + r2);
}

std::array<double, 4> leaf_metric(const ChartPoint& p, const MetricSpec& spec) {
    if (is_singular(p)) throw Error("SingularLeaf", "leaf_metric", "the leaf metric is undefined at [1, 0]");
    const double d = 1.0 / spec.round_scale;
    return {d, 0.0, 0.0, d};
}

double singular_fiber_scale_limit(int levels) {
    // Distance between xdot(zdot, 0) and xdot(zdot, 1) on the regular fiber over [1, zdot],
    // Richardson-extrapolated along zdot = 2^{-k} / 10.
    std::vector<double> d;
    for (int k = 0; k < levels; ++k) {
        const cplx zd = std::polar(0.1 * std::ldexp(1.0, -k), 0.7);
        const GroupoidElement a = chart_xdot(zd, 0.0), b = chart_xdot(zd, 1.0);
        d.push_back(std::abs(point_z(target(a)) - point_z(target(b))));
    }
    for (int m = 1; m < levels; ++m)
        for (int k = levels - 1; k >= m; --k) d[k] = (std::ldexp(d[k], m) - d[k - 1]) / (std::ldexp(1.0, m) - 1.0);
    return d.back();
}

double singular_fiber_scale() {
    static const double c = singular_fiber_scale_limit(6);
    return c;
}

double fiber_distance(const GroupoidElement& a, const GroupoidElement& b, const MetricSpec& spec) {
    if (chordal_distance(source(a), source(b)) > kComposeTolerance)
        throw Error("FiberMismatch", "fiber_distance", "elements lie on different s-fibers");
    const double s = 1.0 / std::sqrt(spec.round_scale);
    if (std::abs(a.beta) < kPhaseTolerance) return s * singular_fiber_scale() * std::abs(a.w - b.w);
    return s * std::abs(point_z(target(a)) - point_z(target(b)));
}

double fiber_volume_density(const UnitPoint& source, const MetricSpec& spec) {
    const double base = 1.0 / spec.round_scale;
    if (std::abs(source.beta) < kPhaseTolerance) {
        const double c = singular_fiber_scale();
        return base * c * c;
    }
    return base;
}

GroupoidElement fiber_element(const UnitPoint& x, cplx offset) {
    if (std::abs(x.beta) < kPhaseTolerance) return canonicalize(1.0, 0.0, -offset);
    return chart_x(x.alpha / x.beta, std::conj(offset));
}

cplx fiber_offset(const GroupoidElement& g) {
    if (std::abs(g.beta) < kPhaseTolerance) return -g.w;
    return point_z(target(g)) - g.alpha / g.beta;
}

double fiber_region_volume(const UnitPoint& x, const std::function<bool(const GroupoidElement&)>& indicator,
                           double extent, double spacing, const MetricSpec& spec) {
    const int m = static_cast<int>(std::ceil(extent / spacing));
    KahanSum acc;
    for (int i = -m; i < m; ++i)
        for (int j = -m; j < m; ++j) {
            const cplx q((i + 0.5) * spacing, (j + 0.5) * spacing);
            if (indicator(fiber_element(x, q))) acc.add(spacing * spacing);
        }
    return acc.value() * fiber_volume_density(x, spec);
}

double round_volume(const ChartPoint& p, const MetricSpec& spec) {
    const double r2 = std::norm(p.coord);
    return spec.round_scale / ((1.0 + r2) * (1.0 + r2));
}

}  // namespace bruhatlab
