#pragma once

#include "bruhatlab/common.hpp"
#include "bruhatlab/groupoid.hpp"

#include <array>
#include <functional>

namespace bruhatlab {

struct MetricSpec {
    double round_scale = 1.0;  // multiplies (1 + x^2 + y^2)^{-2} (dx^2 + dy^2)
};

enum class Chart { Undotted, Dotted };

struct ChartPoint {
    Chart chart = Chart::Undotted;
    cplx coord{0.0, 0.0};
};

ChartPoint to_undotted(const ChartPoint& p);  // SingularLeaf at zdot = 0
ChartPoint to_dotted(const ChartPoint& p);    // ChartDomain at z = 0
UnitPoint to_unit_point(const ChartPoint& p);
ChartPoint from_unit_point(const UnitPoint& x);  // undotted unless the point is [1, 0]
bool is_singular(const ChartPoint& p);

// Coefficient of d_x ^ d_y (undotted) or d_xdot ^ d_ydot (dotted).
double poisson_bivector(const ChartPoint& p);

// Leaf metric in undotted coordinates: the identity divided by round_scale.
std::array<double, 4> leaf_metric(const ChartPoint& p, const MetricSpec& spec = {});

// Scale c of the singular fiber metric, fixed by the limit of regular fibers.
double singular_fiber_scale();
// One-sided extrapolation used to compute the scale; exposed for testing.
double singular_fiber_scale_limit(int levels);

double fiber_distance(const GroupoidElement& a, const GroupoidElement& b, const MetricSpec& spec = {});

// Fiber volume density relative to Lebesgue measure in target-z (regular) or w (singular) coordinates.
double fiber_volume_density(const UnitPoint& source, const MetricSpec& spec = {});

// Element of the s-fiber over x whose target sits at offset q (target-z on regular
// fibers, -w on the singular fiber).
GroupoidElement fiber_element(const UnitPoint& x, cplx offset);
cplx fiber_offset(const GroupoidElement& g);

// Volume of {b in s^{-1}(x) : indicator(b)} by midpoint quadrature over offsets |q| <= extent.
double fiber_region_volume(const UnitPoint& x, const std::function<bool(const GroupoidElement&)>& indicator,
                           double extent, double spacing, const MetricSpec& spec = {});

// Round area density (1 + |c|^2)^{-2} times round_scale in either chart.
double round_volume(const ChartPoint& p, const MetricSpec& spec = {});

}  // namespace bruhatlab
