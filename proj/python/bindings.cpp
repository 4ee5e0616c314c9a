#include "bruhatlab/groupoid.hpp"
#include "bruhatlab/heat.hpp"
#include "bruhatlab/index.hpp"
#include "bruhatlab/renorm.hpp"
#include "bruhatlab/runner.hpp"
#include "bruhatlab/symbol.hpp"

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bruhatlab;

namespace {

py::array_t<double> real_part(const FiberKernel& k) {
    const int n = k.grid.n;
    py::array_t<double> out({n, n});
    auto v = out.mutable_unchecked<2>();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v(i, j) = k.samples[k.grid.index(i, j)].real();
    return out;
}

py::dict renorm_dict(const RenormalizedValue& v) {
    py::dict d;
    d["finite_part"] = v.finite_part;
    d["log_coeff"] = v.log_coeff;
    d["power_coeffs"] = v.power_coeffs;
    d["fit_residual"] = v.fit_residual;
    d["ladder"] = v.ladder;
    d["values"] = v.values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Numerical experiments on the Bruhat sphere groupoid";

    static py::exception<Error> error(m, "BruhatError");
    static py::exception<ConfigInvalid> config_error(m, "ConfigInvalid", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigInvalid& e) {
            config_error(e.what());
        } catch (const Error& e) {
            error(e.what());
        }
    });

    py::class_<UnitPoint>(m, "UnitPoint")
        .def(py::init<cplx, cplx>(), py::arg("alpha") = cplx(1.0), py::arg("beta") = cplx(0.0))
        .def_readwrite("alpha", &UnitPoint::alpha)
        .def_readwrite("beta", &UnitPoint::beta)
        .def("__repr__", [](const UnitPoint& p) {
            return "UnitPoint(" + py::repr(py::cast(p.alpha)).cast<std::string>() + ", " +
                   py::repr(py::cast(p.beta)).cast<std::string>() + ")";
        });

    py::class_<GroupoidElement>(m, "GroupoidElement")
        .def(py::init([](cplx a, cplx b, cplx w) { return canonicalize(a, b, w); }), py::arg("alpha"), py::arg("beta"),
             py::arg("w"))
        .def_readonly("alpha", &GroupoidElement::alpha)
        .def_readonly("beta", &GroupoidElement::beta)
        .def_readonly("w", &GroupoidElement::w)
        .def("__mul__", &multiply)
        .def("__repr__", [](const GroupoidElement& g) {
            return "GroupoidElement(" + py::repr(py::cast(g.alpha)).cast<std::string>() + ", " +
                   py::repr(py::cast(g.beta)).cast<std::string>() + ", " + py::repr(py::cast(g.w)).cast<std::string>() +
                   ")";
        });

    m.def("source", &source);
    m.def("target", &target);
    m.def("unit", &unit);
    m.def("inverse", &inverse);
    m.def("multiply", &multiply);
    m.def("chart_x", &chart_x, py::arg("z"), py::arg("w"));
    m.def("chart_xdot", &chart_xdot, py::arg("zdot"), py::arg("wdot"));
    m.def("chart_x_coords", &chart_x_coords);
    m.def("chart_xdot_coords", &chart_xdot_coords);
    m.def("point_from_z", &point_from_z);
    m.def("point_z", &point_z);
    m.def("element_distance", &element_distance);
    m.def("mult_differential_bound", [](cplx a, cplx b, cplx w) {
        const MultBound r = mult_differential_bound(a, b, w);
        return py::make_tuple(r.q, r.bound_ok);
    });
    m.def("mult_differential_min", &mult_differential_min);

    m.def(
        "fredholm_verdict",
        [](double c0, double c2, double theta) {
            const FredholmVerdict v = fredholm_verdict(c2 > 0.0, Symbol{c0, c2, std::nullopt}, StripSpec{theta});
            py::dict d;
            d["fredholm"] = v.fredholm;
            d["c_lower"] = v.strip.c_lower;
            d["c_upper"] = v.strip.c_upper;
            d["witness"] = std::vector<cplx>{v.strip.witness[0], v.strip.witness[1]};
            return d;
        },
        py::arg("c0"), py::arg("c2"), py::arg("theta") = 0.5);
    m.def(
        "inverse_kernel",
        [](double c0, double c2, double theta, double eps, double extent, double spacing) {
            FiberKernel k;
            {
                py::gil_scoped_release nogil;
                k = inverse_kernel(Symbol{c0, c2, std::nullopt}, StripSpec{theta}, eps, Grid::from_extent(extent, spacing));
            }
            return real_part(k);
        },
        py::arg("c0"), py::arg("c2"), py::arg("theta") = 0.5, py::arg("eps") = 0.45, py::arg("extent") = 8.0,
        py::arg("spacing") = 0.0625);

    m.def("gaussian_q", &gaussian_q, py::arg("d"), py::arg("t"), py::arg("n") = 2);
    m.def(
        "heat_kernel",
        [](double f, const std::vector<double>& times, double extent, double spacing, int N) {
            PerturbationSpec spec;
            spec.f = f;
            HeatSeriesState st;
            {
                py::gil_scoped_release nogil;
                st = levi_series(spec, CutoffSpec{}, N, times, Grid::from_extent(extent, spacing));
            }
            py::list out;
            for (const auto& k : st.kernels) out.append(real_part(k));
            return out;
        },
        py::arg("f"), py::arg("times"), py::arg("extent") = 6.0, py::arg("spacing") = 0.05, py::arg("N") = 3);

    m.def("cutoff_integral", &cutoff_integral, py::arg("F"), py::arg("k"), py::arg("r0"));
    m.def(
        "cutoff_expand",
        [](const RadialFunction& F, int k, std::optional<std::vector<double>> ladder, double max_residual) {
            return renorm_dict(cutoff_expand(F, k, ladder ? *ladder : geometric_ladder(8.0, 1024.0, 15), max_residual));
        },
        py::arg("F"), py::arg("k"), py::arg("ladder") = py::none(), py::arg("max_residual") = 1e-9);
    m.def(
        "renormalized_round_integral",
        [](const std::function<double(cplx)>& f) {
            const LeafDensity rho = round_density([&f](const ChartPoint& p) { return f(to_dotted(p).coord); });
            return renorm_dict(renormalized_integral(rho));
        },
        py::arg("f"), "Renormalized integral of f(zdot) against the round measure in the dotted chart.");

    m.def(
        "mckean_singer_index",
        [](double mass, double c0) {
            DiracSpec spec;
            spec.mass = mass;
            spec.c0 = c0;
            const IndexReport r = mckean_singer_index(spec);
            py::dict d;
            d["geometric"] = r.geometric;
            d["eta"] = r.eta;
            d["total"] = r.total;
            d["plateau"] = r.plateau;
            d["error_bar"] = r.error_bar;
            d["consistent"] = r.consistent;
            return d;
        },
        py::arg("mass") = 1.0, py::arg("c0") = 0.5);

    m.def("experiment_names", &experiment_names);
    m.def(
        "run_experiment_json",
        [](const std::string& config_json) {
            const ExperimentConfig config = parse_config(Json::parse(config_json));
            std::string report;
            {
                py::gil_scoped_release nogil;
                report = render_report(run_experiment(config));
            }
            return report;
        },
        py::arg("config_json"), "Runs an experiment from a JSON config and returns the report as JSON text.");
}
