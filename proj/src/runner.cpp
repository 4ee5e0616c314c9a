#include "bruhatlab/runner.hpp"

#include "bruhatlab/geometry.hpp"
#include "bruhatlab/groupoid.hpp"
#include "bruhatlab/heat.hpp"
#include "bruhatlab/index.hpp"
#include "bruhatlab/kernel.hpp"
#include "bruhatlab/renorm.hpp"
#include "bruhatlab/symbol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace bruhatlab {

ConfigInvalid::ConfigInvalid(const std::string& field, const std::string& reason)
    : Error("ConfigInvalid", field, reason), field_(field) {}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"groupoid-check", "fredholm", "heat", "renorm", "trace-defect", "index"};
    return names;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void CsvTable::add(const std::vector<double>& row) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(format_number(v));
    rows.push_back(std::move(cells));
}

void Results::check(const std::string& name, double value, const std::string& relation, double threshold) {
    Check c{value, threshold, relation, false};
    if (relation == "<=") c.pass = value <= threshold;
    else if (relation == ">=") c.pass = value >= threshold;
    else if (relation == "==") c.pass = value == threshold;
    else throw Error("InvalidRelation", "Results::check", relation);
    checks[name] = c;
}

bool Results::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second.pass; });
}

namespace {

// --- configuration access -------------------------------------------------------------------

// Reads keys of a JSON object with defaults, records the resolved values and rejects unknown keys.
class Params {
public:
    Params(Json src, std::string path) : src_(std::move(src)), path_(std::move(path)) {
        if (src_.is_null()) src_ = Json::object();
        if (!src_.is_object()) throw ConfigInvalid(path_, "expected an object");
    }

    double number(const std::string& key, double def) {
        const Json v = take(key, def);
        if (!v.is_number()) throw ConfigInvalid(field(key), "expected a number");
        return v.get<double>();
    }
    int integer(const std::string& key, int def) {
        const Json v = take(key, def);
        if (!v.is_number_integer()) throw ConfigInvalid(field(key), "expected an integer");
        return v.get<int>();
    }
    bool flag(const std::string& key, bool def) {
        const Json v = take(key, def);
        if (!v.is_boolean()) throw ConfigInvalid(field(key), "expected a boolean");
        return v.get<bool>();
    }
    std::string text(const std::string& key, const std::string& def) {
        const Json v = take(key, def);
        if (!v.is_string()) throw ConfigInvalid(field(key), "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const std::string& key, const std::vector<double>& def) {
        const Json v = take(key, def);
        if (!v.is_array()) throw ConfigInvalid(field(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigInvalid(field(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::vector<std::string> texts(const std::string& key, const std::vector<std::string>& def) {
        const Json v = take(key, def);
        if (!v.is_array()) throw ConfigInvalid(field(key), "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) throw ConfigInvalid(field(key), "expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }
    // Array of objects; each element is handed out as its own Params and must be adopted back.
    std::vector<Params> list(const std::string& key, const Json& def) {
        const Json v = src_.contains(key) ? src_.at(key) : def;
        used_.insert(key);
        if (!v.is_array()) throw ConfigInvalid(field(key), "expected an array of objects");
        std::vector<Params> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], field(key) + "[" + std::to_string(i) + "]");
        return out;
    }
    void adopt_list(const std::string& key, std::vector<Params>& items) {
        Json arr = Json::array();
        for (auto& p : items) {
            p.finish();
            arr.push_back(p.resolved());
        }
        resolved_[key] = arr;
    }
    Params child(const std::string& key) {
        used_.insert(key);
        return Params(src_.contains(key) ? src_.at(key) : Json::object(), field(key));
    }
    void adopt(const std::string& key, Params& sub) {
        sub.finish();
        resolved_[key] = sub.resolved();
    }
    bool has(const std::string& key) const { return src_.contains(key); }
    void finish() const {
        for (const auto& [k, v] : src_.items())
            if (!used_.count(k)) throw ConfigInvalid(field(k), "unknown key");
    }
    const Json& resolved() const { return resolved_; }
    std::string field(const std::string& key) const { return path_ + "." + key; }

private:
    Json take(const std::string& key, const Json& def) {
        used_.insert(key);
        Json v = src_.contains(key) ? src_.at(key) : def;
        resolved_[key] = v;
        return v;
    }

    Json src_;
    std::string path_;
    Json resolved_ = Json::object();
    std::set<std::string> used_;
};

class Tolerances {
public:
    explicit Tolerances(const std::map<std::string, double>& given) : given_(given) {}
    double operator()(const std::string& name, double def) {
        used_.insert(name);
        const auto it = given_.find(name);
        const double v = it == given_.end() ? def : it->second;
        resolved_[name] = v;
        return v;
    }
    void finish() const {
        for (const auto& [k, v] : given_)
            if (!used_.count(k)) throw ConfigInvalid("tolerances." + k, "unknown tolerance");
    }
    Json resolved() const {
        Json j = Json::object();
        for (const auto& [k, v] : resolved_) j[k] = v;
        return j;
    }

private:
    std::map<std::string, double> given_;
    std::map<std::string, double> resolved_;
    std::set<std::string> used_;
};

struct Context {
    const ExperimentConfig& config;
    Params params;
    Tolerances tol;
    std::vector<double> time_grid;
    std::vector<double> ladder;
    Results results;

    explicit Context(const ExperimentConfig& c)
        : config(c), params(c.params, "params"), tol(c.tolerances), time_grid(c.time_grid), ladder(c.ladder) {
        results.experiment = c.experiment;
    }
    Grid grid() const { return Grid::from_extent(config.extent, config.spacing); }
    void use_time_grid(const std::vector<double>& def) {
        if (time_grid.empty()) time_grid = def;
    }
    void use_ladder(const std::vector<double>& def) {
        if (ladder.empty()) ladder = def;
    }
    // Called once every parameter has been read, before any computation.
    void seal() {
        params.finish();
        tol.finish();
        Json& c = results.config;
        c["experiment"] = config.experiment;
        c["grid"] = {{"extent", config.extent}, {"spacing", config.spacing}};
        c["time_grid"] = time_grid;
        c["ladder"] = ladder;
        c["tolerances"] = tol.resolved();
        c["seed"] = config.seed;
        c["params"] = params.resolved();
    }
};

Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

cplx complex_param(Params& p, const std::string& key, cplx def) {
    const std::vector<double> v = p.numbers(key, {def.real(), def.imag()});
    if (v.size() != 2) throw ConfigInvalid(p.field(key), "expected [re, im]");
    return {v[0], v[1]};
}

std::string check_name(const std::string& prefix, const std::string& name) { return prefix + "." + name; }

// --- groupoid-check ----------------------------------------------------------------------------

struct GroupoidSampler {
    std::mt19937_64& rng;
    double w_scale;
    double singular_fraction;
    std::normal_distribution<double> normal{0.0, 1.0};
    std::uniform_real_distribution<double> unif{0.0, 1.0};

    cplx gauss() { return {normal(rng), normal(rng)}; }
    UnitPoint point() {
        cplx a = gauss(), b = gauss();
        const double n = std::sqrt(std::norm(a) + std::norm(b));
        return canonical_point(a / n, b / n);
    }
    cplx w() { return w_scale * gauss(); }
    GroupoidElement element() {
        if (unif(rng) < singular_fraction) return canonicalize(1.0, 0.0, w());
        const UnitPoint p = point();
        return canonicalize(p.alpha, p.beta, w());
    }
    GroupoidElement with_source(const UnitPoint& x) { return canonicalize(x.alpha, x.beta, w()); }
};

void run_groupoid(Context& ctx) {
    auto& p = ctx.params;
    const int samples = p.integer("samples", 10000);
    const int bound_samples = p.integer("bound_samples", 100000);
    const double w_scale = p.number("w_scale", 2.0);
    const double singular_fraction = p.number("singular_fraction", 0.05);
    const double w_max = p.number("bound_w_max", 1000.0);
    const int bins = p.integer("bound_bins", 12);
    const double tol_id = ctx.tol("identity", 1e-10);
    const double tol_closed = ctx.tol("closed_form", 1e-12);
    if (samples < 1) throw ConfigInvalid("params.samples", "must be positive");
    if (bound_samples < 0) throw ConfigInvalid("params.bound_samples", "must be nonnegative");
    if (!(w_max > 1.0)) throw ConfigInvalid("params.bound_w_max", "must exceed 1");
    if (bins < 1) throw ConfigInvalid("params.bound_bins", "must be positive");
    ctx.seal();

    std::mt19937_64 rng(ctx.config.seed);
    GroupoidSampler s{rng, w_scale, singular_fraction};
    auto pd = [](const UnitPoint& a, const UnitPoint& b) { return chordal_distance(a, b); };
    auto ed = [](const GroupoidElement& a, const GroupoidElement& b) { return element_distance(a, b); };

    double e_st = 0.0, e_unit = 0.0, e_inv = 0.0, e_assoc = 0.0, e_closed = 0.0;
    for (int i = 0; i < samples; ++i) {
        const GroupoidElement g = s.element();
        const GroupoidElement gi = inverse(g);
        const GroupoidElement h = s.with_source(target(g));
        const GroupoidElement hg = multiply(h, g);
        const cplx z = s.w(), w = s.w();
        const GroupoidElement x = chart_x(z, w);
        e_st = std::max({e_st, pd(source(gi), target(g)), pd(target(gi), source(g)), pd(source(hg), source(g)),
                         pd(target(hg), target(h)), pd(source(x), point_from_z(z)),
                         pd(target(x), point_from_z(z + std::conj(w)))});

        const UnitPoint y = s.point();
        const GroupoidElement uy = unit(y);
        e_unit = std::max({e_unit, ed(multiply(g, unit(source(g))), g), ed(multiply(unit(target(g)), g), g),
                           ed(inverse(uy), uy), pd(source(uy), y), pd(target(uy), y)});

        e_inv = std::max({e_inv, ed(multiply(g, gi), unit(target(g))), ed(multiply(gi, g), unit(source(g))),
                          ed(inverse(gi), g)});
        e_closed = std::max({e_closed, ed(inverse(canonicalize(1.0, 0.0, w)), canonicalize(1.0, 0.0, -w)),
                             ed(inverse(x), chart_x(z + std::conj(w), -w))});

        const GroupoidElement k = s.with_source(target(h));
        e_assoc = std::max(e_assoc, ed(multiply(multiply(k, h), g), multiply(k, multiply(h, g))));
    }

    CsvTable suites{"groupoid_suites", {"suite", "samples", "max_error"}, {}};
    const std::vector<std::pair<std::string, double>> rows{
        {"source_target", e_st}, {"units", e_unit}, {"inverse", e_inv}, {"associativity", e_assoc}};
    for (const auto& [name, err] : rows) {
        ctx.results.sections["suites"][name] = {{"samples", samples}, {"max_error", err}};
        ctx.results.check(check_name(name, "max_error"), err, "<=", tol_id);
        suites.rows.push_back({name, std::to_string(samples), format_number(err)});
    }
    ctx.results.sections["closed_form_inverse"] = {{"samples", samples}, {"max_error", e_closed}};
    ctx.results.check("closed_form_inverse.max_error", e_closed, "<=", tol_closed);
    ctx.results.tables.push_back(std::move(suites));

    if (bound_samples > 0) {
        // |w| log-uniform on (1, w_max); Q compared with 1 / (4 |w|^2).
        std::uniform_real_distribution<double> lw(0.0, std::log(w_max)), ang(0.0, 2.0 * kPi);
        std::vector<double> bin_min(bins, std::numeric_limits<double>::infinity());
        std::vector<int> bin_count(bins, 0);
        long violations = 0;
        double min_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < bound_samples; ++i) {
            const double lr = lw(rng);
            const cplx w = std::polar(std::exp(lr), ang(rng));
            const UnitPoint x = s.point();
            const MultBound b = mult_differential_bound(x.alpha, x.beta, w);
            if (!b.bound_ok) ++violations;
            const double ratio = 4.0 * std::norm(w) * b.q;
            min_ratio = std::min(min_ratio, ratio);
            const int k = std::min(bins - 1, static_cast<int>(lr / std::log(w_max) * bins));
            bin_min[k] = std::min(bin_min[k], ratio);
            ++bin_count[k];
        }
        ctx.results.sections["multiplication_bound"] = {
            {"samples", bound_samples}, {"violations", violations}, {"min_ratio", min_ratio}, {"w_max", w_max}};
        ctx.results.check("multiplication_bound.violations", static_cast<double>(violations), "==", 0.0);
        CsvTable t{"multiplication_bound", {"log10_w_lo", "log10_w_hi", "samples", "min_ratio"}, {}};
        for (int k = 0; k < bins; ++k) {
            const double lo = std::log10(w_max) * k / bins, hi = std::log10(w_max) * (k + 1) / bins;
            t.add({lo, hi, static_cast<double>(bin_count[k]), bin_count[k] ? bin_min[k] : 0.0});
        }
        ctx.results.tables.push_back(std::move(t));
    }
}

// --- fredholm ----------------------------------------------------------------------------------

void run_fredholm(Context& ctx) {
    auto& p = ctx.params;
    const double theta = p.number("theta", 0.5);
    const Json default_ops = Json::array({{{"name", "laplace_plus_one"}, {"c0", 1.0}, {"c2", 1.0}}});
    std::vector<Params> ops = p.list("operators", default_ops);
    struct Op {
        std::string name;
        double c0, c2;
        bool expect;
    };
    std::vector<Op> specs;
    for (auto& o : ops)
        specs.push_back({o.text("name", "operator"), o.number("c0", 1.0), o.number("c2", 1.0),
                         o.flag("expect_fredholm", true)});
    p.adopt_list("operators", ops);
    Params inv = p.child("inverse");
    const bool inv_on = inv.flag("enabled", true);
    const double eps = inv.number("eps", 0.45);
    const double r_min = inv.number("r_min", 0.5);
    const double r_max = inv.number("r_max", 11.0);
    const double split = inv.number("split_radius", 1.0);
    p.adopt("inverse", inv);
    Params el = p.child("ellipticity");
    EllipticityOptions eo;
    eo.lambda0 = el.number("lambda0", eo.lambda0);
    eo.max_octaves = el.integer("max_octaves", eo.max_octaves);
    eo.nodes = el.integer("nodes", eo.nodes);
    eo.drift = el.number("drift", eo.drift);
    eo.lower_floor = el.number("lower_floor", eo.lower_floor);
    p.adopt("ellipticity", el);
    const double tol_oracle = ctx.tol("oracle_relative", 1e-3);
    const double min_rate = ctx.tol("decay_rate", 0.9);
    const double tol_par = ctx.tol("parametrix_residual", 1e-6);
    const double tol_witness = ctx.tol("witness", 1e-12);
    ctx.seal();

    const StripSpec strip{theta};
    for (const Op& op : specs) {
        const Symbol sym{op.c0, op.c2, std::nullopt};
        const FredholmVerdict v = fredholm_verdict(op.c2 > 0.0, sym, strip, eo);
        const double wmod = std::sqrt(std::norm(v.strip.witness[0]) + std::norm(v.strip.witness[1]));
        Json sec = {{"c0", op.c0},
                    {"c2", op.c2},
                    {"fredholm", v.fredholm},
                    {"principal_ok", v.principal_ok},
                    {"c_upper", v.strip.c_upper},
                    {"c_lower", v.strip.c_lower},
                    {"stabilized", v.strip.stabilized},
                    {"box_lambda", v.strip.lambda},
                    {"octaves", v.strip.octaves},
                    {"witness", {complex_json(v.strip.witness[0]), complex_json(v.strip.witness[1])}},
                    {"witness_modulus", wmod}};
        ctx.results.check(check_name(op.name, "verdict"), v.fredholm ? 1.0 : 0.0, "==", op.expect ? 1.0 : 0.0);
        if (!op.expect) ctx.results.check(check_name(op.name, "witness_modulus"), wmod, "<=", tol_witness);

        if (op.expect && v.fredholm && inv_on) {
            const Grid out = ctx.grid();
            InverseDiagnostics diag;
            const FiberKernel k = inverse_kernel(sym, strip, eps, out, &diag);
            const DecayFit fit = decay_rate(k);
            const RadialGreenOracle oracle(op.c0, op.c2);
            CsvTable prof{op.name + "_inverse", {"r", "value", "oracle", "relative_error"}, {}};
            double worst = 0.0;
            for (int i = out.half(); i < out.n; ++i) {
                const double r = out.coord(i);
                if (r < r_min || r > r_max) continue;
                const double val = k.samples[out.index(i, out.half())].real();
                const double ref = oracle(r);
                const double rel = std::abs(val - ref) / std::abs(ref);
                worst = std::max(worst, rel);
                prof.add({r, val, ref, rel});
            }
            ctx.results.tables.push_back(std::move(prof));
            const ShellProfile sh = shell_maxima(k);
            CsvTable shells{op.name + "_shells", {"d", "max_abs"}, {}};
            for (std::size_t j = 0; j < sh.d.size(); ++j) shells.add({sh.d[j], sh.max_abs[j]});
            ctx.results.tables.push_back(std::move(shells));

            const auto parts = split_kernel(k, split);
            const FiberKernel s = singular_complement(sym, parts.first);
            FiberKernel par = parts.first;
            for (std::size_t j = 0; j < par.samples.size(); ++j) par.samples[j] += s.samples[j];
            const ResidualNorms rn = singular_residual(sym, par);

            sec["inverse"] = {{"eps", eps},
                              {"box_nodes", diag.box_nodes},
                              {"box_extent", diag.box_extent},
                              {"reference_mu", diag.reference_mu},
                              {"pole_proximity", diag.pole_proximity},
                              {"oracle_max_relative", worst},
                              {"decay_rate", fit.rate},
                              {"decay_certified", fit.certified},
                              {"decay_nu", fit.nu},
                              {"decay_shells", fit.shells}};
            sec["parametrix"] = {{"split_radius", split},
                                 {"residual_sup", rn.sup},
                                 {"residual_one_norm", rn.one_norm},
                                 {"residual_fourier_sup", rn.fourier_sup}};
            ctx.results.check(check_name(op.name, "oracle_relative"), worst, "<=", tol_oracle);
            ctx.results.check(check_name(op.name, "decay_rate"), fit.rate, ">=", min_rate);
            ctx.results.check(check_name(op.name, "parametrix_residual"), rn.sup, "<=", tol_par);
        }
        ctx.results.sections[op.name] = sec;
    }
}

// --- heat --------------------------------------------------------------------------------------

double sup_diff(const FiberKernel& a, const FiberKernel& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.samples.size(); ++j) m = std::max(m, std::abs(a.samples[j] - b.samples[j]));
    return m;
}

double sup_abs(const FiberKernel& a) {
    double m = 0.0;
    for (const cplx& v : a.samples) m = std::max(m, std::abs(v));
    return m;
}

double kernel_mass(const FiberKernel& a) {
    KahanSum s;
    for (const cplx& v : a.samples) s.add(v.real());
    return s.value() * a.grid.h * a.grid.h;
}

CsvTable heat_profile(const std::string& name, const FiberKernel& q, double lambda) {
    const ShellProfile sh = shell_maxima(q);
    double c = 0.0;
    for (std::size_t j = 0; j < sh.d.size(); ++j) c = std::max(c, sh.max_abs[j] * std::exp(lambda * sh.d[j]));
    CsvTable t{name, {"d", "value", "envelope"}, {}};
    for (std::size_t j = 0; j < sh.d.size(); ++j) t.add({sh.d[j], sh.max_abs[j], c * std::exp(-lambda * sh.d[j])});
    return t;
}

void run_heat(Context& ctx) {
    auto& p = ctx.params;
    ctx.use_time_grid({0.01, 0.1, 1.0});
    const int N = p.integer("N", 3);
    const std::vector<std::string> checks = p.texts("checks", {"closed_form", "mass", "semigroup"});
    const std::vector<double> semigroup = p.numbers("semigroup_times", {0.1, 0.1});
    const std::vector<double> lambdas = p.numbers("decay_lambdas", {1.0, 2.0, 5.0});
    const double env_lambda = p.number("envelope_lambda", 1.0);
    const double mass2 = p.number("supertrace_mass2", 1.0);
    const int fit_degree = p.integer("fit_degree", 4);
    const int duhamel_cells = p.integer("duhamel_cells", 32);
    const Json default_cases = Json::array({{{"name", "free"}, {"f", 0.0}}});
    std::vector<Params> cases = p.list("cases", default_cases);
    struct Case {
        std::string name;
        double f;
        bool has_kernel;
        double amplitude, width2, support;
    };
    std::vector<Case> cs;
    for (auto& c : cases) {
        Case k{c.text("name", "case"), c.number("f", 0.0), c.has("kernel"), 0.0, 0.0, 0.0};
        if (k.has_kernel) {
            Params kp = c.child("kernel");
            k.amplitude = kp.number("amplitude", 0.4);
            k.width2 = kp.number("width2", 0.5);
            k.support = kp.number("support", 2.0);
            c.adopt("kernel", kp);
        }
        cs.push_back(k);
    }
    p.adopt_list("cases", cases);
    const std::set<std::string> known{"closed_form", "mass", "semigroup", "duhamel", "decay", "short_time"};
    for (const auto& c : checks)
        if (!known.count(c)) throw ConfigInvalid("params.checks", "unknown check " + c);
    auto wants = [&](const std::string& c) { return std::find(checks.begin(), checks.end(), c) != checks.end(); };
    const double tol_cf = ctx.tol("closed_form", 1e-8);
    const double tol_cf_pot = ctx.tol("closed_form_potential", 1e-6);
    const double tol_mass = ctx.tol("mass", 1e-6);
    const double tol_semi = ctx.tol("semigroup", 1e-5);
    const double tol_duh = ctx.tol("duhamel", 1e-5);
    const double tol_env = ctx.tol("envelope_factor", 2.0);
    const double tol_st = ctx.tol("short_time", 1e-4);
    if (semigroup.size() != 2) throw ConfigInvalid("params.semigroup_times", "expected two times");
    if (N < 0) throw ConfigInvalid("params.N", "must be nonnegative");
    ctx.seal();

    const Grid g = ctx.grid();
    const auto& ts = ctx.time_grid;
    for (const Case& c : cs) {
        PerturbationSpec spec;
        spec.f = c.f;
        if (c.has_kernel) {
            const double a = c.amplitude, w2 = c.width2, sup = c.support;
            spec.k_kernel = FiberKernel::invariant(g, [a, w2, sup](double x, double y) {
                const double r2 = x * x + y * y;
                return cplx(a * std::exp(-r2 / w2) * bump_profile(std::sqrt(r2), sup), 0.0);
            });
        }
        const HeatSeriesState st = levi_series(spec, CutoffSpec{}, N, ts, g);
        Json sec = {{"f", c.f}, {"kernel", c.has_kernel}, {"levi_terms", st.terms}, {"heat_residual", st.heat_residual}};
        const double k_mass = c.has_kernel ? kernel_mass(*spec.k_kernel) : 0.0;

        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double t = ts[i];
            const FiberKernel& q = st.kernels[i];
            const std::string tag = c.name + ".t" + std::to_string(i);
            Json ts_sec = {{"t", t}};
            if (wants("closed_form")) {
                double rel;
                if (c.has_kernel) {
                    const FiberKernel ref = heat_closed_form(spec, t, g);
                    rel = sup_diff(q, ref) / sup_abs(ref);
                } else {
                    double m = 0.0, pk = 0.0;
                    for (int a = 0; a < g.n; ++a)
                        for (int b = 0; b < g.n; ++b) {
                            const double ex = std::exp(-c.f * t) * gaussian_q(g.radius(a, b), t);
                            m = std::max(m, std::abs(q.samples[g.index(a, b)] - ex));
                            pk = std::max(pk, ex);
                        }
                    rel = m / pk;
                }
                ts_sec["closed_form_relative"] = rel;
                const bool plain = c.f == 0.0 && !c.has_kernel;
                ctx.results.check(tag + ".closed_form", rel, "<=", plain ? tol_cf : tol_cf_pot);
            }
            if (wants("mass")) {
                const double expected = std::exp(-t * (c.f + k_mass));
                const double err = std::abs(kernel_mass(q) - expected);
                ts_sec["mass_error"] = err;
                ctx.results.check(tag + ".mass", err, "<=", tol_mass);
            }
            if (wants("duhamel")) {
                DuhamelOptions dopt;
                dopt.cells = duhamel_cells;
                const DuhamelResult d = duhamel_series(spec, t, g, dopt);
                const double diff = sup_diff(q, d.kernel);
                std::vector<double> rn, qn;
                for (const auto& v : st.residual_norms) rn.push_back(v[i]);
                for (const auto& v : st.term_norms) qn.push_back(v[i]);
                const FactorialEnvelope er = fit_factorial_envelope(rn, t, 1);
                const FactorialEnvelope eq = fit_factorial_envelope(qn, t, 0);
                ts_sec["duhamel"] = {{"sup_difference", diff},
                                     {"terms", d.terms},
                                     {"romberg_change", d.romberg_change},
                                     {"residual_envelope", {{"log_c", er.log_c}, {"log_m", er.log_m},
                                                            {"max_log_ratio", er.max_log_ratio}, {"points", er.points}}},
                                     {"term_envelope", {{"log_c", eq.log_c}, {"log_m", eq.log_m},
                                                        {"max_log_ratio", eq.max_log_ratio}, {"points", eq.points}}}};
                ctx.results.check(tag + ".duhamel", diff, "<=", tol_duh);
                ctx.results.check(tag + ".residual_envelope", std::exp(er.max_log_ratio), "<=", tol_env);
                ctx.results.check(tag + ".term_envelope", std::exp(eq.max_log_ratio), "<=", tol_env);
                CsvTable norms{c.name + "_t" + std::to_string(i) + "_norms", {"k", "residual_norm", "term_norm"}, {}};
                for (std::size_t k = 0; k < rn.size(); ++k) norms.add({static_cast<double>(k + 1), rn[k], qn[k]});
                ctx.results.tables.push_back(std::move(norms));
            }
            if (wants("decay")) {
                for (double lam : lambdas) {
                    const DecayCertificate dc = offdiag_decay_check(q, lam);
                    const std::string key = "lambda_" + format_number(lam);
                    ts_sec["decay"][key] = {{"pass", dc.pass},          {"c", dc.c},
                                            {"outer_slope", dc.outer_slope}, {"d_peak", dc.d_peak},
                                            {"shells", dc.shells}};
                    ctx.results.check(tag + ".decay_" + key, dc.pass ? 1.0 : 0.0, "==", 1.0);
                }
            }
            sec["times"].push_back(ts_sec);
            ctx.results.tables.push_back(heat_profile(c.name + "_t" + std::to_string(i), q, env_lambda));
        }

        if (wants("semigroup")) {
            const double a = semigroup[0], b = semigroup[1];
            const HeatSeriesState s2 = levi_series(spec, CutoffSpec{}, N, {a, b, a + b}, g);
            const FiberKernel ab = convolve(s2.kernels[0], s2.kernels[1]);
            const double rel = sup_diff(ab, s2.kernels[2]) / sup_abs(s2.kernels[2]);
            sec["semigroup"] = {{"times", {a, b}}, {"relative_error", rel}};
            ctx.results.check(c.name + ".semigroup", rel, "<=", tol_semi);
        }

        if (wants("short_time")) {
            // Diagonal values on the time grid, fitted as 4 pi t Q(t) = Q_0 + Q_1 t + ...
            auto diag = [&](double f) {
                PerturbationSpec sp = spec;
                sp.f = f;
                const HeatSeriesState s = levi_series(sp, CutoffSpec{}, N, ts, g);
                std::vector<double> v;
                for (const auto& k : s.kernels) v.push_back(k.samples[g.center()].real());
                return v;
            };
            const ShortTimeFit fit = short_time_fit(ts, diag(c.f), fit_degree);
            // Spin module: D^2 = Delta + m^2 + (c/2) Gamma, so the graded blocks carry m^2 +- c/2.
            const std::vector<double> plus = diag(mass2 + 0.5 * c.f), minus = diag(mass2 - 0.5 * c.f);
            std::vector<double> str(ts.size());
            for (std::size_t i = 0; i < ts.size(); ++i) str[i] = plus[i] - minus[i];
            const ShortTimeFit sfit = short_time_fit(ts, str, fit_degree);
            const CliffordModuleSpec cl = CliffordModuleSpec::spin_module();
            const std::vector<Mat2> fes =
                twisting_curvature({c.f * Mat2::Identity()}, Eigen::Matrix2d::Zero(), cl);
            const double pairing = -0.5 * fes[0].trace().real();
            const GradedForm ah = a_hat(CurvatureForms{});
            sec["short_time"] = {{"q0", fit.coeffs.at(0)},
                                 {"q1", fit.coeffs.at(1)},
                                 {"fit_residual", fit.residual},
                                 {"supertrace_q0", sfit.coeffs.at(0)},
                                 {"supertrace_q1", sfit.coeffs.at(1)},
                                 {"twisting_pairing", pairing},
                                 {"a_hat_degree2", ah.deg2}};
            ctx.results.check(c.name + ".q1", std::abs(fit.coeffs.at(1) + c.f), "<=", tol_st);
            ctx.results.check(c.name + ".supertrace_q1", std::abs(sfit.coeffs.at(1) - pairing), "<=", tol_st);
            ctx.results.check(c.name + ".a_hat_degree2", std::abs(ah.deg2), "<=", tol_st);
            CsvTable t{c.name + "_short_time", {"t", "diagonal", "supertrace"}, {}};
            const std::vector<double> d0 = diag(c.f);
            for (std::size_t i = 0; i < ts.size(); ++i) t.add({ts[i], d0[i], str[i]});
            ctx.results.tables.push_back(std::move(t));
        }
        ctx.results.sections[c.name] = sec;
    }
}

// --- renorm ------------------------------------------------------------------------------------

struct TestFunction {
    std::string name;
    DerivativeFn d;  // d(0, x) is the function itself
};

// Derivatives of Re / Im of exp(s x) for complex s.
DerivativeFn complex_exponential(cplx s, bool imag) {
    return [s, imag](int m, double x) {
        const cplx v = std::pow(s, m) * std::exp(s * x);
        return imag ? v.imag() : v.real();
    };
}

std::vector<TestFunction> renorm_test_functions() {
    std::vector<TestFunction> fs;
    fs.push_back({"exp", complex_exponential(-1.0, false)});
    fs.push_back({"exp_2", complex_exponential(-2.0, false)});
    fs.push_back({"exp_half", complex_exponential(-0.5, false)});
    fs.push_back({"x_exp", [](int m, double x) { return (m % 2 ? -1.0 : 1.0) * (x - m) * std::exp(-x); }});
    fs.push_back({"x2_exp", [](int m, double x) {
                      return (m % 2 ? -1.0 : 1.0) * (x * x - 2.0 * m * x + m * (m - 1.0)) * std::exp(-x);
                  }});
    fs.push_back({"exp_cos", complex_exponential({-1.0, 1.0}, false)});
    fs.push_back({"exp_sin", complex_exponential({-1.0, 1.0}, true)});
    fs.push_back({"rational_5", [](int m, double x) {
                      double c = 1.0;
                      for (int j = 0; j < m; ++j) c *= -(5.0 + j);
                      return c * std::pow(1.0 + x, -5.0 - m);
                  }});
    fs.push_back({"gaussian", [](int m, double x) {
                      // (-1)^m H_m(x) exp(-x^2), physicists' Hermite recurrence.
                      double h0 = 1.0, h1 = 2.0 * x;
                      if (m == 0) return std::exp(-x * x);
                      for (int j = 1; j < m; ++j) {
                          const double h2 = 2.0 * x * h1 - 2.0 * j * h0;
                          h0 = h1;
                          h1 = h2;
                      }
                      return (m % 2 ? -1.0 : 1.0) * h1 * std::exp(-x * x);
                  }});
    fs.push_back({"exp2_cos3", complex_exponential({-2.0, 3.0}, false)});
    return fs;
}

void run_renorm(Context& ctx) {
    auto& p = ctx.params;
    ctx.use_ladder(geometric_ladder(8.0, 1024.0, 15));
    const int k = p.integer("k", 3);
    const std::vector<std::string> names = p.texts(
        "functions", {"exp", "exp_2", "exp_half", "x_exp", "x2_exp", "exp_cos", "exp_sin", "rational_5", "gaussian",
                      "exp2_cos3"});
    const double fit_residual = p.number("max_fit_residual", 1e-9);
    const double target = p.number("exp_target", 1.5 + 0.5 * kEulerGamma);
    const bool round_area = p.flag("round_area", true);
    const int angular = p.integer("angular_nodes", 128);
    const double tol_agree = ctx.tol("agreement", 1e-4);
    const double tol_target = ctx.tol("target", 1e-4);
    const double tol_area = ctx.tol("round_area", 1e-6);
    if (k < 1) throw ConfigInvalid("params.k", "must be positive");
    const std::vector<TestFunction> all = renorm_test_functions();
    std::vector<TestFunction> fs;
    for (const auto& n : names) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const TestFunction& f) { return f.name == n; });
        if (it == all.end()) throw ConfigInvalid("params.functions", "unknown test function " + n);
        fs.push_back(*it);
    }
    ctx.seal();

    CsvTable summary{"renorm_summary", {"function", "ladder_fit", "formula", "difference", "fit_residual"}, {}};
    CsvTable ladder{"renorm_ladder", {"function", "r0", "cutoff_integral"}, {}};
    for (const auto& f : fs) {
        const DerivativeFn d = f.d;
        const RenormalizedValue v = cutoff_expand([d](double x) { return d(0, x); }, k, ctx.ladder, fit_residual);
        const double formula = renorm_constant_formula(d, k);
        const double diff = std::abs(v.finite_part - formula);
        ctx.results.sections["functions"][f.name] = {{"ladder_fit", v.finite_part},
                                                     {"formula", formula},
                                                     {"log_coeff", v.log_coeff},
                                                     {"power_coeffs", v.power_coeffs},
                                                     {"fit_residual", v.fit_residual},
                                                     {"tail_terms", v.tail_terms}};
        ctx.results.check(check_name(f.name, "fit_vs_formula"), diff, "<=", tol_agree);
        summary.rows.push_back(
            {f.name, format_number(v.finite_part), format_number(formula), format_number(diff), format_number(v.fit_residual)});
        for (std::size_t j = 0; j < v.ladder.size(); ++j)
            ladder.rows.push_back({f.name, format_number(v.ladder[j]), format_number(v.values[j])});
        if (f.name == "exp" && k == 3) {
            // Closed form of the incomplete gamma expansion: constant term psi(3) / 2.
            const double oracle = 0.75 - 0.5 * kEulerGamma;
            const double uncorrected = renorm_constant_formula_uncorrected(d, k);
            ctx.results.sections["exp_k3"] = {{"ladder_fit", v.finite_part},
                                              {"incomplete_gamma_oracle", oracle},
                                              {"formula_uncorrected", uncorrected},
                                              {"target", target}};
            ctx.results.check("exp_k3.oracle", std::abs(v.finite_part - oracle), "<=", tol_agree);
            ctx.results.check("exp_k3.target", std::abs(v.finite_part - target), "<=", tol_target);
        }
    }
    ctx.results.tables.push_back(std::move(summary));
    ctx.results.tables.push_back(std::move(ladder));

    if (round_area) {
        RenormOptions ro;
        ro.ladder = ctx.ladder;
        ro.angular_nodes = angular;
        ro.max_residual = fit_residual;
        const RenormalizedValue v = renormalized_integral(round_density([](const ChartPoint&) { return 1.0; }), ro);
        ctx.results.sections["round_area"] = {
            {"value", v.finite_part}, {"log_coeff", v.log_coeff}, {"fit_residual", v.fit_residual}};
        ctx.results.check("round_area", std::abs(v.finite_part - kPi), "<=", tol_area);
    }
}

// --- trace-defect ------------------------------------------------------------------------------

DottedGaussian dotted_spec(Params& p) {
    DottedGaussian d;
    d.a = complex_param(p, "a", d.a);
    d.s = p.number("s", d.s);
    d.b = complex_param(p, "b", d.b);
    d.sigma = p.number("sigma", d.sigma);
    return d;
}

Json default_defect_pairs() {
    auto g = [](double ax, double ay, double s, double bx, double by, double sigma) {
        return Json{{"a", {ax, ay}}, {"s", s}, {"b", {bx, by}}, {"sigma", sigma}};
    };
    return Json::array({
        {{"name", "pair_1"}, {"kind", "gaussian"}, {"f", g(0.3, 0.1, 0.6, 0.2, -0.1, 0.7)}, {"g", g(-0.1, 0.2, 0.8, -0.3, 0.2, 0.6)}},
        {{"name", "pair_2"}, {"kind", "gaussian"}, {"f", g(0.0, 0.0, 0.5, 0.0, 0.0, 0.5)}, {"g", g(0.2, 0.0, 0.7, 0.3, 0.0, 0.5)}},
        {{"name", "pair_3"}, {"kind", "gaussian"}, {"f", g(-0.2, 0.3, 0.9, 0.1, 0.4, 0.8)}, {"g", g(0.1, -0.1, 0.6, -0.2, -0.2, 0.7)}},
        {{"name", "pair_4"}, {"kind", "gaussian"}, {"f", g(0.5, 0.0, 1.0, 0.0, 0.5, 0.6)}, {"g", g(0.0, 0.4, 0.7, 0.4, 0.0, 0.9)}},
        {{"name", "equal_bump"}, {"kind", "bump"}, {"f", g(0.1, 0.1, 0.7, 0.2, 0.1, 0.6)}, {"g", g(0.1, 0.1, 0.7, 0.2, 0.1, 0.6)}},
    });
}

void run_trace_defect(Context& ctx) {
    auto& p = ctx.params;
    ctx.use_ladder(default_ladder());
    DefectOptions o;
    Params q = p.child("quadrature");
    o.radial_nodes = q.integer("radial_nodes", o.radial_nodes);
    o.panels_per_octave = q.integer("panels_per_octave", o.panels_per_octave);
    o.angular_nodes = q.integer("angular_nodes", o.angular_nodes);
    o.w_nodes = q.integer("w_nodes", o.w_nodes);
    o.w_extent = q.number("w_extent", o.w_extent);
    o.rho_min = q.number("rho_min", o.rho_min);
    o.fd_step = q.number("fd_step", o.fd_step);
    o.rhs_nodes = q.integer("rhs_nodes", o.rhs_nodes);
    o.max_residual = q.number("max_fit_residual", o.max_residual);
    o.fit_order = q.integer("fit_order", o.fit_order);
    p.adopt("quadrature", q);
    const bool anti = p.flag("antisymmetry", true);
    const double floor = p.number("relative_floor", 1e-6);
    std::vector<Params> pairs = p.list("pairs", default_defect_pairs());
    struct Pair {
        std::string name;
        bool bump;
        DottedGaussian f, g;
    };
    std::vector<Pair> ps;
    for (auto& pp : pairs) {
        Pair x;
        x.name = pp.text("name", "pair");
        const std::string kind = pp.text("kind", "gaussian");
        if (kind != "gaussian" && kind != "bump") throw ConfigInvalid(pp.field("kind"), "expected gaussian or bump");
        x.bump = kind == "bump";
        Params fp = pp.child("f"), gp = pp.child("g");
        x.f = dotted_spec(fp);
        x.g = dotted_spec(gp);
        pp.adopt("f", fp);
        pp.adopt("g", gp);
        ps.push_back(x);
    }
    p.adopt_list("pairs", pairs);
    const double tol_agree = ctx.tol("agreement", 1e-3);
    const double tol_anti = ctx.tol("antisymmetry", 1e-6);
    ctx.seal();
    o.ladder = ctx.ladder;

    CsvTable summary{"trace_defect_summary", {"pair", "lhs", "rhs", "relative_gap", "antisymmetry"}, {}};
    CsvTable ladder{"trace_defect_ladder", {"pair", "r0", "cutoff_integral"}, {}};
    for (const Pair& x : ps) {
        const SectionOnG f = x.bump ? dotted_bump(x.f) : dotted_gaussian(x.f);
        const SectionOnG g = x.bump ? dotted_bump(x.g) : dotted_gaussian(x.g);
        const DefectLhs lhs = trace_defect_lhs(f, g, o);
        const double rhs = trace_defect_rhs(f, g, o);
        const double gap = std::abs(lhs.finite_part - rhs) / std::max(std::abs(rhs), floor);
        Json sec = {{"lhs", lhs.finite_part},
                    {"rhs", rhs},
                    {"relative_gap", gap},
                    {"log_coeff", lhs.fit.log_coeff},
                    {"fit_residual", lhs.fit.fit_residual},
                    {"tail_terms", lhs.fit.tail_terms}};
        ctx.results.check(check_name(x.name, "relative_gap"), gap, "<=", tol_agree);
        double asym = 0.0;
        if (anti) {
            const bool same = x.f.a == x.g.a && x.f.s == x.g.s && x.f.b == x.g.b && x.f.sigma == x.g.sigma;
            // Swapping identical sections reproduces the same integrals.
            const double lhs_swap = same ? lhs.finite_part : trace_defect_lhs(g, f, o).finite_part;
            const double rhs_swap = same ? rhs : trace_defect_rhs(g, f, o);
            asym = std::max(std::abs(lhs.finite_part + lhs_swap), std::abs(rhs + rhs_swap));
            sec["lhs_swapped"] = lhs_swap;
            sec["rhs_swapped"] = rhs_swap;
            sec["antisymmetry"] = asym;
            ctx.results.check(check_name(x.name, "antisymmetry"), asym, "<=", tol_anti);
        }
        ctx.results.sections[x.name] = sec;
        summary.rows.push_back({x.name, format_number(lhs.finite_part), format_number(rhs), format_number(gap),
                                format_number(asym)});
        for (std::size_t j = 0; j < lhs.fit.ladder.size(); ++j)
            ladder.rows.push_back({x.name, format_number(lhs.fit.ladder[j]), format_number(lhs.fit.values[j])});
    }
    ctx.results.tables.push_back(std::move(summary));
    ctx.results.tables.push_back(std::move(ladder));
}

// --- index -------------------------------------------------------------------------------------

void run_index(Context& ctx) {
    auto& p = ctx.params;
    DiracSpec spec;
    spec.mass = p.number("mass", spec.mass);
    spec.c0 = p.number("c0", spec.c0);
    EtaOptions eo;
    Params e = p.child("eta");
    eo.t_min = e.number("t_min", eo.t_min);
    eo.t_max = e.number("t_max", eo.t_max);
    eo.nodes_per_decade = e.integer("nodes_per_decade", eo.nodes_per_decade);
    eo.short_ladder = e.integer("short_ladder", eo.short_ladder);
    eo.fit_degree = e.integer("fit_degree", eo.fit_degree);
    eo.plateau_drift = e.number("plateau_drift", eo.plateau_drift);
    eo.renorm.angular_nodes = e.integer("angular_nodes", eo.renorm.angular_nodes);
    eo.renorm.max_residual = e.number("max_fit_residual", eo.renorm.max_residual);
    p.adopt("eta", e);
    const int plot_points = p.integer("plot_points", 25);
    ctx.use_ladder(eo.renorm.ladder);
    const double tol_plateau = ctx.tol("plateau", 0.05);
    ctx.seal();
    eo.renorm.ladder = ctx.ladder;

    const IndexReport r = mckean_singer_index(spec, eo);
    const EtaResult& d = r.eta_detail;
    ctx.results.sections["index"] = {{"geometric", r.geometric},
                                     {"eta", r.eta},
                                     {"total", r.total},
                                     {"plateau", r.plateau},
                                     {"error_bar", r.error_bar},
                                     {"consistency_gap", r.consistency_gap},
                                     {"integer_gap", r.integer_gap},
                                     {"short_time_gap", r.short_time_gap},
                                     {"consistent", r.consistent}};
    ctx.results.sections["eta"] = {{"quadrature_error", d.quadrature_error},
                                   {"short_tail", d.short_tail},
                                   {"short_tail_error", d.short_tail_error},
                                   {"long_tail", d.long_tail},
                                   {"long_tail_error", d.long_tail_error},
                                   {"short_time_limit", d.short_time_limit},
                                   {"derivative_check", d.derivative_check},
                                   {"evaluations", d.evaluations}};
    ctx.results.check("index.consistency", r.consistency_gap, "<=", r.error_bar);
    ctx.results.check("index.plateau", std::abs(r.plateau), "<=", tol_plateau);

    CsvTable t{"index_supertrace", {"t", "renormalized_supertrace"}, {}};
    for (int i = 0; i < plot_points; ++i) {
        const double tt = eo.t_min * std::pow(eo.t_max / eo.t_min, plot_points > 1 ? double(i) / (plot_points - 1) : 0.0);
        t.add({tt, heat_supertrace(spec, tt, eo.renorm)});
    }
    ctx.results.tables.push_back(std::move(t));
}

}  // namespace

// --- config parsing ----------------------------------------------------------------------------

ExperimentConfig parse_config(const Json& doc, const ConfigOverrides& ov) {
    if (!doc.is_object()) throw ConfigInvalid("config", "expected an object");
    static const std::set<std::string> known{"experiment", "grid", "time_grid", "ladder",
                                             "tolerances", "seed", "output_dir", "params"};
    for (const auto& [k, v] : doc.items())
        if (!known.count(k)) throw ConfigInvalid(k, "unknown key");
    auto numbers = [&](const std::string& key) {
        std::vector<double> out;
        if (!doc.contains(key)) return out;
        const Json& a = doc.at(key);
        if (!a.is_array()) throw ConfigInvalid(key, "expected an array of numbers");
        for (const auto& e : a) {
            if (!e.is_number()) throw ConfigInvalid(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    };
    ExperimentConfig c;
    if (doc.contains("experiment")) {
        if (!doc.at("experiment").is_string()) throw ConfigInvalid("experiment", "expected a string");
        c.experiment = doc.at("experiment").get<std::string>();
    }
    if (ov.experiment) {
        if (!c.experiment.empty() && c.experiment != *ov.experiment)
            throw ConfigInvalid("experiment", "config names " + c.experiment + " but " + *ov.experiment + " was requested");
        c.experiment = *ov.experiment;
    }
    if (doc.contains("grid")) {
        const Json& g = doc.at("grid");
        if (!g.is_object()) throw ConfigInvalid("grid", "expected an object");
        for (const auto& [k, v] : g.items()) {
            if (k != "extent" && k != "spacing") throw ConfigInvalid("grid." + k, "unknown key");
            if (!v.is_number()) throw ConfigInvalid("grid." + k, "expected a number");
        }
        if (g.contains("extent")) c.extent = g.at("extent").get<double>();
        if (g.contains("spacing")) c.spacing = g.at("spacing").get<double>();
    }
    c.time_grid = numbers("time_grid");
    c.ladder = numbers("ladder");
    if (doc.contains("tolerances")) {
        const Json& t = doc.at("tolerances");
        if (!t.is_object()) throw ConfigInvalid("tolerances", "expected an object");
        for (const auto& [k, v] : t.items()) {
            if (!v.is_number()) throw ConfigInvalid("tolerances." + k, "expected a number");
            c.tolerances[k] = v.get<double>();
        }
    }
    if (doc.contains("seed")) {
        const Json& s = doc.at("seed");
        if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigInvalid("seed", "expected a nonnegative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (ov.seed) c.seed = *ov.seed;
    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string()) throw ConfigInvalid("output_dir", "expected a string");
        c.output_dir = doc.at("output_dir").get<std::string>();
    }
    if (ov.output_dir) c.output_dir = *ov.output_dir;
    if (doc.contains("params")) {
        if (!doc.at("params").is_object()) throw ConfigInvalid("params", "expected an object");
        c.params = doc.at("params");
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("config", "cannot open " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigInvalid("config", std::string("parse error: ") + e.what());
    }
    return parse_config(doc, overrides);
}

void validate(const ExperimentConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ConfigInvalid("experiment", "unknown experiment '" + c.experiment + "'");
    if (!(c.extent > 0.0) || !std::isfinite(c.extent)) throw ConfigInvalid("grid.extent", "must be positive");
    if (!(c.spacing > 0.0)) throw ConfigInvalid("grid.spacing", "must be positive");
    if (!(c.spacing < c.extent / 16.0)) throw ConfigInvalid("grid.spacing", "must be below extent / 16");
    for (const auto& [k, v] : c.tolerances)
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigInvalid("tolerances." + k, "must be positive");
    for (double t : c.time_grid)
        if (!(t > 0.0) || !std::isfinite(t)) throw ConfigInvalid("time_grid", "times must be positive");
    if (!c.ladder.empty()) {
        if (c.ladder.size() < 6) throw ConfigInvalid("ladder", "needs at least six rungs");
        for (std::size_t i = 0; i < c.ladder.size(); ++i)
            if (!(c.ladder[i] > 0.0) || (i > 0 && !(c.ladder[i] > c.ladder[i - 1])))
                throw ConfigInvalid("ladder", "rungs must be positive and strictly increasing");
    }
    if (c.output_dir.empty()) throw ConfigInvalid("output_dir", "must not be empty");
}

// --- reports -----------------------------------------------------------------------------------

Json report_document(const Results& r) {
    Json doc = Json::object();
    doc["schema"] = kReportSchema;
    doc["version"] = kReportVersion;
    doc["experiment"] = r.experiment;
    doc["config"] = r.config;
    doc["sections"] = r.sections.is_null() ? Json::object() : r.sections;
    Json checks = Json::object();
    for (const auto& [name, c] : r.checks)
        checks[name] = {{"value", c.value}, {"threshold", c.threshold}, {"relation", c.relation}, {"pass", c.pass}};
    doc["checks"] = checks;
    doc["pass"] = r.pass();
    Json tables = Json::array();
    for (const auto& t : r.tables) tables.push_back(t.name + ".csv");
    doc["tables"] = tables;
    return doc;
}

std::string render_report(const Results& r) { return report_document(r).dump(2) + "\n"; }

namespace {

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IOError", "emit_report", "cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw Error("IOError", "emit_report", "write failed for " + path.string());
}

}  // namespace

std::vector<std::string> emit_report(const Results& r, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("IOError", "emit_report", "cannot create " + dir + ": " + ec.message());
    std::vector<std::string> written;
    const fs::path report = fs::path(dir) / "report.json";
    write_file(report, render_report(r));
    written.push_back(report.string());
    for (const auto& t : r.tables) {
        std::string body;
        for (std::size_t i = 0; i < t.header.size(); ++i) body += (i ? "," : "") + csv_cell(t.header[i]);
        body += "\n";
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) body += (i ? "," : "") + csv_cell(row[i]);
            body += "\n";
        }
        const fs::path path = fs::path(dir) / (t.name + ".csv");
        write_file(path, body);
        written.push_back(path.string());
    }
    return written;
}

Results run_experiment(const ExperimentConfig& config) {
    validate(config);
    Context ctx(config);
    const std::string& e = config.experiment;
    if (e == "groupoid-check") run_groupoid(ctx);
    else if (e == "fredholm") run_fredholm(ctx);
    else if (e == "heat") run_heat(ctx);
    else if (e == "renorm") run_renorm(ctx);
    else if (e == "trace-defect") run_trace_defect(ctx);
    else run_index(ctx);
    return std::move(ctx.results);
}

int run(const ExperimentConfig& config) {
    const Results r = run_experiment(config);
    emit_report(r, config.output_dir);
    return r.pass() ? 0 : 1;
}

// --- oracle ------------------------------------------------------------------------------------

RadialGreenOracle::RadialGreenOracle(double c0, double c2, double r_inner, double r_outer, int nodes) {
    if (!(c0 > 0.0) || !(c2 > 0.0)) throw Error("InvalidSymbol", "RadialGreenOracle", "needs c0 > 0 and c2 > 0");
    if (nodes < 3 || !(r_inner > 0.0) || !(r_outer > r_inner))
        throw Error("GridInvalid", "RadialGreenOracle", "needs 0 < r_inner < r_outer and three nodes");
    // In s = log r the equation reads G_ss = k^2 r^2 G; the flux r G' = -1 / (2 pi c2) holds at
    // the inner edge and the decaying asymptotics r G' = -(k r + 1/2) G at the outer edge.
    const double k2 = c0 / c2, k = std::sqrt(k2);
    s0_ = std::log(r_inner);
    ds_ = (std::log(r_outer) - s0_) / (nodes - 1);
    const double flux = -1.0 / (2.0 * kPi * c2);
    const double alpha = k * r_outer + 0.5;
    const double h2 = ds_ * ds_;
    std::vector<double> lo(nodes, 0.0), di(nodes, 0.0), up(nodes, 0.0), rhs(nodes, 0.0);
    for (int i = 0; i < nodes; ++i) {
        const double r = std::exp(s0_ + i * ds_);
        lo[i] = 1.0;
        up[i] = 1.0;
        di[i] = -2.0 - h2 * k2 * r * r;
    }
    // Ghost nodes: G_{-1} = G_1 - 2 ds flux, G_n = G_{n-2} - 2 ds alpha G_{n-1}.
    up[0] = 2.0;
    rhs[0] = 2.0 * ds_ * flux;
    lo[nodes - 1] = 2.0;
    di[nodes - 1] -= 2.0 * ds_ * alpha;
    // Thomas algorithm.
    for (int i = 1; i < nodes; ++i) {
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    values_.assign(nodes, 0.0);
    values_[nodes - 1] = rhs[nodes - 1] / di[nodes - 1];
    for (int i = nodes - 2; i >= 0; --i) values_[i] = (rhs[i] - up[i] * values_[i + 1]) / di[i];
}

double RadialGreenOracle::operator()(double r) const {
    const double x = (std::log(r) - s0_) / ds_;
    const int n = static_cast<int>(values_.size());
    if (!(x >= 0.0) || x > n - 1) throw Error("OutOfRange", "RadialGreenOracle", "radius outside the solved range");
    const int i = std::min(n - 2, static_cast<int>(x));
    const double f = x - i;
    return (1.0 - f) * values_[i] + f * values_[i + 1];
}

}  // namespace bruhatlab
