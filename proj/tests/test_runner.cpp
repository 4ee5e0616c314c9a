#include "doctest.h"

#include "bruhatlab/runner.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bruhatlab;

namespace {

double bessel_k0(double r) {
    const double h = 1e-3;
    double s = 0.5 * std::exp(-r);
    for (int i = 1; i < 20000; ++i) s += std::exp(-r * std::cosh(i * h));
    return s * h;
}

std::string config_error_field(const Json& doc) {
    try {
        validate(parse_config(doc));
    } catch (const ConfigInvalid& e) {
        return e.field();
    }
    return "";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config validation") {
    CHECK(config_error_field(Json{{"experiment", "groupoid-check"}}).empty());
    CHECK(config_error_field(Json{{"experiment", "nope"}}) == "experiment");
    CHECK(config_error_field(Json{{"experiment", "heat"}, {"grid", {{"extent", 4.0}, {"spacing", 0.25}}}}) == "grid.spacing");
    CHECK(config_error_field(Json{{"experiment", "heat"}, {"tolerances", {{"mass", -1.0}}}}) == "tolerances.mass");
    CHECK(config_error_field(Json{{"experiment", "heat"}, {"bogus", 1}}) == "bogus");
    CHECK(config_error_field(Json{{"experiment", "renorm"}, {"ladder", {1, 2, 3}}}) == "ladder");
    CHECK(config_error_field(Json{{"experiment", "heat"}, {"seed", -3}}) == "seed");

    ExperimentConfig c = parse_config(Json{{"experiment", "groupoid-check"}, {"params", {{"smaples", 10}}}});
    try {
        run_experiment(c);
        FAIL("unknown parameter accepted");
    } catch (const ConfigInvalid& e) {
        CHECK(e.field() == "params.smaples");
    }
    c = parse_config(Json{{"experiment", "groupoid-check"}, {"tolerances", {{"identiy", 1e-9}}}});
    CHECK_THROWS_AS(run_experiment(c), ConfigInvalid);

    ConfigOverrides ov;
    ov.seed = 7;
    ov.output_dir = "elsewhere";
    const ExperimentConfig o = parse_config(Json{{"experiment", "groupoid-check"}, {"seed", 3}}, ov);
    CHECK(o.seed == 7);
    CHECK(o.output_dir == "elsewhere");
    ov.experiment = "heat";
    CHECK_THROWS_AS(parse_config(Json{{"experiment", "groupoid-check"}}, ov), ConfigInvalid);
}

TEST_CASE("number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
    CsvTable t{"t", {"a", "b"}, {}};
    t.add({0.5, -2.0});
    CHECK(t.rows[0] == std::vector<std::string>{"0.5", "-2"});
}

TEST_CASE("empty results give a valid report") {
    Results r;
    r.experiment = "heat";
    const Json doc = report_document(r);
    CHECK(doc.at("schema") == kReportSchema);
    CHECK(doc.at("version") == kReportVersion);
    CHECK(doc.at("sections").empty());
    CHECK(doc.at("checks").empty());
    CHECK(Json::parse(render_report(r)) == doc);
}

TEST_CASE("reports are reproducible") {
    const Json doc{{"experiment", "groupoid-check"},
                   {"seed", 11},
                   {"params", {{"samples", 200}, {"bound_samples", 500}}}};
    const auto dir = std::filesystem::temp_directory_path() / "bruhatlab-test-runner";
    std::filesystem::remove_all(dir);
    const Results a = run_experiment(parse_config(doc));
    const Results b = run_experiment(parse_config(doc));
    CHECK(render_report(a) == render_report(b));
    const auto pa = emit_report(a, (dir / "a").string());
    const auto pb = emit_report(b, (dir / "b").string());
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(slurp(pa[i]) == slurp(pb[i]));
    CHECK(a.pass());

    // The resolved config records every default.
    const Json params = report_document(a).at("config").at("params");
    CHECK(params.contains("w_scale"));
    CHECK(params.contains("singular_fraction"));

    Json other = doc;
    other["seed"] = 12;
    CHECK(render_report(run_experiment(parse_config(other))).find("\"seed\": 12") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("heat tables carry the envelope columns") {
    const Json doc{{"experiment", "heat"},
                   {"grid", {{"extent", 4.0}, {"spacing", 0.1}}},
                   {"time_grid", {0.5}},
                   {"params", {{"checks", {"closed_form", "decay"}}, {"decay_lambdas", {2.0}}}}};
    const Results r = run_experiment(parse_config(doc));
    bool found = false;
    for (const CsvTable& t : r.tables)
        if (t.name.find("_t0") != std::string::npos) {
            found = true;
            CHECK(t.header == std::vector<std::string>{"d", "value", "envelope"});
            CHECK(!t.rows.empty());
        }
    CHECK(found);
    CHECK(r.pass());
}

TEST_CASE("radial green oracle") {
    const RadialGreenOracle g(1.0, 1.0);
    for (double r : {0.25, 1.0, 3.0, 8.0}) {
        const double ref = bessel_k0(r) / (2.0 * kPi);
        CHECK(g(r) == doctest::Approx(ref).epsilon(1e-4));
    }
    // c0 + c2 Delta with c2 = 2: G(r) = K_0(r sqrt(c0 / c2)) / (2 pi c2).
    const RadialGreenOracle h(0.5, 2.0);
    CHECK(h(2.0) == doctest::Approx(bessel_k0(1.0) / (4.0 * kPi)).epsilon(1e-4));
    CHECK_THROWS_AS(RadialGreenOracle(0.0, 1.0), Error);
}
