#pragma once

#include "bruhatlab/common.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bruhatlab {

using Json = nlohmann::json;

constexpr int kReportVersion = 1;
constexpr const char* kReportSchema = "bruhatlab.report";

class ConfigInvalid : public Error {
public:
    ConfigInvalid(const std::string& field, const std::string& reason);
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    std::string experiment;
    double extent = 8.0;
    double spacing = 0.0625;
    std::vector<double> time_grid;
    std::vector<double> ladder;
    std::map<std::string, double> tolerances;
    std::uint64_t seed = 1;
    std::string output_dir = "bruhatlab-out";
    Json params = Json::object();
};

struct ConfigOverrides {
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
};

ExperimentConfig parse_config(const Json& doc, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});
void validate(const ExperimentConfig& config);

struct CsvTable {
    std::string name;  // file stem
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& row);
};

// Shortest round-trip decimal form with '.' as separator.
std::string format_number(double v);

struct Check {
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // "<=", ">=", "==" on value versus threshold
    bool pass = false;
};

struct Results {
    std::string experiment;
    Json config = Json::object();    // resolved configuration with every default filled in
    Json sections = Json::object();
    std::map<std::string, Check> checks;
    std::vector<CsvTable> tables;

    void check(const std::string& name, double value, const std::string& relation, double threshold);
    bool pass() const;
};

// Report document: schema, version, experiment, config, sections, checks, pass.
Json report_document(const Results& results);
std::string render_report(const Results& results);
// Writes report.json and one CSV per table into dir; returns the written paths.
std::vector<std::string> emit_report(const Results& results, const std::string& dir);

Results run_experiment(const ExperimentConfig& config);

// Runs and writes the report; returns 0 iff every check passes.
int run(const ExperimentConfig& config);

// Radial finite-difference Green's function of c0 + c2 Delta on the plane, evaluated at radius r.
class RadialGreenOracle {
public:
    RadialGreenOracle(double c0, double c2, double r_inner = 1e-4, double r_outer = 40.0, int nodes = 200000);
    double operator()(double r) const;

private:
    double s0_, ds_;
    std::vector<double> values_;
};

}  // namespace bruhatlab
