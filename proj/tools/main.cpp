#include "bruhatlab/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace bruhatlab;
    CLI::App app{"Numerical experiments on the Bruhat sphere groupoid"};
    std::string experiment, config_path, out_dir;
    std::uint64_t seed = 0;
    app.add_option("experiment", experiment, "Experiment to run")
        ->required()
        ->check(CLI::IsMember(experiment_names()));
    app.add_option("--config", config_path, "JSON configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory overriding the config");
    CLI11_PARSE(app, argc, argv);

    try {
        ConfigOverrides ov;
        ov.experiment = experiment;
        if (*seed_opt) ov.seed = seed;
        if (*out_opt) ov.output_dir = out_dir;
        const ExperimentConfig config = load_config(config_path, ov);
        const Results results = run_experiment(config);
        emit_report(results, config.output_dir);
        for (const auto& [name, c] : results.checks)
            std::cout << (c.pass ? "PASS " : "FAIL ") << name << "  " << format_number(c.value) << " " << c.relation
                      << " " << format_number(c.threshold) << "\n";
        std::cout << (results.pass() ? "all checks passed" : "some checks failed") << "; report in "
                  << config.output_dir << "\n";
        return results.pass() ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
