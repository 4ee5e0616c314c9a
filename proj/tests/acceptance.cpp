#include "bruhatlab/runner.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace bruhatlab;

namespace {

struct Criterion {
    int id;
    const char* title;
};

const Criterion kCriteria[] = {
    {1, "groupoid axioms"},
    {2, "multiplication differential bound"},
    {3, "heat kernel exactness"},
    {4, "Levi parametrix against Duhamel"},
    {5, "off-diagonal exponential decay"},
    {6, "inverse kernel on the singular fiber"},
    {7, "Fredholm verdicts"},
    {8, "renormalized integral"},
    {9, "trace defect formula"},
    {10, "short-time supertrace asymptotics"},
    {11, "McKean-Singer consistency"},
};

fs::path find_config(const fs::path& dir, int id) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "criterion_%02d_", id);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".json") return e.path();
    }
    return {};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite: one line per criterion"};
    std::string configs, out = (fs::temp_directory_path() / "bruhatlab-acceptance").string();
    std::vector<int> only;
    app.add_option("--configs", configs, "Directory holding criterion_NN_*.json")->required()->check(CLI::ExistingDirectory);
    app.add_option("--out", out, "Directory for per-criterion reports");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    int failed = 0;
    for (const Criterion& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::string verdict, detail;
        try {
            const fs::path path = find_config(configs, c.id);
            if (path.empty()) throw Error("MissingConfig", "acceptance", "no config for criterion " + std::to_string(c.id));
            ConfigOverrides ov;
            ov.output_dir = (fs::path(out) / path.stem()).string();
            const ExperimentConfig config = load_config(path.string(), ov);
            const Results r = run_experiment(config);
            emit_report(r, config.output_dir);
            verdict = r.pass() ? "PASS" : "FAIL";
            int shown = 0;
            for (const auto& [name, ch] : r.checks) {
                if (ch.pass && shown >= 3) continue;
                detail += "\n    " + std::string(ch.pass ? "ok   " : "FAIL ") + name + " = " + format_number(ch.value) + " " +
                          ch.relation + " " + format_number(ch.threshold);
                ++shown;
            }
            if (r.checks.size() > static_cast<std::size_t>(shown)) detail += "\n    (" + std::to_string(r.checks.size()) + " checks in total)";
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = std::string("\n    error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (verdict != "PASS") ++failed;
        std::cout << "criterion " << c.id << " (" << c.title << "): " << verdict << "  [" << static_cast<int>(secs + 0.5)
                  << " s]" << detail << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
