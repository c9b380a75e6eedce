// Scenario runner: reproducible experiments with CSV/JSON-lines emission.
//
// Exit codes: 0 all metrics pass, 1 any metric fails, 2 config or I/O error.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "vsense/experiments.hpp"

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, std::optional<std::string> format,
            std::optional<int> trials, bool quiet) {
    vsense::ScenarioConfig cfg;
    try {
        cfg = vsense::load_scenario(config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.output.path = *out_dir;
        if (format) cfg.output.format = *format;
        if (trials) cfg.mc_trials = *trials;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        auto rep = vsense::run_experiment(cfg);
        if (!quiet) {
            std::printf("%s seed=%llu (%s, %.0f ms)\n", rep.experiment.c_str(),
                        static_cast<unsigned long long>(rep.seed), rep.version.c_str(), rep.wall_ms);
            for (const auto& row : rep.rows)
                std::printf("  [%s] %-36s %.6g  (%s)\n", row.pass ? "PASS" : "FAIL",
                            row.name.c_str(), row.value, row.tolerance.c_str());
        }
        return rep.all_pass() ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vsense: virtualized-sensing simulation experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<int> trials;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "run a scenario config");
    run->add_option("config", config_path, "scenario config (JSON)")->required();
    run->add_option("--seed", seed, "override the master seed (u64)");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--format", format, "csv | json-lines")
        ->check(CLI::IsMember({"csv", "json-lines"}));
    run->add_option("--trials", trials, "override Monte-Carlo trial count");
    run->add_flag("--quiet", quiet, "suppress the per-metric summary");

    auto* validate = app.add_subcommand("validate", "parse and validate a config, then exit");
    validate->add_option("config", config_path, "scenario config (JSON)")->required();

    auto* list = app.add_subcommand("list-experiments", "list the named experiments");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, seed, out_dir, format, trials, quiet);
    if (validate->parsed()) {
        try {
            auto cfg = vsense::load_scenario(config_path);
            std::cout << vsense::serialize_scenario(cfg);
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    if (list->parsed()) {
        for (const auto& e : vsense::experiment_list())
            std::printf("%-4s %s\n", e.name.c_str(), e.description.c_str());
        return 0;
    }
    return 2;
}
