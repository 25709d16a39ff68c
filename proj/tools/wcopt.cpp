#include <wcopt/harness/validate.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr const char* kVersion = "0.1.0";

// Every error (bad config, unreadable input, unwritable output) exits with 1;
// 2 is reserved for checks that ran and failed.
int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace wcopt::harness;
    CLI::App app{"weakly convex stochastic subgradient experiments"};
    app.require_subcommand(1);

    std::string config_path, check;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "run an experiment sweep");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* presets = app.add_subcommand("presets", "list built-in presets");

    auto* val = app.add_subcommand("validate", "run a validation check");
    val->add_option("--check", check, "lemma1 | clip | batch-moment")
        ->required()
        ->check(CLI::IsMember({"lemma1", "clip", "batch-moment"}));
    val->add_option("--config", config_path, "config file")->required();
    val->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    auto* ver = app.add_subcommand("version", "print the version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ver) {
            std::cout << "wcopt " << kVersion << '\n';
            return 0;
        }
        if (*presets) {
            for (const auto& n : list_presets()) std::cout << n << '\n';
            return 0;
        }
        const ExperimentConfig cfg = load_config(config_path);
        if (*run) {
            const AggregateReport rep = run_experiment(cfg, jobs);
            for (const auto& r : rep.rows)
                std::cout << "T=" << r.T << " median=" << fmt(r.median) << " mean=" << fmt(r.mean)
                          << " diverged=" << r.diverged << '\n';
            if (rep.slope_median) std::cout << "slope_median=" << fmt(*rep.slope_median) << '\n';
            for (const auto& [name, ok] : rep.checks) std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
            for (const auto& w : rep.warnings) std::cout << "WARN " << w << '\n';
            std::cout << "wrote " << cfg.output << '\n';
            return rep.all_pass() ? 0 : 2;
        }
        const ValidationReport rep = run_validation(cfg, parse_check(check), jobs);
        long failed = 0;
        for (const auto& r : rep.rows) failed += !r.pass;
        std::cout << rep.rows.size() - failed << "/" << rep.rows.size() << " checks passed, report in " << cfg.output
                  << '\n';
        return failed == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        return report_error(e);
    }
}
