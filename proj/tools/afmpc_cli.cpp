// Command-line runner for the pendulum MPC experiments.
//
//   afmpc run --config <path> --controller {classical|afmpc} --out <csv> [--seed N]
//   afmpc compare --config <path> --out-dir <dir>
//   afmpc --print-defaults
//
// Exit codes: 0 success, 1 configuration error, 2 runtime divergence, 3 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "afmpc/errors.hpp"
#include "afmpc/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDiverged = 2, kIoError = 3 };

using afmpc::harness::ScenarioConfig;

ScenarioConfig load(const std::string& path) {
    return path.empty() ? ScenarioConfig{} : afmpc::harness::load_config(path);
}

void report_warnings(const afmpc::harness::RunResult& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
}

int finish(const afmpc::harness::RunResult& r, const char* name) {
    if (r.log.diverged) {
        std::cerr << name << ": closed loop diverged after " << r.log.records.size()
                  << " steps: " << r.log.failure << '\n';
        return kDiverged;
    }
    return kOk;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw afmpc::IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw afmpc::IoError("failed writing '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classical and adaptive fuzzy MPC on a rotational inverted pendulum"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "Print the full default configuration and exit");

    std::string run_config;
    std::string run_controller;
    std::string run_out;
    std::string run_snapshot;
    std::optional<std::uint64_t> run_seed;
    auto* run = app.add_subcommand("run", "Run one controller and write its trajectory CSV");
    run->add_option("--config", run_config, "Scenario file (key = value)");
    run->add_option("--controller", run_controller, "classical | afmpc")
        ->check(CLI::IsMember({"classical", "afmpc"}));
    run->add_option("--out", run_out, "Output CSV path")->required();
    run->add_option("--seed", run_seed, "Override sim.seed");
    run->add_option("--snapshot", run_snapshot, "Write the final fuzzy model (afmpc only)");

    std::string cmp_config;
    std::string cmp_dir;
    auto* compare = app.add_subcommand("compare", "Run both controllers and write CSVs plus report.txt");
    compare->add_option("--config", cmp_config, "Scenario file (key = value)");
    compare->add_option("--out-dir", cmp_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (print_defaults) {
            afmpc::harness::print_config(std::cout, ScenarioConfig{});
            return kOk;
        }
        if (run->parsed()) {
            ScenarioConfig config = load(run_config);
            if (!run_controller.empty()) {
                config.controller = afmpc::harness::parse_controller_kind(run_controller);
            }
            if (run_seed) config.seed = *run_seed;
            const auto result = afmpc::harness::run_scenario(config);
            report_warnings(result);
            afmpc::harness::export_csv(result.log, run_out, config.record_wall_clock);
            if (!run_snapshot.empty() && result.final_fuzzy_model) {
                std::ofstream snap(run_snapshot);
                if (!snap) throw afmpc::IoError("cannot open '" + run_snapshot + "' for writing");
                afmpc::fuzzy::write_snapshot(snap, *result.final_fuzzy_model);
            }
            const auto& m = result.metrics;
            std::cout << "rmse " << m.rmse << "  iae " << m.iae << "  steady_state_error "
                      << m.steady_state_error << "  mean_solve_ms " << m.mean_solve_time * 1e3 << '\n';
            return finish(result, afmpc::harness::to_string(config.controller));
        }
        if (compare->parsed()) {
            ScenarioConfig config = load(cmp_config);
            const std::filesystem::path dir(cmp_dir);
            std::error_code ec;
            std::filesystem::create_directories(dir, ec);
            if (ec) throw afmpc::IoError("cannot create '" + dir.string() + "': " + ec.message());

            config.controller = afmpc::harness::ControllerKind::kClassical;
            const auto classical = afmpc::harness::run_scenario(config);
            report_warnings(classical);
            afmpc::harness::export_csv(classical.log, (dir / "classical.csv").string(),
                                       config.record_wall_clock);

            config.controller = afmpc::harness::ControllerKind::kAfmpc;
            const auto adaptive = afmpc::harness::run_scenario(config);
            report_warnings(adaptive);
            afmpc::harness::export_csv(adaptive.log, (dir / "afmpc.csv").string(), config.record_wall_clock);

            const std::string report = afmpc::harness::compare_report(classical.metrics, adaptive.metrics);
            write_text(dir / "report.txt", report);
            std::cout << report;
            const int a = finish(classical, "classical");
            const int b = finish(adaptive, "afmpc");
            return a != kOk ? a : b;
        }
        std::cerr << app.help();
        return kConfigError;
    } catch (const afmpc::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kConfigError;
    } catch (const afmpc::IoError& e) {
        std::cerr << e.what() << '\n';
        return kIoError;
    } catch (const afmpc::DivergenceError& e) {
        std::cerr << e.what() << '\n';
        return kDiverged;
    } catch (const afmpc::Error& e) {
        // anything else the library rejects is a bad scenario
        std::cerr << e.what() << '\n';
        return kConfigError;
    }
}
