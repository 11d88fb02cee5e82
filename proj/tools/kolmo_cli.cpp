#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"
#include "kolmo/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Controlled Kolmogorov equations: Galerkin solver, optimizer and Monte Carlo verifier", "kolmo"};
    app.set_version_flag("--version", kolmo::kVersion);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides verify.seed)");
    app.add_option("--threads", threads, "worker thread cap (default: all cores)")->check(CLI::PositiveNumber);

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"forward", "solve the controlled Kolmogorov equation"},
        {"adjoint", "solve the adjoint equation and report duality"},
        {"optimize", "minimize the cost over admissible feedback controls"},
        {"simulate", "Euler-Maruyama path ensemble and cost estimate"},
        {"verify", "Feynman-Kac z-scores and Girsanov weight report"},
        {"certify", "operator identity residuals and matrix export"},
        {"plotdata", "tidy long-format CSV for plotting"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
    app.require_subcommand(1, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    if (threads > 0) kolmo::set_thread_limit(threads);

    std::string output_dir = out_dir;
    try {
        kolmo::RunConfig cfg = kolmo::load_config(config_path);
        if (output_dir.empty()) output_dir = cfg.output_dir;
        kolmo::RunOverrides ov;
        if (*out_opt) ov.output_dir = out_dir;
        if (*seed_opt) ov.seed = seed;
        kolmo::run_command(sub, std::move(cfg), ov);
    } catch (const std::exception& e) {
        std::cerr << "kolmo " << sub << ": " << e.what() << '\n';
        return kolmo::report_failure(e, sub, output_dir);
    }
    return 0;
}
