// Command-line front end: `run` executes a config, `validate` only checks it.

#include "supersol/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace cli = supersol::cli;

int main(int argc, char** argv) {
    CLI::App app{"Minimal supersolutions of convex BSDEs on Rademacher trees"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;

    auto* run = app.add_subcommand("run", "Run the command described by a config file");
    run->add_option("-c,--config", config_path, "Config file")->required();
    run->add_option("-o,--out", out_dir, "Output directory (overrides [output] dir)");
    run->add_option("-s,--seed", seed, "Seed override");
    run->add_option("-t,--tol", tol, "Solver tolerance override (eps_y and eps_z)");

    auto* validate = app.add_subcommand("validate", "Check a config file without running it");
    validate->add_option("-c,--config", config_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitConfigError;
    }

    cli::ParseResult parsed = cli::load_config(config_path);
    if (*validate) {
        for (const auto& d : parsed.diagnostics) std::cout << config_path << ": " << cli::to_string(d) << '\n';
        return parsed.ok() ? cli::kExitPass : cli::kExitConfigError;
    }
    if (!parsed.ok()) {
        for (const auto& d : parsed.diagnostics) std::cerr << config_path << ": " << cli::to_string(d) << '\n';
        return cli::kExitConfigError;
    }

    cli::ExperimentConfig config = parsed.config;
    if (seed) config.seed = *seed;
    if (tol) {
        if (!(*tol > 0.0)) {
            std::cerr << "--tol must be positive\n";
            return cli::kExitConfigError;
        }
        config.solver.eps_y = *tol;
        config.solver.eps_z = *tol;
    }
    if (!out_dir.empty()) config.output_dir = out_dir;

    const cli::RunResult result = cli::execute(config);
    if (!result.message.empty()) std::cerr << result.message << '\n';
    if (result.exit_code == cli::kExitSolverError || result.exit_code == cli::kExitConfigError) {
        return result.exit_code;
    }
    try {
        cli::write_outputs(result, config.output_dir);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return cli::kExitSolverError;
    }
    for (const auto& [name, content] : result.files) std::cout << config.output_dir << '/' << name << '\n';
    return result.exit_code;
}
