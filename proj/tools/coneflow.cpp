// Command-line front end; the subcommands live in coneflow/cli/commands.hpp.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coneflow/cli/commands.hpp"
#include "coneflow/cli/config.hpp"
#include "coneflow/coneflow.hpp"

namespace cli = coneflow::cli;

namespace {

void write_error(const std::string& out_dir, int code, const char* kind, const std::string& msg) {
    std::cerr << "error (" << kind << "): " << msg << "\n";
    if (out_dir.empty()) return;
    try {
        coneflow::write_json(std::filesystem::path(out_dir) / "error.json",
                             coneflow::Json{{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", msg}});
    } catch (const std::exception&) {
        // the error itself may be an unwritable output directory
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Positive axially symmetric solutions of -Δu + u = a|u|^{p-2}u on annuli"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::int64_t> seed;
    std::optional<int> workers;
    std::vector<std::string> suites;
    std::string fault;
    bool resume = false, dump_matrix = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "random seed (overrides seed)");
        sub->add_option("--workers", workers, "worker threads for sweeps (overrides workers)");
    };
    auto* solve = app.add_subcommand("solve", "find a positive cone solution by separatrix search");
    add_common(solve);
    solve->add_flag("--dump-matrix", dump_matrix, "write the H¹ system matrix as triplets to matrix.txt");
    auto* certify = app.add_subcommand("certify-nonradial", "spectral criterion, competitor and full solve");
    add_common(certify);
    auto* verify = app.add_subcommand("verify", "run the invariant verification suites");
    add_common(verify);
    auto* suite_opt = verify->add_option("--suite", suites, "suite to run (repeatable; \"\" selects none)");
    verify->add_option("--fault-inject", fault, "deliberate fault: angular_flux_sign");
    auto* sweep = app.add_subcommand("sweep", "criterion sweep in p or R");
    add_common(sweep);
    sweep->add_flag("--resume", resume, "reuse completed rows of an existing sweep.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kValidation;
    }

    cli::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = cli::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed) {
            if (*seed < 0) throw coneflow::ValidationError("--seed must be >= 0");
            cfg.seed = static_cast<std::uint64_t>(*seed);
        }
        if (workers) cfg.workers = *workers;
        cli::validate(cfg);
        cli::ensure_writable(cfg.output_dir);
    } catch (const coneflow::Error& e) {
        write_error(out_dir.empty() ? cfg.output_dir : out_dir, cli::kValidation, "validation", e.what());
        return cli::kValidation;
    }

    cli::CommandOptions opts;
    if (suite_opt->count() > 0) opts.suites = suites;
    opts.fault = fault;
    opts.resume = resume;
    opts.dump_matrix = dump_matrix;

    try {
        if (solve->parsed()) return cli::cmd_solve(cfg, opts, std::cout);
        if (certify->parsed()) return cli::cmd_certify_nonradial(cfg, opts, std::cout);
        if (verify->parsed()) return cli::cmd_verify(cfg, opts, std::cout);
        if (sweep->parsed()) return cli::cmd_sweep(cfg, opts, std::cout);
    } catch (const coneflow::ValidationError& e) {
        write_error(cfg.output_dir, cli::kValidation, "validation", e.what());
        return cli::kValidation;
    } catch (const coneflow::Error& e) {
        write_error(cfg.output_dir, cli::kSolver, "solver", e.what());
        return cli::kSolver;
    } catch (const std::exception& e) {
        write_error(cfg.output_dir, cli::kSolver, "internal", e.what());
        return cli::kSolver;
    }
    return cli::kValidation;
}
