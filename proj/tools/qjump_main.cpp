// Command-line harness: trajectories | convergence | audit | replay.
// Exit codes: 0 all checks pass, 1 check failure, 2 usage or config error.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qjump/config.hpp"
#include "qjump/harness.hpp"
#include "qjump/io.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int paths = 0;
    int workers = 0;
    bool seed_given = false;
    bool out_given = false;
    bool paths_given = false;
    bool workers_given = false;
};

void add_common_options(CLI::App* sub, CliOptions& opt) {
    sub->add_option("--config", opt.config_path, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override run.seed");
    sub->add_option("--out", opt.out_dir, "override output.directory");
    sub->add_option("--paths", opt.paths, "override run.n_paths")->check(CLI::PositiveNumber);
    sub->add_option("--workers", opt.workers, "worker thread count (default 1)")
        ->check(CLI::PositiveNumber);
}

int resolve_workers(const CliOptions& opt) {
    if (opt.workers_given) return opt.workers;
    if (const char* env = std::getenv("QJUMP_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            std::cerr << "error: QJUMP_WORKERS must be a positive integer\n";
            return -1;
        }
        return static_cast<int>(v);
    }
    return 1;
}

void print_outcome(const qjump::HarnessOutcome& out, const std::string& dir) {
    for (const auto& f : out.files) std::cout << "wrote " << dir << "/" << f << "\n";
    for (const auto& c : out.checks)
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
    std::cout << (out.pass ? "OK" : "FAILED") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Jump-trajectory simulator for two-level open quantum systems"};
    app.require_subcommand(1);
    CliOptions opt;
    CLI::App* traj = app.add_subcommand("trajectories", "sample exact paths and ensemble means");
    CLI::App* conv = app.add_subcommand("convergence", "coupled-scheme convergence report");
    CLI::App* audit = app.add_subcommand("audit", "run the invariant suite");
    CLI::App* replay = app.add_subcommand("replay",
                                          "re-run one serialized realization step by step");
    for (CLI::App* sub : {traj, conv, audit, replay}) add_common_options(sub, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help and friends
            app.exit(e);
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 2;
    }
    CLI::App* sub = app.get_subcommands().front();
    opt.seed_given = sub->count("--seed") > 0;
    opt.out_given = sub->count("--out") > 0;
    opt.paths_given = sub->count("--paths") > 0;
    opt.workers_given = sub->count("--workers") > 0;

    const int workers = resolve_workers(opt);
    if (workers < 0) return 2;

    try {
        qjump::ExperimentConfig cfg = qjump::parse_config(qjump::read_text_file(opt.config_path));
        if (opt.seed_given) cfg.run.seed = opt.seed;
        if (opt.out_given) cfg.output.directory = opt.out_dir;
        if (opt.paths_given) cfg.run.n_paths = opt.paths;

        qjump::HarnessOutcome out;
        const std::string& cmd = sub->get_name();
        if (cmd == "trajectories")
            out = qjump::run_trajectories(cfg, workers);
        else if (cmd == "convergence")
            out = qjump::run_convergence(cfg, workers);
        else if (cmd == "audit")
            out = qjump::run_audit(cfg, workers);
        else
            out = qjump::run_replay(cfg, workers);
        print_outcome(out, cfg.output.directory);
        return out.pass ? 0 : 1;
    } catch (const qjump::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
