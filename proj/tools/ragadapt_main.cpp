#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ragadapt/experiment.hpp"
#include "ragadapt/store_io.hpp"
#include "ragadapt/world.hpp"

namespace {

std::size_t default_threads() {
    if (const char* env = std::getenv("RAGADAPT_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ragadapt: retrieval-augmented adaptation on synthetic sphere worlds"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::size_t threads = default_threads();
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("-c,--config", config_path, "experiment config file");
        if (needs_config) opt->required();
        cmd->add_option("-o,--out", out_dir, "output directory");
        cmd->add_option("-t,--threads", threads, "worker threads (env RAGADAPT_THREADS)");
        cmd->add_option("-s,--seed", seed_override, "override the config master seed")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_flag("-q,--quiet", quiet, "suppress progress output");
    };

    auto* gen_world = app.add_subcommand("gen-world", "generate one world and save it");
    add_common(gen_world, true);

    auto* run = app.add_subcommand("run", "run the accuracy/risk sweep");
    add_common(run, true);

    auto* verify = app.add_subcommand("verify", "run the numerical bound checks");
    add_common(verify, true);

    auto* report = app.add_subcommand("report", "rebuild summary.csv from results.csv");
    add_common(report, false);

    CLI11_PARSE(app, argc, argv);

    std::ostream* log = quiet ? nullptr : &std::cerr;
    try {
        if (report->parsed()) {
            ragadapt::rebuild_summary(out_dir);
            if (log) *log << "rebuilt " << out_dir << "/summary.csv\n";
            return 0;
        }

        ragadapt::ExperimentConfig cfg = ragadapt::load_config(config_path);
        if (seed_given) cfg.master_seed = seed_override;

        if (gen_world->parsed()) {
            ragadapt::WorldConfig wc = cfg.world;
            wc.master_seed = cfg.master_seed;
            const ragadapt::World world = ragadapt::make_world(wc);
            ragadapt::save_world(out_dir, world);
            if (log)
                *log << "wrote world (" << world.classes() << " classes, dim " << world.dim()
                     << ", nu " << world.measured_nu() << ") to " << out_dir << "\n";
            return 0;
        }
        if (run->parsed()) {
            ragadapt::run_experiment(cfg, out_dir, threads, log);
            return 0;
        }
        // verify
        const bool ok = ragadapt::verify_experiment(cfg, out_dir, threads, log);
        return ok ? 0 : 3;
    } catch (const ragadapt::ConfigError& e) {
        std::cerr << "config error: " << e.what();
        if (e.line_number > 0) std::cerr << " (line " << e.line_number << ")";
        std::cerr << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
