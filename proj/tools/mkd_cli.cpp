// Command-line front end: run, sweep and report.

#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "mkd/harness.hpp"

namespace {

void print_summary(const mkd::RunRecord& r) {
    std::cout << std::fixed << std::setprecision(2);
    std::cout << r.run_name << ": " << r.n_steps << " steps in " << r.wall_seconds << " s\n";
    for (const auto& [mode, faa] : r.faa) {
        std::cout << "  " << std::left << std::setw(9) << mkd::to_string(mode) << " FAA " << 100.0 * faa;
        if (const auto it = r.bt.find(mode); it != r.bt.end()) std::cout << "  BT " << 100.0 * it->second;
        std::cout << '\n';
    }
    std::cout << "  reported (" << mkd::to_string(r.reported_mode) << ") logits acc "
              << 100.0 * r.final_logits_accuracy;
    if (r.final_ncm_accuracy) std::cout << ", NCM acc " << 100.0 * *r.final_ncm_accuracy;
    std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online continual learning with momentum knowledge distillation"};
    app.require_subcommand(1);

    std::string config_path, grid_path, runs_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::size_t n_seeds = 5;

    auto* run = app.add_subcommand("run", "Train one configuration and persist its record");
    run->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the run seed");
    run->add_option("--override", overrides, "key=value, repeatable");

    auto* sw = app.add_subcommand("sweep", "Run the cartesian product of a grid over several seeds");
    sw->add_option("--config", config_path, "Base config file")->required()->check(CLI::ExistingFile);
    sw->add_option("--grid", grid_path, "Grid file: key = v1, v2, ...")->required()->check(CLI::ExistingFile);
    sw->add_option("--seeds", n_seeds, "Seeds per cell")->check(CLI::PositiveNumber);
    sw->add_option("--override", overrides, "key=value applied to the base config, repeatable");

    auto* rep = app.add_subcommand("report", "Aggregate persisted run records");
    rep->add_option("--runs", runs_dir, "Directory holding run records")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            mkd::RunConfig cfg = mkd::load_config(config_path);
            mkd::apply_overrides(cfg, overrides);
            if (seed) cfg.seed = *seed;
            if (!cfg.output_dir) cfg.output_dir = "runs";
            const auto rec = mkd::run_experiment(cfg);
            print_summary(rec);
            std::cout << "  written to " << (*cfg.output_dir / rec.run_name).string() << '\n';
        } else if (*sw) {
            mkd::RunConfig cfg = mkd::load_config(config_path);
            mkd::apply_overrides(cfg, overrides);
            if (!cfg.output_dir) cfg.output_dir = "runs";
            const auto grid = mkd::load_grid(grid_path);
            const auto result = mkd::sweep(cfg, grid, n_seeds);
            const auto table = result.to_table();
            std::cout << table;
            std::filesystem::create_directories(*cfg.output_dir);
            std::ofstream(*cfg.output_dir / "sweep.tsv") << table;
            mkd::emit_sweep_plots(result, *cfg.output_dir);
        } else if (*rep) {
            std::cout << mkd::report(runs_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
