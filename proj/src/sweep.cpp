#include <iomanip>
#include <sstream>

#include "mkd/harness.hpp"

namespace mkd {

SweepResult sweep(const RunConfig& base, const Grid& grid, std::size_t n_seeds, const Dataset* data) {
    if (n_seeds == 0) throw std::invalid_argument("sweep needs at least one seed");
    SweepResult out;
    for (const auto& [k, values] : grid) {
        if (values.empty()) throw std::invalid_argument("grid key '" + k + "' has no values");
        out.keys.push_back(k);
    }

    std::vector<std::size_t> idx(grid.size(), 0);
    std::size_t cell_no = 0;
    while (true) {
        SweepCell cell;
        RunConfig cfg = base;
        std::string label = "cell" + std::to_string(cell_no);
        try {
            for (std::size_t g = 0; g < grid.size(); ++g) {
                cell.assignment.emplace_back(grid[g].first, grid[g].second[idx[g]]);
                cfg.set(grid[g].first, grid[g].second[idx[g]]);
            }
            cfg.validate();
            cell.lambda = cfg.mkd == MkdMode::off ? 0.0 : cfg.distill().lambda();
            std::optional<Dataset> owned;
            const Dataset* d = data;
            if (!d) d = &owned.emplace(load_run_dataset(cfg));
            for (std::size_t s = 0; s < n_seeds; ++s) {
                RunConfig run = cfg;
                run.seed = base.seed + s;
                run.run_name = label + "_" + run.default_run_name();
                try {
                    const RunRecord r = run_experiment(run, d);
                    cell.faa.push_back(r.reported_faa());
                    if (auto bt = r.reported_bt()) cell.bt.push_back(*bt);
                } catch (const std::exception& e) {
                    cell.errors.push_back("seed " + std::to_string(run.seed) + ": " + e.what());
                }
            }
        } catch (const std::exception& e) {
            cell.errors.push_back(e.what());
        }
        out.cells.push_back(std::move(cell));
        ++cell_no;

        std::size_t g = grid.size();
        while (g > 0) {
            --g;
            if (++idx[g] < grid[g].second.size()) break;
            idx[g] = 0;
            if (g == 0) return out;
        }
        if (grid.empty()) return out;
    }
}

std::string SweepResult::to_table() const {
    std::ostringstream os;
    os << std::setprecision(6);
    for (const auto& k : keys) os << k << '\t';
    os << "lambda_effective\truns\tfaa_mean\tfaa_std\tbt_mean\tbt_std\terrors\n";
    for (const auto& c : cells) {
        for (const auto& [k, v] : c.assignment) os << v << '\t';
        for (std::size_t i = c.assignment.size(); i < keys.size(); ++i) os << "?\t";
        os << c.lambda << '\t' << c.faa.size() << '\t' << mean_of(c.faa) << '\t' << std_of(c.faa) << '\t'
           << mean_of(c.bt) << '\t' << std_of(c.bt) << '\t';
        for (std::size_t i = 0; i < c.errors.size(); ++i) os << (i ? "; " : "") << c.errors[i];
        os << '\n';
    }
    return os.str();
}

}  // namespace mkd
