#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mkd/harness.hpp"

namespace mkd {

namespace {

std::string num(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& s, std::vector<std::filesystem::path>& written) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
    written.push_back(p);
}

/// White-to-blue heatmap with the value printed in each cell.
std::string heatmap_svg(const std::vector<std::vector<double>>& v, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel) {
    const int cell = 40, left = 70, top = 50;
    const int w = left + cell * static_cast<int>(cols.size()) + 20;
    const int h = top + cell * static_cast<int>(rows.size()) + 50;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& r : v)
        for (double x : r) {
            if (first) lo = hi = x, first = false;
            lo = std::min(lo, x), hi = std::max(hi, x);
        }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int y = top + cell * static_cast<int>(i);
        os << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 3 << "\" text-anchor=\"end\">" << rows[i]
           << "</text>\n";
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const int x = left + cell * static_cast<int>(j);
            const double t = hi > lo ? (v[i][j] - lo) / (hi - lo) : 0.0;
            const int shade = static_cast<int>(255 - 200 * t);
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#ccc\"/>\n";
            os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 3 << "\" text-anchor=\"middle\">"
               << num(v[i][j], 3) << "</text>\n";
        }
    }
    for (std::size_t j = 0; j < cols.size(); ++j)
        os << "<text x=\"" << left + cell * static_cast<int>(j) + cell / 2 << "\" y=\""
           << top + cell * static_cast<int>(rows.size()) + 14 << "\" text-anchor=\"middle\">" << cols[j] << "</text>\n";
    os << "<text x=\"" << left + cell * static_cast<int>(cols.size()) / 2 << "\" y=\"" << h - 10
       << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text x=\"12\" y=\"" << top + cell * static_cast<int>(rows.size()) / 2 << "\" transform=\"rotate(-90 12 "
       << top + cell * static_cast<int>(rows.size()) / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string line_svg(const std::vector<std::size_t>& xs, const std::vector<double>& ys, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel) {
    const int w = 520, h = 320, left = 60, right = 20, top = 40, bottom = 50;
    const double x0 = static_cast<double>(xs.front()), x1 = static_cast<double>(xs.back());
    const double y1 = *std::max_element(ys.begin(), ys.end());
    auto px = [&](double x) { return left + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - (y1 > 0 ? y / y1 : 0.0) * (h - top - bottom); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << num(px(static_cast<double>(xs[i]))) << ',' << num(py(ys[i])) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << left << "\" y=\"" << h - bottom + 14 << "\">" << xs.front() << "</text>\n";
    os << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 14 << "\" text-anchor=\"end\">" << xs.back()
       << "</text>\n";
    os << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << num(y1, 3) << "</text>\n";
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">" << xlabel
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << (top + h - bottom) / 2 << "\" transform=\"rotate(-90 14 " << (top + h - bottom) / 2
       << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::vector<std::string> index_labels(std::size_t n, const std::string& prefix = "") {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const RunRecord& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;

    if (r.confusion.empty()) {
        std::cerr << "warning: no confusion matrix in " << r.run_name << ", heatmap skipped\n";
    } else {
        std::ostringstream tsv;
        std::vector<std::vector<double>> v;
        for (const auto& row : r.confusion) {
            v.emplace_back(row.begin(), row.end());
            for (std::size_t j = 0; j < row.size(); ++j) tsv << (j ? "\t" : "") << row[j];
            tsv << '\n';
        }
        write_file(dir / "plot_confusion.tsv", tsv.str(), written);
        const auto labels = index_labels(r.confusion.size());
        write_file(dir / "plot_confusion.svg",
                   heatmap_svg(v, labels, labels, "Confusion matrix (" + r.run_name + ")", "predicted", "true"),
                   written);
    }

    if (r.drift.size() == 0) {
        std::cerr << "warning: no drift series in " << r.run_name << ", drift plot skipped\n";
    } else {
        std::ostringstream tsv;
        tsv << std::setprecision(17) << "step\td\n";
        for (std::size_t i = 0; i < r.drift.size(); ++i) tsv << r.drift.steps[i] << '\t' << r.drift.d[i] << '\n';
        write_file(dir / "plot_drift.tsv", tsv.str(), written);
        write_file(dir / "plot_drift.svg",
                   line_svg(r.drift.steps, r.drift.d, "Feature drift (" + r.run_name + ")", "step", "d_t"), written);
    }

    for (const auto& [mode, m] : r.accuracy) {
        const auto K = m.n_tasks();
        std::vector<std::vector<double>> v(K, std::vector<double>(K, 0.0));
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < K; ++i) v[k][i] = m.get(k, i).value_or(0.0);
        const auto name = "plot_accuracy_" + to_string(mode);
        write_file(dir / (name + ".tsv"), m.to_text(), written);
        write_file(dir / (name + ".svg"),
                   heatmap_svg(v, index_labels(K, "after "), index_labels(K, "task "),
                               "Accuracy matrix, " + to_string(mode) + " model", "evaluated task", "trained through"),
                   written);
    }
    return written;
}

std::vector<std::filesystem::path> emit_sweep_plots(const SweepResult& s, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    const auto ia = std::find(s.keys.begin(), s.keys.end(), "alpha");
    const auto il = std::find(s.keys.begin(), s.keys.end(), "lambda");
    if (ia == s.keys.end() || il == s.keys.end()) {
        std::cerr << "warning: sweep has no alpha x lambda grid, accuracy grid plot skipped\n";
        return written;
    }
    const auto ka = static_cast<std::size_t>(ia - s.keys.begin()), kl = static_cast<std::size_t>(il - s.keys.begin());
    std::vector<std::string> alphas, lambdas;
    for (const auto& c : s.cells) {
        if (c.assignment.size() != s.keys.size()) continue;
        const auto& a = c.assignment[ka].second;
        const auto& l = c.assignment[kl].second;
        if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
        if (std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end()) lambdas.push_back(l);
    }
    std::vector<std::vector<double>> v(alphas.size(), std::vector<double>(lambdas.size(), 0.0));
    std::ostringstream tsv;
    tsv << std::setprecision(17) << "alpha\tlambda\tfaa_mean\n";
    for (const auto& c : s.cells) {
        if (c.assignment.size() != s.keys.size()) continue;
        const auto a = static_cast<std::size_t>(
            std::find(alphas.begin(), alphas.end(), c.assignment[ka].second) - alphas.begin());
        const auto l = static_cast<std::size_t>(
            std::find(lambdas.begin(), lambdas.end(), c.assignment[kl].second) - lambdas.begin());
        v[a][l] = 100.0 * mean_of(c.faa);
        tsv << alphas[a] << '\t' << lambdas[l] << '\t' << v[a][l] << '\n';
    }
    std::filesystem::create_directories(dir);
    write_file(dir / "plot_alpha_lambda.tsv", tsv.str(), written);
    write_file(dir / "plot_alpha_lambda.svg",
               heatmap_svg(v, alphas, lambdas, "Final average accuracy (%)", "lambda", "alpha"), written);
    return written;
}

}  // namespace mkd
