#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mkd/harness.hpp"

namespace mkd {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_seed(const std::string& name) {
    const auto pos = name.rfind("_seed");
    return pos == std::string::npos ? name : name.substr(0, pos);
}

}  // namespace

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void save_record(const RunRecord& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.txt", r.config.to_text());
    write_text(dir / "schedule.txt", r.schedule_manifest);

    std::ostringstream log;
    log << std::setprecision(17);
    for (const auto& row : r.log) log << row.step << '\t' << row.name << '\t' << row.value << '\n';
    write_text(dir / "metrics.tsv", log.str());

    for (const auto& [mode, m] : r.accuracy) write_text(dir / ("accuracy_" + to_string(mode) + ".tsv"), m.to_text());

    std::ostringstream conf;
    for (const auto& row : r.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) conf << (j ? "\t" : "") << row[j];
        conf << '\n';
    }
    write_text(dir / "confusion.tsv", conf.str());

    std::ostringstream drift;
    drift << std::setprecision(17) << "step\td\n";
    for (std::size_t i = 0; i < r.drift.size(); ++i) drift << r.drift.steps[i] << '\t' << r.drift.d[i] << '\n';
    write_text(dir / "drift.tsv", drift.str());

    nlohmann::json j;
    j["run_name"] = r.run_name;
    j["revision"] = r.revision;
    j["wall_seconds"] = r.wall_seconds;
    j["n_steps"] = r.n_steps;
    j["reported_mode"] = to_string(r.reported_mode);
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : r.config.to_pairs()) cfg[k] = v;
    j["config"] = cfg;
    for (const auto& [mode, v] : r.faa) j["faa"][to_string(mode)] = v;
    for (const auto& [mode, v] : r.bt) j["bt"][to_string(mode)] = v;
    for (const auto& [mode, m] : r.accuracy) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t k = 0; k < m.n_tasks(); ++k) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t i = 0; i < m.n_tasks(); ++i) {
                const auto v = m.get(k, i);
                row.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
            }
            rows.push_back(row);
        }
        j["accuracy"][to_string(mode)] = rows;
    }
    j["final_logits_accuracy"] = r.final_logits_accuracy;
    j["final_ncm_accuracy"] = r.final_ncm_accuracy ? nlohmann::json(*r.final_ncm_accuracy) : nlohmann::json(nullptr);
    j["task_end_steps"] = r.task_end_steps;
    j["detected_boundaries"] = r.detected_boundaries;
    j["drift"] = {{"steps", r.drift.steps}, {"d", r.drift.d}};
    j["confusion"] = r.confusion;
    write_text(dir / "record.json", j.dump(2) + "\n");
}

RunRecord load_record(const std::filesystem::path& dir) {
    const auto j = nlohmann::json::parse(read_text(dir / "record.json"));
    RunRecord r;
    for (const auto& [k, v] : j.at("config").items()) r.config.set(k, v.get<std::string>());
    r.run_name = j.at("run_name");
    r.revision = j.value("revision", "");
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.n_steps = j.value("n_steps", std::size_t{0});
    r.reported_mode = parse_inference_mode(j.at("reported_mode"));
    for (const auto& [k, v] : j.at("faa").items()) r.faa[parse_inference_mode(k)] = v.get<double>();
    if (j.contains("bt"))
        for (const auto& [k, v] : j.at("bt").items()) r.bt[parse_inference_mode(k)] = v.get<double>();
    for (const auto& [k, rows] : j.at("accuracy").items()) {
        AccuracyMatrix m(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < rows[a].size(); ++b)
                if (!rows[a][b].is_null()) m.set(a, b, rows[a][b].get<double>());
        r.accuracy.emplace(parse_inference_mode(k), std::move(m));
    }
    r.final_logits_accuracy = j.value("final_logits_accuracy", 0.0);
    if (j.contains("final_ncm_accuracy") && !j["final_ncm_accuracy"].is_null())
        r.final_ncm_accuracy = j["final_ncm_accuracy"].get<double>();
    r.task_end_steps = j.value("task_end_steps", std::vector<std::size_t>{});
    r.detected_boundaries = j.value("detected_boundaries", std::vector<std::size_t>{});
    if (j.contains("drift")) {
        r.drift.steps = j["drift"]["steps"].get<std::vector<std::size_t>>();
        r.drift.d = j["drift"]["d"].get<std::vector<double>>();
    }
    r.confusion = j.value("confusion", ConfusionMatrix{});
    return r;
}

std::string report(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
    struct Group {
        std::vector<double> faa, bt, ncm, logits;
    };
    std::map<std::string, Group> groups;
    std::vector<std::filesystem::path> found;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() == "record.json") found.push_back(e.path().parent_path());
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
        const RunRecord r = load_record(p);
        auto& g = groups[strip_seed(r.run_name)];
        g.faa.push_back(100.0 * r.reported_faa());
        if (auto bt = r.reported_bt()) g.bt.push_back(100.0 * *bt);
        g.logits.push_back(100.0 * r.final_logits_accuracy);
        if (r.final_ncm_accuracy) g.ncm.push_back(100.0 * *r.final_ncm_accuracy);
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "run\truns\tfaa_mean\tfaa_std\tbt_mean\tbt_std\tlogits_acc\tncm_acc\n";
    for (const auto& [name, g] : groups) {
        os << name << '\t' << g.faa.size() << '\t' << mean_of(g.faa) << '\t' << std_of(g.faa) << '\t';
        if (g.bt.empty())
            os << "-\t-\t";
        else
            os << mean_of(g.bt) << '\t' << std_of(g.bt) << '\t';
        os << mean_of(g.logits) << '\t';
        if (g.ncm.empty())
            os << "-";
        else
            os << mean_of(g.ncm);
        os << '\n';
    }
    return os.str();
}

}  // namespace mkd
