// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,6] [--seeds N]
//
// Criteria 6 to 10 share one set of desk-scale runs (ER and ER+MKD, plus the
// single-view variant for 10). Criterion 11 runs its own two-task split.

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mkd/harness.hpp"
#include "support.hpp"

using namespace mkd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int p = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(p) << v;
    return os.str();
}

std::string pct(double v) { return fmt(100.0 * v, 2); }

// --- 1 -----------------------------------------------------------------------

Outcome formula_fidelity() {
    const double a = lambda_of_alpha(0.01), b = lambda_of_alpha(1.0), c = lambda_of_alpha(0.1);
    const bool ok = a == 5.5 && std::abs(b - 14.5) <= 1e-12 && std::abs(c - 10.0) <= 1e-12;
    return {ok, "lambda(0.01)=" + fmt(a, 15) + " lambda(1)=" + fmt(b, 15) + " lambda(0.1)=" + fmt(c, 15)};
}

// --- 2 -----------------------------------------------------------------------

Outcome ema_contraction() {
    const auto t0 = Clock::now();
    const double alpha = 0.01;
    const auto arch = testing::tiny_mlp(10, 8, 32);
    Classifier start(arch), frozen(arch);
    start.initialize(1), frozen.initialize(2);
    TeacherState teacher(start, alpha);
    auto gap = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < frozen.param_count(); ++i) {
            const double d = teacher.params()[i] - frozen.params()[i];
            s += d * d;
        }
        return std::sqrt(s);
    };
    const double g0 = gap();
    double worst = 0.0;
    for (int t = 1; t <= 1000; ++t) {
        teacher.ema_update(frozen.params());
        const double expect = g0 * std::pow(1.0 - alpha, t);
        worst = std::max(worst, std::abs(gap() - expect) / expect);
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 1.0, "max relative deviation " + fmt(worst, 12) + ", " + fmt(secs, 3) + " s"};
}

// --- 3 -----------------------------------------------------------------------

Outcome gradient_check() {
    const auto t0 = Clock::now();
    const auto arch = testing::tiny_mlp(6, 4, 8);
    Classifier s(arch), t(arch);
    s.initialize(1), t.initialize(2);
    Rng rng = make_rng(3, RngStream::dataset);
    const Tensor x = testing::random_images(8, arch, rng), x2 = testing::random_images(8, arch, rng);
    const auto y = testing::random_labels(8, arch.n_classes, rng);
    const std::span<const int> ys(y.data(), 4), ym(y.data() + 4, 4);
    const std::vector<int> current{y.begin(), y.begin() + 4};
    DerppBatch db;
    db.stream_x = x.slice_rows(0, 4);
    db.stream_y = {y.begin(), y.begin() + 4};
    db.mem_a_x = x.slice_rows(4, 8);
    db.mem_a_logits = t.forward(db.mem_a_x);
    db.mem_b_x = x2.slice_rows(0, 4);
    db.mem_b_y = {y.begin() + 4, y.end()};
    const DistillConfig dc;

    const std::vector<std::pair<std::string, std::function<double(GradTape*)>>> losses{
        {"er", [&](GradTape* g) { return er_objective(s, x, y, g).total; }},
        {"derpp", [&](GradTape* g) { return derpp_loss(db, 0.1, 0.5, s, g).total; }},
        {"erace", [&](GradTape* g) { return erace_loss(x.slice_rows(0, 4), ys, x.slice_rows(4, 8), ym, current, s, g).total; }},
        {"mkd", [&](GradTape* g) { return mkd_loss(x, x2, y, s, t, dc, g).total; }},
        {"single_view", [&](GradTape* g) { return mkd_loss_single_view(x2, y, s, t, dc, g).total; }},
        {"snapshot", [&](GradTape* g) { return snapshot_kd_loss(x, y, s, &t, 0.01, 4.0, g).total; }},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, fn] : losses) {
        const auto r = testing::grad_check(s, fn, 100, rng);
        ok &= r.checked == 100 && r.max_rel_error < 1e-4;
        detail += name + "=" + fmt(r.max_rel_error, 8) + " ";
    }
    const double secs = seconds_since(t0);
    ok &= secs < 60.0;
    return {ok, detail + "(" + fmt(secs, 2) + " s)"};
}

// --- 4 -----------------------------------------------------------------------

Outcome reservoir_uniformity() {
    const auto t0 = Clock::now();
    const std::size_t M = 10, n = 100, runs = 100000;
    Tensor items({n, 1});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) items[i] = static_cast<double>(i), labels[i] = static_cast<int>(i);
    std::vector<double> counts(n, 0.0);
    bool occupancy = true;
    Rng rng = make_rng(4, RngStream::reservoir);
    for (std::size_t r = 0; r < runs; ++r) {
        ReplayBuffer buf(M, {1}, n);
        for (std::size_t i = 0; i < n; ++i) {
            buf.reservoir_update(items.slice_rows(i, i + 1), std::span<const int>(labels.data() + i, 1), rng);
            occupancy &= buf.size() == std::min(i + 1, M) && buf.n_seen() == i + 1;
        }
        for (int y : buf.labels()) counts[static_cast<std::size_t>(y)] += 1.0;
    }
    const double expected = static_cast<double>(runs * M) / static_cast<double>(n);
    double stat = 0.0;
    for (double o : counts) stat += (o - expected) * (o - expected) / expected;
    const boost::math::chi_squared dist(static_cast<double>(n - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, stat));
    const double secs = seconds_since(t0);
    return {p > 0.01 && occupancy && secs < 60.0, "chi2=" + fmt(stat, 2) + " p=" + fmt(p, 4) +
                                                      " occupancy=" + (occupancy ? "ok" : "violated") + " (" +
                                                      fmt(secs, 2) + " s)"};
}

// --- 5 -----------------------------------------------------------------------

Outcome boundary_detection() {
    // 5 tasks x 2 classes x 600 samples, batch 10: 120 iterations per task.
    const Dataset data = testing::label_dataset(10, 600, 1);
    const std::size_t blur = 200;
    const auto sch = build_schedule("labels", 10, 5, BoundaryMode::blurry, blur, 5);
    const Stream s = iter_blurry(data, sch, 10, blur, 5);
    const auto& plan = s.plan();

    // Oracle: the first batch holding any class of task k, for every task.
    std::vector<std::size_t> truth;
    std::set<std::size_t> tasks_seen;
    for (std::size_t b = 0; b < s.size(); ++b)
        for (std::size_t p = plan.batch_begin[b]; p < plan.batch_begin[b + 1]; ++p)
            if (tasks_seen.insert(plan.origin_task[p]).second) {
                truth.push_back(b);
                break;
            }
    bool gaps_ok = true;
    for (std::size_t i = 1; i < truth.size(); ++i) gaps_ok &= truth[i] - truth[i - 1] >= 100;

    // Batches whose positions lie in a transition window.
    std::set<std::size_t> window_batches;
    for (std::size_t b = 0; b < s.size(); ++b)
        for (std::size_t p = plan.batch_begin[b]; p < plan.batch_begin[b + 1]; ++p)
            if (plan.mix_prob[p] > 0.0 && plan.mix_prob[p] < 1.0) window_batches.insert(b);

    BoundaryDetector det(100);
    std::vector<std::size_t> fired;
    for (std::size_t b = 0; b < s.size(); ++b)
        if (det.observe(s.batch(b).labels)) fired.push_back(b);
    std::size_t false_in_window = 0;
    for (auto b : fired)
        if (window_batches.count(b) && std::find(truth.begin(), truth.end(), b) == truth.end()) ++false_in_window;

    std::string list;
    for (auto b : fired) list += std::to_string(b) + " ";
    return {fired == truth && gaps_ok && false_in_window == 0 && truth.size() == 5,
            "fired at " + list + "expected " + std::to_string(truth.size()) + " boundaries, " +
                std::to_string(false_in_window) + " false positives in windows"};
}

// --- desk-scale runs ---------------------------------------------------------

RunConfig desk_config() {
    RunConfig c;
    c.dataset = "synth-digits";
    c.synth_difficulty = 1.5;
    c.n_tasks = 5;
    c.memory_size = 500;
    c.method = Method::er;
    return c;
}

struct SeedRuns {
    std::vector<RunRecord> er, mkd, single;
    double er_mkd_seconds = 0.0;
};

SeedRuns run_desk(std::size_t n_seeds, bool need_single) {
    SeedRuns out;
    const RunConfig base = desk_config();
    const Dataset data = load_run_dataset(base);
    const auto t0 = Clock::now();
    for (std::size_t s = 0; s < n_seeds; ++s) {
        RunConfig er = base;
        er.seed = s;
        RunConfig mkd = er;
        mkd.mkd = MkdMode::on;
        out.er.push_back(run_experiment(er, &data));
        out.mkd.push_back(run_experiment(mkd, &data));
        std::cerr << "  seed " << s << ": ER " << pct(out.er.back().reported_faa()) << "  ER+MKD "
                  << pct(out.mkd.back().reported_faa()) << '\n';
    }
    out.er_mkd_seconds = seconds_since(t0);
    if (need_single)
        for (std::size_t s = 0; s < n_seeds; ++s) {
            RunConfig sv = base;
            sv.seed = s;
            sv.mkd = MkdMode::single_view;
            out.single.push_back(run_experiment(sv, &data));
        }
    return out;
}

std::vector<double> faa_of(const std::vector<RunRecord>& runs, std::optional<InferenceMode> mode = std::nullopt) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(mode ? r.faa.at(*mode) : r.reported_faa());
    return v;
}

std::size_t majority(std::size_t n) { return n >= 5 ? n - 1 : n; }

Outcome mkd_benefit(const SeedRuns& r) {
    const auto er = faa_of(r.er), mkd = faa_of(r.mkd);
    const double gain = mean_of(mkd) - mean_of(er);
    const bool ok = gain >= 0.03 && std_of(mkd) <= std_of(er) && r.er_mkd_seconds < 600.0;
    return {ok, "FAA ER " + pct(mean_of(er)) + "+-" + pct(std_of(er)) + ", ER+MKD " + pct(mean_of(mkd)) + "+-" +
                    pct(std_of(mkd)) + ", gain " + pct(gain) + " pts, " + fmt(r.er_mkd_seconds, 1) + " s"};
}

Outcome bt_sign(const SeedRuns& r) {
    std::size_t wins = 0;
    std::string detail;
    for (std::size_t s = 0; s < r.er.size(); ++s) {
        const double a = *r.er[s].reported_bt(), b = *r.mkd[s].reported_bt();
        wins += b > a;
        detail += "[" + pct(a) + " vs " + pct(b) + "] ";
    }
    return {wins >= majority(r.er.size()), "BT ER vs ER+MKD " + detail + std::to_string(wins) + "/" +
                                               std::to_string(r.er.size()) + " seeds"};
}

Outcome drift_reduction(const SeedRuns& r) {
    std::size_t lower = 0, total = 0;
    for (std::size_t s = 0; s < r.er.size(); ++s) {
        std::map<std::size_t, double> er_d;
        for (std::size_t i = 0; i < r.er[s].drift.size(); ++i) er_d[r.er[s].drift.steps[i]] = r.er[s].drift.d[i];
        const auto& m = r.mkd[s].drift;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto it = er_d.find(m.steps[i]);
            if (it == er_d.end()) continue;
            ++total;
            lower += m.d[i] < it->second;
        }
    }
    const double frac = total ? static_cast<double>(lower) / static_cast<double>(total) : 0.0;
    return {total > 0 && frac >= 0.8,
            std::to_string(lower) + "/" + std::to_string(total) + " sampled steps lower (" + pct(frac) + "%)"};
}

Outcome ncm_flip(const SeedRuns& r) {
    std::size_t er_up = 0, mkd_down = 0;
    std::string detail;
    for (std::size_t s = 0; s < r.er.size(); ++s) {
        const auto& e = r.er[s];
        const auto& m = r.mkd[s];
        if (e.final_ncm_accuracy && *e.final_ncm_accuracy > e.final_logits_accuracy) ++er_up;
        if (m.final_ncm_accuracy && *m.final_ncm_accuracy < m.final_logits_accuracy) ++mkd_down;
        detail += "[ER " + pct(e.final_logits_accuracy) + "/" + pct(e.final_ncm_accuracy.value_or(-1)) + " MKD " +
                  pct(m.final_logits_accuracy) + "/" + pct(m.final_ncm_accuracy.value_or(-1)) + "] ";
    }
    const std::size_t need = majority(r.er.size());
    return {er_up >= need && mkd_down >= need, "logits/NCM " + detail + "ER NCM>logits " + std::to_string(er_up) +
                                                   ", MKD NCM<logits " + std::to_string(mkd_down)};
}

Outcome ablation_order(const SeedRuns& r) {
    const double avg = mean_of(faa_of(r.mkd, InferenceMode::averaged));
    const double stu = mean_of(faa_of(r.mkd, InferenceMode::student));
    const double sv = mean_of(faa_of(r.single, InferenceMode::student));
    return {avg >= stu && stu >= sv,
            "averaged " + pct(avg) + " >= student " + pct(stu) + " >= single-view student " + pct(sv)};
}

// --- 11 ----------------------------------------------------------------------

Outcome teacher_quality(std::size_t n_seeds) {
    RunConfig base = desk_config();
    base.n_tasks = 2;
    base.snapshot_lambda = 0.01;
    const Dataset data = load_run_dataset(base);
    std::vector<double> er, low, high;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        RunConfig c = base;
        c.seed = s;
        er.push_back(run_experiment(c, &data).reported_faa());
        c.snapshot_kd = SnapshotKd::low_quality;
        low.push_back(run_experiment(c, &data).reported_faa());
        c.snapshot_kd = SnapshotKd::high_quality;
        high.push_back(run_experiment(c, &data).reported_faa());
    }
    const double e = mean_of(er), l = mean_of(low), h = mean_of(high);
    return {h > l && l >= e - 0.01,
            "FAA high-quality " + pct(h) + ", low-quality " + pct(l) + ", ER " + pct(e) + " (lambda=0.01)"};
}

// --- 12 ----------------------------------------------------------------------

Outcome determinism() {
    RunConfig c = desk_config();
    c.synth_train_per_class = 60;
    c.synth_test_per_class = 20;
    c.mkd = MkdMode::on;
    c.eval_every = 10;
    c.drift_every = 5;
    c.boundary_min_gap = 10;
    const auto a = run_experiment(c), b = run_experiment(c);
    if (a.log.size() != b.log.size()) return {false, "log lengths differ"};
    double worst = 0.0;
    bool same_keys = true;
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        same_keys &= a.log[i].name == b.log[i].name && a.log[i].step == b.log[i].step;
        const double scale = std::max(std::abs(a.log[i].value), 1e-300);
        worst = std::max(worst, std::abs(a.log[i].value - b.log[i].value) / scale);
    }
    return {same_keys && worst <= 1e-6,
            std::to_string(a.log.size()) + " rows, max relative difference " + fmt(worst, 12)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    std::size_t n_seeds = 5;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
        } else if (a == "--seeds" && i + 1 < argc) {
            n_seeds = std::stoul(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--only 1,2,...] [--seeds N]\n";
            return 2;
        }
    }
    auto wanted = [&](int k) { return only.empty() || only.count(k); };

    int failed = 0;
    auto report = [&](int k, const std::string& name, const Outcome& o) {
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << k << "  " << name << ": " << o.detail
                  << std::endl;
        failed += !o.pass;
    };
    auto guarded = [&](int k, const std::string& name, const std::function<Outcome()>& fn) {
        if (!wanted(k)) return;
        try {
            report(k, name, fn());
        } catch (const std::exception& e) {
            report(k, name, {false, std::string("error: ") + e.what()});
        }
    };

    guarded(1, "formula fidelity", formula_fidelity);
    guarded(2, "EMA contraction", ema_contraction);
    guarded(3, "gradient check", gradient_check);
    guarded(4, "reservoir uniformity", reservoir_uniformity);
    guarded(5, "boundary detector", boundary_detection);

    if (wanted(6) || wanted(7) || wanted(8) || wanted(9) || wanted(10)) {
        std::optional<SeedRuns> runs;
        try {
            runs = run_desk(n_seeds, wanted(10));
        } catch (const std::exception& e) {
            for (int k = 6; k <= 10; ++k)
                if (wanted(k)) report(k, "desk-scale run", {false, std::string("error: ") + e.what()});
        }
        if (runs) {
            guarded(6, "MKD benefit", [&] { return mkd_benefit(*runs); });
            guarded(7, "backward transfer sign", [&] { return bt_sign(*runs); });
            guarded(8, "feature drift reduction", [&] { return drift_reduction(*runs); });
            guarded(9, "NCM direction flip", [&] { return ncm_flip(*runs); });
            guarded(10, "ablation ordering", [&] { return ablation_order(*runs); });
        }
    }
    guarded(11, "teacher quality", [&] { return teacher_quality(n_seeds); });
    guarded(12, "determinism", determinism);

    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
