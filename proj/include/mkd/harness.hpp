#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mkd/augmentation.hpp"
#include "mkd/boundary_detector.hpp"
#include "mkd/config.hpp"
#include "mkd/dataset.hpp"
#include "mkd/datastream.hpp"
#include "mkd/losses.hpp"
#include "mkd/metrics.hpp"
#include "mkd/model.hpp"
#include "mkd/momentum_teacher.hpp"
#include "mkd/optimizer.hpp"
#include "mkd/replay_buffer.hpp"

namespace mkd {

/// Phases of one training step, reported in execution order.
enum class StepPhase { retrieve, baseline_loss, mkd_loss, backward, optimizer_step, ema_update, buffer_write };

std::string to_string(StepPhase p);

using StepObserver = std::function<void(StepPhase)>;

/// One training loop: student, optional EMA teacher, memory and optimizer.
class Trainer {
public:
    Trainer(const RunConfig& cfg, const Dataset& data, const TaskSchedule& schedule);

    /// Retrieve memory rows, compute the baseline loss, add the MKD terms when
    /// enabled, backpropagate, step the optimizer, update the teacher, then
    /// offer the stream rows to the memory.
    LossBreakdown train_step(const StreamBatch& batch);

    /// Called by the run loop at a detected or known task change (not at step 0).
    void on_task_boundary();

    void set_observer(StepObserver obs) { observer_ = std::move(obs); }

    const Classifier& student() const noexcept { return student_; }
    Classifier& student() noexcept { return student_; }
    const TeacherState* teacher() const noexcept { return teacher_ ? &*teacher_ : nullptr; }
    const ReplayBuffer& buffer() const noexcept { return buffer_; }
    const Classifier* snapshot_teacher() const noexcept { return snapshot_ ? &*snapshot_ : nullptr; }
    const RunConfig& config() const noexcept { return cfg_; }

    /// Modes with a distinct model: student always, teacher and averaged with MKD.
    std::vector<InferenceMode> available_modes() const;
    /// The configured inference mode, or student when there is no teacher.
    InferenceMode effective_mode() const;
    Classifier model_for(InferenceMode mode) const;

private:
    void notify(StepPhase p) const {
        if (observer_) observer_(p);
    }
    Classifier train_high_quality_teacher();

    RunConfig cfg_;
    const Dataset* data_;
    const TaskSchedule* schedule_;
    DistillConfig distill_;
    AugPolicy aug_;
    Classifier student_;
    std::vector<Scalar> init_params_;
    std::optional<TeacherState> teacher_;
    std::optional<Classifier> snapshot_;
    ReplayBuffer buffer_;
    std::unique_ptr<Optimizer> optimizer_;
    Rng reservoir_rng_, retrieval_rng_, aug_rng_, mkd_aug_rng_, teacher_rng_;
    std::vector<std::size_t> since_boundary_;  ///< training rows seen since the last boundary
    std::vector<Scalar> grad_;
    StepObserver observer_;
};

struct MetricRow {
    std::size_t step;
    std::string name;
    double value;
};

struct RunRecord {
    RunConfig config;
    std::string run_name;
    std::string revision;
    double wall_seconds = 0.0;
    std::size_t n_steps = 0;
    std::string schedule_manifest;

    InferenceMode reported_mode = InferenceMode::student;
    std::map<InferenceMode, AccuracyMatrix> accuracy;
    std::map<InferenceMode, double> faa;
    std::map<InferenceMode, double> bt;  ///< absent for a single task

    double final_logits_accuracy = 0.0;
    std::optional<double> final_ncm_accuracy;
    ConfusionMatrix confusion;
    DriftSeries drift;
    std::vector<std::size_t> task_end_steps;
    std::vector<std::size_t> detected_boundaries;
    std::vector<MetricRow> log;

    double reported_faa() const { return faa.at(reported_mode); }
    std::optional<double> reported_bt() const;
};

/// Observer for the training steps of a run (e.g. to check phase order).
struct RunHooks {
    StepObserver on_phase;
};

/// Runs the full single-pass experiment. Validates cfg before any compute.
/// When `data` is null the dataset is loaded (or generated) from cfg. Results
/// are persisted under cfg.output_dir/<run name> when output_dir is set.
RunRecord run_experiment(const RunConfig& cfg, const Dataset* data = nullptr, const RunHooks& hooks = {});

/// Builds the dataset named by cfg (synthetic or from disk).
Dataset load_run_dataset(const RunConfig& cfg);

/// Writes config.txt, schedule.txt, metrics.tsv, accuracy_<mode>.tsv,
/// confusion.tsv, drift.tsv and record.json into dir.
void save_record(const RunRecord& r, const std::filesystem::path& dir);
/// Reads back the summary fields of record.json.
RunRecord load_record(const std::filesystem::path& dir);

struct SweepCell {
    std::vector<std::pair<std::string, std::string>> assignment;
    std::vector<double> faa;
    std::vector<double> bt;
    double lambda = 0.0;  ///< effective distillation weight of the cell
    std::vector<std::string> errors;
};

struct SweepResult {
    std::vector<std::string> keys;
    std::vector<SweepCell> cells;

    /// Tab-separated table with mean and std of FAA and BT per cell.
    std::string to_table() const;
};

/// Runs every cell of the cartesian product of the grid, repeating each with
/// seeds base.seed .. base.seed + n_seeds - 1. A failing run is recorded in
/// its cell and the sweep continues.
SweepResult sweep(const RunConfig& base, const Grid& grid, std::size_t n_seeds = 5, const Dataset* data = nullptr);

/// Writes SVG plots with TSV backing data into dir: confusion heatmap, drift
/// curve, accuracy matrix. Plots whose data is missing are skipped with a
/// warning on stderr. Returns the files written.
std::vector<std::filesystem::path> emit_plots(const RunRecord& r, const std::filesystem::path& dir);
/// alpha x lambda accuracy grid from a sweep over those two keys.
std::vector<std::filesystem::path> emit_sweep_plots(const SweepResult& s, const std::filesystem::path& dir);

/// Aggregates every record.json below dir into a table grouped by run name
/// without the seed suffix.
std::string report(const std::filesystem::path& dir);

double mean_of(const std::vector<double>& v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double std_of(const std::vector<double>& v);

}  // namespace mkd
