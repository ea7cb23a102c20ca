#pragma once

// Class-incremental task schedules and the single-pass training stream.
//
// A stream is planned first (which sample goes to which position) and its
// batches are materialized from the dataset on demand, so long streams do
// not hold a second copy of the training images.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mkd/dataset.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

enum class BoundaryMode { clear, blurry };

std::string to_string(BoundaryMode m);
BoundaryMode parse_boundary_mode(const std::string& s);

/// Sorted class ids.
using ClassSet = std::vector<int>;

struct TaskSchedule {
    std::string dataset_id;
    std::size_t n_classes = 0;
    std::vector<ClassSet> tasks;
    BoundaryMode boundary_mode = BoundaryMode::clear;
    std::size_t blur_scale = 0;
    std::uint64_t seed = 0;

    std::size_t n_tasks() const noexcept { return tasks.size(); }
    /// Task holding class c, or -1 if c is outside the class universe.
    int task_of(int c) const;
    /// Text manifest, one line per task: "task <k>: <ids...>".
    std::string manifest() const;
    void write_manifest(const std::filesystem::path& path) const;
};

/// Splits the dataset's classes into n_tasks equal, disjoint sets. The
/// assignment is a seeded permutation of the sorted class ids.
TaskSchedule build_schedule(const std::string& dataset_id, std::size_t n_tasks, BoundaryMode mode,
                            std::size_t blur_scale, std::uint64_t seed);
/// Same, for an explicit class count (used for datasets outside the registry).
TaskSchedule build_schedule(const std::string& dataset_id, std::size_t n_classes, std::size_t n_tasks,
                            BoundaryMode mode, std::size_t blur_scale, std::uint64_t seed);

struct StreamBatch {
    Tensor images;  ///< [B, C, H, W]
    std::vector<int> labels;
    std::vector<std::size_t> sample_ids;  ///< rows of the training split
    std::size_t step = 0;
    std::optional<std::size_t> task_hint;

    std::size_t size() const noexcept { return labels.size(); }
};

/// Position-level description of a stream.
struct StreamPlan {
    std::vector<std::size_t> order;        ///< training-split row per stream position
    std::vector<std::size_t> origin_task;  ///< true task of each position
    /// Probability that the position draws from the later of the two tasks
    /// around it: 0 or 1 outside transition windows, strictly between inside.
    std::vector<double> mix_prob;
    std::vector<std::size_t> batch_begin;  ///< first position of each batch, plus a final sentinel
    std::vector<std::optional<std::size_t>> task_hint;  ///< per batch
    /// Batch index after which task k nominally ends (the centre of the
    /// transition window in blurry mode).
    std::vector<std::size_t> task_end_batch;

    std::size_t n_batches() const noexcept { return task_hint.size(); }
};

class Stream {
public:
    Stream(const Dataset& data, StreamPlan plan);

    std::size_t size() const noexcept { return plan_.n_batches(); }
    StreamBatch batch(std::size_t i) const;
    const StreamPlan& plan() const noexcept { return plan_; }

private:
    const Dataset* data_;
    StreamPlan plan_;
};

/// Tasks in schedule order, samples shuffled within their task, batches never
/// cross a task (the last batch of a task may be short).
Stream iter_clear(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size, std::uint64_t seed);

/// A window of blur_scale positions around each boundary mixes the two tasks
/// with a linear ramp: position j of the window draws from the later task with
/// probability (j + 0.5) / blur_scale. The window takes floor(blur_scale / 2)
/// samples from the end of the earlier task and the rest from the start of the
/// later one. blur_scale = 0 gives the clear stream without task hints.
Stream iter_blurry(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size,
                   std::size_t blur_scale, std::uint64_t seed);

/// Dispatches on schedule.boundary_mode.
Stream make_stream(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size, std::uint64_t seed);

/// Test-split rows whose label belongs to task k.
std::vector<std::size_t> task_test_rows(const Dataset& data, const TaskSchedule& schedule, std::size_t k);

}  // namespace mkd
