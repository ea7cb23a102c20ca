#pragma once

// Run configuration. Files use one `key = value` pair per line; `#` starts a
// comment. Every key below can also be given as a command-line override.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mkd/augmentation.hpp"
#include "mkd/datastream.hpp"
#include "mkd/model.hpp"
#include "mkd/momentum_teacher.hpp"
#include "mkd/optimizer.hpp"

namespace mkd {

enum class Method { er, derpp, erace };
enum class MkdMode { off, on, single_view };
enum class SnapshotKd { off, low_quality, high_quality };

std::string to_string(Method m);
std::string to_string(MkdMode m);
std::string to_string(SnapshotKd m);
Method parse_method(const std::string& s);
MkdMode parse_mkd_mode(const std::string& s);
SnapshotKd parse_snapshot_kd(const std::string& s);

struct RunConfig {
    // data
    std::string dataset = "synth-digits";
    std::optional<std::filesystem::path> data_root;
    std::size_t synth_train_per_class = 500;
    std::size_t synth_test_per_class = 100;
    std::size_t synth_image_size = 16;
    double synth_difficulty = 1.0;
    std::uint64_t dataset_seed = 0;

    // scenario
    std::size_t n_tasks = 5;
    BoundaryMode boundary_mode = BoundaryMode::clear;
    std::size_t blur_scale = 0;
    std::size_t memory_size = 500;
    std::size_t stream_batch = 10;
    std::size_t mem_retrieval_cap = 64;

    // objective
    Method method = Method::er;
    MkdMode mkd = MkdMode::off;
    InferenceMode inference_mode = InferenceMode::averaged;
    double alpha = 0.01;
    std::optional<double> lambda_override;
    double tau = 4.0;
    double derpp_alpha = 0.1;
    double derpp_beta = 0.5;
    SnapshotKd snapshot_kd = SnapshotKd::off;
    double snapshot_lambda = 0.01;
    std::size_t snapshot_epochs = 5;

    // optimization
    OptimizerKind optimizer = OptimizerKind::sgd;
    double lr = 0.1;
    double weight_decay = 0.0;
    double momentum = 0.0;
    AugStrategy aug_strategy = AugStrategy::full;
    /// Whether the baseline objective sees an augmented view of the combined batch.
    bool baseline_aug = true;

    // model
    Backbone backbone = Backbone::cnn;
    std::vector<std::size_t> conv_channels = {16, 32};
    std::vector<std::size_t> hidden = {};
    std::size_t feature_dim = 64;

    // bookkeeping
    std::uint64_t seed = 0;
    /// Extra evaluation every eval_every stream batches; 0 means end of task only.
    std::size_t eval_every = 0;
    /// Drift sampling period in stream batches; 0 disables drift tracking.
    std::size_t drift_every = 50;
    std::size_t drift_subset = 256;
    std::size_t boundary_min_gap = 100;
    std::optional<std::filesystem::path> output_dir;
    std::string run_name;

    /// Applies one key/value pair. Throws std::invalid_argument for an unknown
    /// key or an unparsable value.
    void set(const std::string& key, const std::string& value);
    /// Throws std::invalid_argument describing the first inconsistency.
    void validate() const;
    /// Every key with its current value, in a stable order.
    std::vector<std::pair<std::string, std::string>> to_pairs() const;
    std::string to_text() const;

    DistillConfig distill() const;
    OptimizerConfig optimizer_config() const;
    /// A name derived from the objective-related keys and the seed.
    std::string default_run_name() const;
};

/// Parses `key = value` lines.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_text(const std::string& text, RunConfig base = {});
/// Applies "key=value" strings on top of cfg.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// Grid file: `key = v1, v2, ...` per line.
using Grid = std::vector<std::pair<std::string, std::vector<std::string>>>;
Grid parse_grid(const std::string& text);
Grid load_grid(const std::filesystem::path& path);

}  // namespace mkd
