#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mkd/tensor.hpp"

namespace mkd {

struct ImageShape {
    std::size_t channels = 1;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t size() const { return channels * height * width; }
    bool operator==(const ImageShape&) const = default;
};

/// Registry entry: class count and on-disk shape of a known dataset id.
struct DatasetInfo {
    std::string id;
    std::size_t n_classes = 0;
    ImageShape shape;
    bool synthetic = false;
};

/// Throws std::invalid_argument for an unknown id.
const DatasetInfo& dataset_info(const std::string& id);
std::vector<std::string> known_datasets();

/// Train/test split with pixel values in [0, 1].
struct Dataset {
    std::string id;
    std::size_t n_classes = 0;
    ImageShape shape;
    Tensor train_images;  ///< [N, C, H, W]
    std::vector<int> train_labels;
    Tensor test_images;
    std::vector<int> test_labels;

    std::size_t train_size() const { return train_labels.size(); }
    std::size_t test_size() const { return test_labels.size(); }
};

struct SyntheticOptions {
    std::size_t train_per_class = 500;
    std::size_t test_per_class = 100;
    std::size_t image_size = 16;
    /// Scales geometric jitter and pixel noise; 1.0 is the default difficulty.
    double difficulty = 1.0;
    std::uint64_t seed = 0;
};

/// Procedurally rendered handwritten-digit-like glyphs (10 classes, 1 channel).
Dataset make_synth_digits(const SyntheticOptions& opt);

/// Loads `<root>/<id>/` laid out as
///   meta.json                    {"n_classes", "channels", "height", "width"}
///   train/class_<k>.f32          float32 little-endian, N x C x H x W, values in [0, 1]
///   test/class_<k>.f32
Dataset load_dataset_dir(const std::filesystem::path& root, const std::string& id);
void save_dataset_dir(const Dataset& d, const std::filesystem::path& root);

/// Dataset root: explicit value, else $MKD_DATA_ROOT, else "./data".
std::filesystem::path dataset_root(const std::optional<std::filesystem::path>& explicit_root = std::nullopt);

/// Synthetic ids are generated; every other known id is read from the dataset root.
Dataset load_dataset(const std::string& id, const SyntheticOptions& synth,
                     const std::optional<std::filesystem::path>& root = std::nullopt);

}  // namespace mkd
