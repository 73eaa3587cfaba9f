#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hcrnet/tensor.hpp"

namespace hcr {

/// Images are [32,32,3] with values in [0,1] and three identical channels.
struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return images.size(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    // Throws DataError when any invariant is broken.
    void validate() const;
};

// Grayscale plane of side*side values in [0,1] -> [side,side,3].
Tensor gray_to_input(std::span<const float> plane, std::size_t side = 32);

/// IDX image/label pair (magic 0x00000803 / 0x00000801, big-endian sizes).
/// Images up to 32x32 are zero-padded into the center of the 32x32 canvas;
/// larger ones are resampled. Classes are named "0".."9" (or up to the max
/// label present).
LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
std::vector<Tensor> load_idx_images(const std::filesystem::path& images_path);
std::vector<int> load_idx_labels(const std::filesystem::path& labels_path);

struct ImageDirOptions {
    // Invert images whose mean border intensity exceeds 0.5.
    bool auto_invert = true;
};

/// <root>/<class>/<image>.pgm, classes indexed by sorted directory name.
LabeledDataset load_image_dir(const std::filesystem::path& root, const ImageDirOptions& options = {});

struct StrokePoint {
    double x;
    double y;
};

struct StrokeSample {
    std::vector<std::vector<StrokePoint>> strokes;
    std::string label;
};

// {"label": "...", "strokes": [[[x,y], ...], ...]}
StrokeSample parse_stroke_sample(const std::string& json_text);

/// Fits the glyph's bounding box, aspect preserved, into the central 28x28
/// box of a black 32x32 canvas and draws 1-pixel segments of intensity 1.
/// y grows downward (row index).
Tensor rasterize_strokes(const StrokeSample& sample);

/// Every *.json file under `root` holds one sample; *.jsonl files hold one
/// sample per line. Classes are indexed by sorted label.
LabeledDataset load_stroke_dir(const std::filesystem::path& root);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-class stratified split. Each class contributes round(ratio * n_c)
/// samples to train (kept within [1, n_c - 1]); indices come back sorted.
Split split_indices(const LabeledDataset& d, double ratio, std::uint64_t seed);
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& d, double ratio, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& d, std::span<const std::size_t> indices);

// Stacks the selected images into [N,32,32,3].
Tensor make_batch(const LabeledDataset& d, std::span<const std::size_t> indices);

}  // namespace hcr
