#ifndef ADVSEL_DATASET_HPP
#define ADVSEL_DATASET_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "advsel/matrix.hpp"

namespace advsel {

/// Labeled collection of feature vectors in [0,1]^N with dense class ids.
/// label_names is non-empty only for sources with textual labels (CSV); it
/// maps class id -> original label in first-appearance order.
struct Dataset {
    Matrix features;              // M x N
    std::vector<int> labels;      // M entries in [0, class_count)
    std::size_t class_count = 0;
    std::vector<std::string> label_names;

    std::size_t size() const { return features.rows; }
    std::size_t feature_dim() const { return features.cols; }

    /// Throws if shapes, label range, or the [0,1] feature box are violated.
    void validate() const;

    /// New dataset holding the given rows, in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Parses the big-endian IDX image/label pair (magic 0x00000803 / 0x00000801),
/// scales pixel bytes into [0,1] and flattens images row-major. Malformed
/// input throws idx_error with the specific failure kind.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Loads a CSV with a header row. All columns except label_column become
/// features, min-max normalized per column into [0,1]; zero-range columns
/// map to 0. Labels become dense ids in first-appearance order.
Dataset load_csv(const std::string& path, const std::string& label_column);

/// Isotropic Gaussian blobs clamped to [0,1], one blob per class mean.
Dataset synth_gaussians(std::uint64_t seed, std::size_t samples_per_class,
                        std::size_t dims, const std::vector<std::vector<double>>& class_means,
                        double sigma);

/// Seed-deterministic stratified split. Fractions must sum to 1; per-class
/// counts follow largest-remainder rounding so every split's class histogram
/// stays within one sample of proportional.
struct SplitFractions {
    double train = 0.8;
    double validation = 0.0;
    double test = 0.2;
};
struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset test;
};
SplitResult split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

/// Binary dataset cache; save/load round-trips are bit-exact. Format
/// documented in the README.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace advsel

#endif
