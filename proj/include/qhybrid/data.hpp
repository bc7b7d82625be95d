#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qhybrid/rng.hpp"
#include "qhybrid/tensor.hpp"

namespace qhybrid::data {

enum class split_tag { train, val, test };

// Per-channel normalization constants, declared with the dataset they
// belong to (they are configuration, not measured from the data).
struct norm_stats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct dataset {
    nn::tensor images; // [N,C,H,W], raw pixels in [0,1]
    std::vector<int> labels;
    std::vector<std::string> class_names;
    split_tag split = split_tag::train;
    norm_stats normalization;
    bool flip_allowed = false; // horizontal flip is for RGB sets only

    std::size_t size() const { return labels.size(); }
    std::size_t n_classes() const { return class_names.size(); }
    std::vector<std::size_t> sample_shape() const; // [C,H,W]
    void validate() const;
};

// IDX pair (big-endian magics 0x00000803 images / 0x00000801 labels),
// pixels scaled to [0,1].
dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Binary records of 3074 bytes: coarse label, fine label, 3072 RGB-planar
// pixels. Fine labels are used.
dataset load_cifar100_binary(const std::string& path);

// Class-conditional Gaussian bumps placed on a circle around the image
// center, one angular position per class, plus per-pixel noise. Linearly
// separable at low noise; bit-identical for a given seed.
dataset synthetic_dataset(std::size_t n_classes, std::size_t n_per_class,
                          const std::vector<std::size_t>& shape, std::uint64_t seed,
                          double noise_sigma = 0.05);

// (x - mean) / std per channel, and its exact inverse.
nn::tensor normalize_batch(const nn::tensor& raw, const norm_stats& stats);
nn::tensor denormalize_batch(const nn::tensor& normed, const norm_stats& stats);

// Train-split augmentation for one [C,H,W] image: horizontal flip with
// p=0.5 when allow_flip, then random crop from a 4-pixel reflection pad.
nn::tensor augment_image(const nn::tensor& image, rng& r, bool allow_flip);

struct split_result {
    dataset train;
    dataset val;
};

// Disjoint, exhaustive, per-class stratified split; deterministic per seed.
split_result stratified_split(const dataset& d, double val_fraction, std::uint64_t seed);

// n_total samples drawn evenly across classes (n_total must divide evenly);
// deterministic per seed.
dataset stratified_subset(const dataset& d, std::size_t n_total, std::uint64_t seed);

// Index batches for one epoch; a fresh deterministic order per (seed,
// epoch). Without drop_last every index appears exactly once per epoch.
class batch_iterator {
public:
    batch_iterator(std::size_t n_samples, std::size_t batch_size, bool shuffle,
                   std::uint64_t seed, bool drop_last = false);

    std::vector<std::vector<std::size_t>> batches(std::size_t epoch) const;
    std::size_t n_samples() const { return n_; }
    std::size_t batch_size() const { return batch_size_; }

private:
    std::size_t n_, batch_size_;
    bool shuffle_, drop_last_;
    std::uint64_t seed_;
};

struct batch {
    nn::tensor images; // [b,C,H,W]
    std::vector<int> labels;
};

batch gather(const dataset& d, std::span<const std::size_t> indices);

} // namespace qhybrid::data
