#include "qhybrid/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>

#include "qhybrid/error.hpp"

namespace qhybrid::data {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    require(!in.bad(), errc::io_error, "read failed on " + path);
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
    require(off + 4 <= b.size(), errc::truncated_file, path + ": header past end of file");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::vector<std::string> digit_names() {
    std::vector<std::string> names;
    for (int i = 0; i < 10; ++i) names.push_back(std::to_string(i));
    return names;
}

std::vector<std::string> generic_names(std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
    return names;
}

// reflect index into [0, n) without repeating the edge sample
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    if (i < 0) i = -i;
    if (i >= sn) i = 2 * sn - 2 - i;
    return static_cast<std::size_t>(i);
}

std::vector<std::vector<std::size_t>> indices_by_class(const dataset& d) {
    std::vector<std::vector<std::size_t>> per_class(d.n_classes());
    for (std::size_t i = 0; i < d.size(); ++i) {
        per_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
    }
    return per_class;
}

dataset take_indices(const dataset& d, const std::vector<std::size_t>& idx, split_tag tag) {
    dataset out;
    const auto s = d.sample_shape();
    out.images = nn::tensor({idx.size(), s[0], s[1], s[2]});
    out.labels.resize(idx.size());
    const std::size_t stride = s[0] * s[1] * s[2];
    for (std::size_t j = 0; j < idx.size(); ++j) {
        std::copy_n(d.images.data.begin() + static_cast<std::ptrdiff_t>(idx[j] * stride), stride,
                    out.images.data.begin() + static_cast<std::ptrdiff_t>(j * stride));
        out.labels[j] = d.labels[idx[j]];
    }
    out.class_names = d.class_names;
    out.split = tag;
    out.normalization = d.normalization;
    out.flip_allowed = d.flip_allowed;
    return out;
}

} // namespace

std::vector<std::size_t> dataset::sample_shape() const {
    return {images.dim(1), images.dim(2), images.dim(3)};
}

void dataset::validate() const {
    require(images.rank() == 4, errc::shape_mismatch, "dataset images must be [N,C,H,W]");
    require(images.dim(0) == labels.size(), errc::count_mismatch,
            "image count and label count differ");
    for (int y : labels) {
        require(y >= 0 && static_cast<std::size_t>(y) < n_classes(), errc::label_out_of_range,
                "label " + std::to_string(y) + " outside the declared class set");
    }
}

dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    require(read_be32(img, 0, images_path) == 0x00000803u, errc::bad_magic,
            images_path + ": not an IDX image file");
    const std::size_t n = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    require(img.size() >= 16 + n * rows * cols, errc::truncated_file,
            images_path + ": shorter than header claims");

    const auto lab = read_file(labels_path);
    require(read_be32(lab, 0, labels_path) == 0x00000801u, errc::bad_magic,
            labels_path + ": not an IDX label file");
    const std::size_t n_lab = read_be32(lab, 4, labels_path);
    require(lab.size() >= 8 + n_lab, errc::truncated_file,
            labels_path + ": shorter than header claims");
    require(n == n_lab, errc::count_mismatch,
            "image count " + std::to_string(n) + " != label count " + std::to_string(n_lab));

    dataset d;
    d.images = nn::tensor({n, 1, rows, cols});
    for (std::size_t i = 0; i < n * rows * cols; ++i) {
        d.images.data[i] = static_cast<double>(img[16 + i]) / 255.0;
    }
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char y = lab[8 + i];
        require(y < 10, errc::label_out_of_range,
                labels_path + ": label " + std::to_string(int(y)) + " outside [0,10)");
        d.labels[i] = y;
    }
    d.class_names = digit_names();
    d.normalization = {{0.1307}, {0.3081}};
    d.flip_allowed = false; // digits are not mirror-symmetric
    return d;
}

dataset load_cifar100_binary(const std::string& path) {
    const auto bytes = read_file(path);
    constexpr std::size_t record = 3074; // coarse, fine, 32*32*3 planar RGB
    require(!bytes.empty() && bytes.size() % record == 0, errc::truncated_file,
            path + ": size is not a whole number of 3074-byte records");
    const std::size_t n = bytes.size() / record;
    dataset d;
    d.images = nn::tensor({n, 3, 32, 32});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char fine = bytes[i * record + 1];
        require(fine < 100, errc::label_out_of_range,
                path + ": fine label " + std::to_string(int(fine)) + " outside [0,100)");
        d.labels[i] = fine;
        const std::size_t src = i * record + 2;
        const std::size_t dst = i * 3072;
        for (std::size_t p = 0; p < 3072; ++p) {
            d.images.data[dst + p] = static_cast<double>(bytes[src + p]) / 255.0;
        }
    }
    d.class_names = generic_names(100);
    d.normalization = {{0.5071, 0.4865, 0.4409}, {0.2673, 0.2564, 0.2762}};
    d.flip_allowed = true;
    return d;
}

dataset synthetic_dataset(std::size_t n_classes, std::size_t n_per_class,
                          const std::vector<std::size_t>& shape, std::uint64_t seed,
                          double noise_sigma) {
    require(n_classes >= 1 && n_per_class >= 1, errc::config_error,
            "synthetic dataset needs at least one class and one sample");
    require(shape.size() == 3, errc::shape_mismatch, "synthetic shape must be [C,H,W]");
    const std::size_t C = shape[0], H = shape[1], W = shape[2];
    require(C >= 1 && H >= 2 && W >= 2, errc::shape_mismatch, "synthetic image too small");

    const double side = static_cast<double>(std::min(H, W));
    const double ring_radius = 0.34 * side;
    const double bump_sigma = 0.10 * side;
    const double cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double cx = (static_cast<double>(W) - 1.0) / 2.0;
    constexpr double two_pi = 6.283185307179586476925286766559;

    rng r(seed);
    dataset d;
    d.images = nn::tensor({n_classes * n_per_class, C, H, W});
    d.labels.resize(n_classes * n_per_class);
    std::size_t i = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double ang = two_pi * static_cast<double>(c) / static_cast<double>(n_classes);
        const double by0 = cy + ring_radius * std::sin(ang);
        const double bx0 = cx + ring_radius * std::cos(ang);
        for (std::size_t k = 0; k < n_per_class; ++k, ++i) {
            const double by = by0 + 0.7 * r.normal();
            const double bx = bx0 + 0.7 * r.normal();
            for (std::size_t ch = 0; ch < C; ++ch) {
                for (std::size_t y = 0; y < H; ++y) {
                    for (std::size_t x = 0; x < W; ++x) {
                        const double dy = static_cast<double>(y) - by;
                        const double dx = static_cast<double>(x) - bx;
                        double v = std::exp(-(dy * dy + dx * dx) / (2.0 * bump_sigma * bump_sigma));
                        v += noise_sigma * r.normal();
                        d.images.at(i, ch, y, x) = std::clamp(v, 0.0, 1.0);
                    }
                }
            }
            d.labels[i] = static_cast<int>(c);
        }
    }
    d.class_names = generic_names(n_classes);
    d.normalization = {std::vector<double>(C, 0.5), std::vector<double>(C, 0.5)};
    d.flip_allowed = false; // class identity is angular position; flips would alias classes
    return d;
}

nn::tensor normalize_batch(const nn::tensor& raw, const norm_stats& stats) {
    require(raw.rank() == 4, errc::shape_mismatch, "normalize expects [N,C,H,W]");
    const std::size_t C = raw.dim(1);
    require(stats.mean.size() == C && stats.stddev.size() == C, errc::shape_mismatch,
            "normalization constants must be per channel");
    nn::tensor out = raw;
    const std::size_t plane = raw.dim(2) * raw.dim(3);
    for (std::size_t n = 0; n < raw.dim(0); ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            double* p = out.data.data() + (n * C + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) p[j] = (p[j] - stats.mean[c]) / stats.stddev[c];
        }
    }
    return out;
}

nn::tensor denormalize_batch(const nn::tensor& normed, const norm_stats& stats) {
    require(normed.rank() == 4, errc::shape_mismatch, "denormalize expects [N,C,H,W]");
    const std::size_t C = normed.dim(1);
    require(stats.mean.size() == C && stats.stddev.size() == C, errc::shape_mismatch,
            "normalization constants must be per channel");
    nn::tensor out = normed;
    const std::size_t plane = normed.dim(2) * normed.dim(3);
    for (std::size_t n = 0; n < normed.dim(0); ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            double* p = out.data.data() + (n * C + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) p[j] = p[j] * stats.stddev[c] + stats.mean[c];
        }
    }
    return out;
}

nn::tensor augment_image(const nn::tensor& image, rng& r, bool allow_flip) {
    require(image.rank() == 3, errc::shape_mismatch, "augment expects one [C,H,W] image");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    constexpr std::size_t pad = 4;
    require(H > pad && W > pad, errc::shape_mismatch, "image too small for 4-pixel padded crop");

    nn::tensor flipped = image;
    if (allow_flip && r.uniform() < 0.5) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t x = 0; x < W; ++x) {
                    flipped.data[(c * H + y) * W + x] = image.data[(c * H + y) * W + (W - 1 - x)];
                }
            }
        }
    }

    const std::size_t oy = r.index(2 * pad + 1);
    const std::size_t ox = r.index(2 * pad + 1);
    nn::tensor out({C, H, W});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
            const std::size_t sy =
                reflect_index(static_cast<std::ptrdiff_t>(y + oy) - static_cast<std::ptrdiff_t>(pad), H);
            for (std::size_t x = 0; x < W; ++x) {
                const std::size_t sx = reflect_index(
                    static_cast<std::ptrdiff_t>(x + ox) - static_cast<std::ptrdiff_t>(pad), W);
                out.data[(c * H + y) * W + x] = flipped.data[(c * H + sy) * W + sx];
            }
        }
    }
    return out;
}

split_result stratified_split(const dataset& d, double val_fraction, std::uint64_t seed) {
    require(val_fraction > 0.0 && val_fraction < 1.0, errc::config_error,
            "val_fraction must lie in (0,1)");
    d.validate();
    auto per_class = indices_by_class(d);
    std::vector<std::size_t> train_idx, val_idx;
    const std::uint64_t base = rng::derive(seed, seed_tag::split);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        auto& idx = per_class[c];
        rng rc(rng::derive(base, c));
        rc.shuffle(idx);
        const auto n_val =
            static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * val_fraction + 0.5));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            (j < n_val ? val_idx : train_idx).push_back(idx[j]);
        }
    }
    require(!train_idx.empty() && !val_idx.empty(), errc::empty_split,
            "split leaves an empty side (train " + std::to_string(train_idx.size()) + ", val " +
                std::to_string(val_idx.size()) + ")");
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {take_indices(d, train_idx, split_tag::train), take_indices(d, val_idx, split_tag::val)};
}

dataset stratified_subset(const dataset& d, std::size_t n_total, std::uint64_t seed) {
    d.validate();
    const std::size_t k = d.n_classes();
    require(n_total >= 1ul && n_total % k == 0, errc::config_error,
            "subset size must be a positive multiple of the class count " + std::to_string(k));
    const std::size_t per = n_total / k;
    auto per_class = indices_by_class(d);
    std::vector<std::size_t> chosen;
    const std::uint64_t base = rng::derive(seed, seed_tag::subset);
    for (std::size_t c = 0; c < k; ++c) {
        auto& idx = per_class[c];
        require(idx.size() >= per, errc::data_error,
                "class " + std::to_string(c) + " has only " + std::to_string(idx.size()) +
                    " samples, need " + std::to_string(per));
        rng rc(rng::derive(base, c));
        rc.shuffle(idx);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per));
    }
    std::sort(chosen.begin(), chosen.end());
    return take_indices(d, chosen, d.split);
}

batch_iterator::batch_iterator(std::size_t n_samples, std::size_t batch_size, bool shuffle,
                               std::uint64_t seed, bool drop_last)
    : n_(n_samples), batch_size_(batch_size), shuffle_(shuffle), drop_last_(drop_last), seed_(seed) {
    require(batch_size >= 1, errc::config_error, "batch size must be >= 1");
}

std::vector<std::vector<std::size_t>> batch_iterator::batches(std::size_t epoch) const {
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_) {
        rng r(rng::derive(rng::derive(seed_, seed_tag::shuffle), epoch));
        r.shuffle(order);
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n_; start += batch_size_) {
        const std::size_t len = std::min(batch_size_, n_ - start);
        if (drop_last_ && len < batch_size_) break;
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + len));
    }
    return out;
}

batch gather(const dataset& d, std::span<const std::size_t> indices) {
    const auto s = d.sample_shape();
    batch b;
    b.images = nn::tensor({indices.size(), s[0], s[1], s[2]});
    b.labels.resize(indices.size());
    const std::size_t stride = s[0] * s[1] * s[2];
    for (std::size_t j = 0; j < indices.size(); ++j) {
        require(indices[j] < d.size(), errc::index_out_of_range, "batch index past dataset end");
        std::copy_n(d.images.data.begin() + static_cast<std::ptrdiff_t>(indices[j] * stride),
                    stride, b.images.data.begin() + static_cast<std::ptrdiff_t>(j * stride));
        b.labels[j] = d.labels[indices[j]];
    }
    return b;
}

} // namespace qhybrid::data
