#include "qhybrid/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

#include "qhybrid/error.hpp"

#if __has_include(<sys/resource.h>)
#include <sys/resource.h>
#define QHYBRID_HAVE_RUSAGE 1
#endif

namespace qhybrid::train {

void train_config::validate() const {
    require(epochs >= 1, errc::config_error, "epochs must be >= 1");
    require(batch_size >= 1, errc::config_error, "batch size must be >= 1");
    require(lr > 0.0, errc::config_error, "learning rate must be positive");
    require(workers >= 1, errc::config_error, "workers must be >= 1");
}

std::uint64_t confusion_matrix::total() const {
    std::uint64_t t = 0;
    for (std::uint64_t c : counts) t += c;
    return t;
}

std::uint64_t confusion_matrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_classes; ++i) t += at(i, i);
    return t;
}

namespace {

void check_pair(std::span<const int> predictions, std::span<const int> labels) {
    require(!labels.empty(), errc::empty_split, "metrics need at least one sample");
    require(predictions.size() == labels.size(), errc::shape_mismatch,
            "predictions and labels differ in length");
}

struct class_counts {
    std::vector<std::uint64_t> tp, fp, fn;
};

class_counts tally(std::span<const int> predictions, std::span<const int> labels,
                   std::size_t n_classes) {
    class_counts cc{std::vector<std::uint64_t>(n_classes, 0), std::vector<std::uint64_t>(n_classes, 0),
                    std::vector<std::uint64_t>(n_classes, 0)};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(predictions[i]);
        require(y < n_classes && p < n_classes, errc::label_out_of_range,
                "prediction or label outside [0, n_classes)");
        if (p == y) {
            ++cc.tp[y];
        } else {
            ++cc.fp[p];
            ++cc.fn[y];
        }
    }
    return cc;
}

double safe_ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

double accuracy_score(std::span<const int> predictions, std::span<const int> labels) {
    check_pair(predictions, labels);
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double macro_precision(std::span<const int> predictions, std::span<const int> labels,
                       std::size_t n_classes) {
    check_pair(predictions, labels);
    const auto cc = tally(predictions, labels, n_classes);
    double acc = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) acc += safe_ratio(cc.tp[c], cc.tp[c] + cc.fp[c]);
    return acc / static_cast<double>(n_classes);
}

double macro_recall(std::span<const int> predictions, std::span<const int> labels,
                    std::size_t n_classes) {
    check_pair(predictions, labels);
    const auto cc = tally(predictions, labels, n_classes);
    double acc = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) acc += safe_ratio(cc.tp[c], cc.tp[c] + cc.fn[c]);
    return acc / static_cast<double>(n_classes);
}

double macro_f1_score(std::span<const int> predictions, std::span<const int> labels,
                      std::size_t n_classes) {
    check_pair(predictions, labels);
    const auto cc = tally(predictions, labels, n_classes);
    double acc = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const double p = safe_ratio(cc.tp[c], cc.tp[c] + cc.fp[c]);
        const double r = safe_ratio(cc.tp[c], cc.tp[c] + cc.fn[c]);
        acc += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return acc / static_cast<double>(n_classes);
}

confusion_matrix confusion_from_predictions(std::span<const int> predictions,
                                            std::span<const int> labels, std::size_t n_classes) {
    check_pair(predictions, labels);
    confusion_matrix cm(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(predictions[i]);
        require(y < n_classes && p < n_classes, errc::label_out_of_range,
                "prediction or label outside [0, n_classes)");
        ++cm.at(y, p);
    }
    return cm;
}

std::vector<int> predict_labels(const nn::tensor& logits) {
    require(logits.rank() == 2, errc::shape_mismatch, "predict expects [B,C] logits");
    std::vector<int> out(logits.dim(0));
    for (std::size_t b = 0; b < logits.dim(0); ++b) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.dim(1); ++c) {
            if (logits.at(b, c) > logits.at(b, best)) best = c;
        }
        out[b] = static_cast<int>(best);
    }
    return out;
}

metrics evaluate(model::model_graph& m, const data::dataset& split, std::size_t batch_size) {
    require(split.size() > 0, errc::empty_split, "evaluate needs a nonempty split");
    require(batch_size >= 1, errc::config_error, "batch size must be >= 1");
    split.validate();
    const std::size_t N = split.size();
    std::vector<int> predictions;
    predictions.reserve(N);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t len = std::min(batch_size, N - start);
        std::vector<std::size_t> batch_idx(len);
        for (std::size_t j = 0; j < len; ++j) batch_idx[j] = start + j;
        const data::batch b = data::gather(split, batch_idx);
        const nn::tensor x = data::normalize_batch(b.images, split.normalization);
        const nn::tensor logits = m.forward(x);
        const nn::ce_result ce = nn::softmax_cross_entropy(logits, b.labels);
        loss_sum += ce.loss * static_cast<double>(len);
        const auto preds = predict_labels(logits);
        predictions.insert(predictions.end(), preds.begin(), preds.end());
    }
    const std::size_t k = split.n_classes();
    metrics out;
    out.loss = loss_sum / static_cast<double>(N);
    out.accuracy = accuracy_score(predictions, split.labels);
    out.precision = macro_precision(predictions, split.labels, k);
    out.recall = macro_recall(predictions, split.labels, k);
    out.macro_f1 = macro_f1_score(predictions, split.labels, k);
    out.confusion = confusion_from_predictions(predictions, split.labels, k);
    std::vector<std::uint64_t> present(k, 0);
    for (int y : split.labels) ++present[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < k; ++c) {
        if (present[c] == 0) out.absent_classes.push_back(static_cast<int>(c));
    }
    return out;
}

double train_step(model::model_graph& m, nn::optimizer& opt, const nn::tensor& normalized_images,
                  std::span<const int> labels) {
    const nn::tensor logits = m.forward(normalized_images);
    const nn::ce_result ce = nn::softmax_cross_entropy(logits, labels);
    m.backward(ce.d_logits);
    auto params = m.params();
    opt.step(params);
    return ce.loss;
}

namespace {

nn::tensor sample_image(const nn::tensor& images, std::size_t j) {
    const std::size_t stride = images.dim(1) * images.dim(2) * images.dim(3);
    nn::tensor out({images.dim(1), images.dim(2), images.dim(3)});
    std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(j * stride), stride,
                out.data.begin());
    return out;
}

void store_image(nn::tensor& images, std::size_t j, const nn::tensor& img) {
    const std::size_t stride = images.dim(1) * images.dim(2) * images.dim(3);
    std::copy_n(img.data.begin(), stride,
                images.data.begin() + static_cast<std::ptrdiff_t>(j * stride));
}

} // namespace

std::vector<epoch_record> train_model(const train_config& config, model::model_graph& m,
                                      const data::dataset& train_split,
                                      const data::dataset& val_split) {
    config.validate();
    require(train_split.size() > 0, errc::empty_split, "training split is empty");
    require(val_split.size() > 0, errc::empty_split, "validation split is empty");
    train_split.validate();

    m.set_workers(config.workers);
    nn::optimizer opt(config.optimizer, config.lr);
    data::batch_iterator it(train_split.size(), config.batch_size, /*shuffle=*/true, config.seed);
    rng aug(rng::derive(config.seed, seed_tag::augment));

    std::vector<epoch_record> records;
    records.reserve(config.epochs);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        epoch_record rec;
        rec.epoch = epoch;
        const resource_usage usage = resource_log([&] {
            double loss_sum = 0.0;
            for (const auto& batch_idx : it.batches(epoch - 1)) {
                data::batch b = data::gather(train_split, batch_idx);
                if (config.augment) {
                    for (std::size_t j = 0; j < batch_idx.size(); ++j) {
                        store_image(b.images, j,
                                    data::augment_image(sample_image(b.images, j), aug,
                                                        train_split.flip_allowed));
                    }
                }
                const nn::tensor x = data::normalize_batch(b.images, train_split.normalization);
                const double loss = train_step(m, opt, x, b.labels);
                require(std::isfinite(loss), errc::diverged_loss,
                        "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(opt.step_count()));
                loss_sum += loss * static_cast<double>(batch_idx.size());
            }
            rec.train_loss = loss_sum / static_cast<double>(train_split.size());
            const metrics vm = evaluate(m, val_split, config.batch_size);
            rec.val_loss = vm.loss;
            rec.val_acc = vm.accuracy;
            rec.val_f1 = vm.macro_f1;
        });
        rec.seconds = usage.seconds;
        rec.peak_mem_bytes = usage.peak_mem_bytes;
        records.push_back(rec);
    }
    return records;
}

resource_usage resource_log(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    resource_usage u;
    u.seconds = std::chrono::duration<double>(t1 - t0).count();
#ifdef QHYBRID_HAVE_RUSAGE
    struct rusage ru {};
    if (getrusage(RUSAGE_SELF, &ru) == 0 && ru.ru_maxrss > 0) {
        u.peak_mem_bytes = static_cast<std::uint64_t>(ru.ru_maxrss) * 1024; // ru_maxrss is KiB
    }
#endif
    return u;
}

namespace {

constexpr char checkpoint_magic[4] = {'Q', 'H', 'C', 'P'};
constexpr std::uint32_t checkpoint_version = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64_le(std::string& out, double d) {
    std::uint64_t v = 0;
    std::memcpy(&v, &d, sizeof v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct byte_reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;
    const std::string& path;

    bool eof() const { return pos >= bytes.size(); }

    void need(std::size_t n) const {
        require(pos + n <= bytes.size(), errc::truncated_file,
                path + ": record runs past end of file");
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = std::uint32_t(bytes[pos]) | (std::uint32_t(bytes[pos + 1]) << 8) |
                          (std::uint32_t(bytes[pos + 2]) << 16) |
                          (std::uint32_t(bytes[pos + 3]) << 24);
        pos += 4;
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + std::size_t(i)]) << (8 * i);
        pos += 8;
        double d = 0.0;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data()) + pos, n);
        pos += n;
        return s;
    }
};

struct stored_param {
    std::vector<std::size_t> dims;
    std::vector<double> values;
};

} // namespace

void save_checkpoint(model::model_graph& m, const std::string& path) {
    std::string out;
    out.append(checkpoint_magic, 4);
    put_u32_le(out, checkpoint_version);
    for (const auto& p : m.params()) {
        put_u32_le(out, static_cast<std::uint32_t>(p.name.size()));
        out.append(p.name);
        put_u32_le(out, static_cast<std::uint32_t>(p.value->rank()));
        for (std::size_t d : p.value->shape) put_u32_le(out, static_cast<std::uint32_t>(d));
        for (double v : p.value->data) put_f64_le(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    require(f.good(), errc::io_error, "write failed on " + path);
}

void load_checkpoint(model::model_graph& m, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), errc::io_error, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    byte_reader r{bytes, 0, path};
    require(r.str(4) == std::string(checkpoint_magic, 4), errc::bad_magic,
            path + ": not a QHCP checkpoint");
    const std::uint32_t version = r.u32();
    require(version == checkpoint_version, errc::version_mismatch,
            path + ": checkpoint version " + std::to_string(version) + ", expected " +
                std::to_string(checkpoint_version));

    std::map<std::string, stored_param> stored;
    while (!r.eof()) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        stored_param sp;
        const std::uint32_t rank = r.u32();
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            sp.dims.push_back(r.u32());
            count *= sp.dims.back();
        }
        sp.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) sp.values[i] = r.f64();
        require(stored.emplace(name, std::move(sp)).second, errc::bad_magic,
                path + ": duplicate parameter " + name);
    }

    // Validate everything against the live model before touching it.
    auto params = m.params();
    require(stored.size() == params.size(), errc::shape_mismatch,
            path + ": checkpoint has " + std::to_string(stored.size()) + " parameters, model has " +
                std::to_string(params.size()));
    for (const auto& p : params) {
        const auto hit = stored.find(p.name);
        require(hit != stored.end(), errc::shape_mismatch,
                path + ": checkpoint lacks parameter " + p.name);
        require(hit->second.dims == p.value->shape, errc::shape_mismatch,
                path + ": parameter " + p.name + " has mismatched shape");
    }
    for (auto& p : params) {
        p.value->data = stored.at(p.name).values;
    }
}

void write_metrics_csv(std::span<const epoch_record> records, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open " + path + " for writing");
    f << "epoch,train_loss,val_loss,val_acc,val_f1,seconds,peak_mem_bytes\n";
    char buf[512];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.6f,", r.epoch, r.train_loss,
                      r.val_loss, r.val_acc, r.val_f1, r.seconds);
        f << buf;
        if (r.peak_mem_bytes) f << *r.peak_mem_bytes;
        f << "\n";
    }
    f.flush();
    require(f.good(), errc::io_error, "write failed on " + path);
}

} // namespace qhybrid::train
