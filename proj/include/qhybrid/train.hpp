#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qhybrid/data.hpp"
#include "qhybrid/model.hpp"
#include "qhybrid/nn.hpp"

namespace qhybrid::train {

struct train_config {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    nn::opt_kind optimizer = nn::opt_kind::adam;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    bool augment = true; // train split only; flip further gated per dataset
    int workers = 1;

    void validate() const; // epochs >= 1, batch_size >= 1, lr > 0
};

struct epoch_record {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double val_f1 = 0.0;
    double seconds = 0.0;
    std::optional<std::uint64_t> peak_mem_bytes; // absent when the OS query fails
};

struct confusion_matrix {
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> counts; // row-major, rows = true class

    explicit confusion_matrix(std::size_t n = 0) : n_classes(n), counts(n * n, 0) {}

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * n_classes + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
};

struct metrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double precision = 0.0; // macro
    double recall = 0.0;    // macro
    double macro_f1 = 0.0;
    confusion_matrix confusion;
    std::vector<int> absent_classes; // no true samples in the split; F1 counted as 0
};

// Per-sample metric functions, computed straight from the prediction and
// label arrays. confusion_from_predictions builds the matrix separately so
// the trace/row/column identities are a real cross-check.
double accuracy_score(std::span<const int> predictions, std::span<const int> labels);
double macro_precision(std::span<const int> predictions, std::span<const int> labels,
                       std::size_t n_classes);
double macro_recall(std::span<const int> predictions, std::span<const int> labels,
                    std::size_t n_classes);
double macro_f1_score(std::span<const int> predictions, std::span<const int> labels,
                      std::size_t n_classes);
confusion_matrix confusion_from_predictions(std::span<const int> predictions,
                                            std::span<const int> labels, std::size_t n_classes);

// argmax per row, first index on ties
std::vector<int> predict_labels(const nn::tensor& logits);

// Full pass over a split (no augmentation); loss is the mean cross-entropy.
metrics evaluate(model::model_graph& m, const data::dataset& split,
                 std::size_t batch_size = 128);

// One optimizer step on an already-normalized batch; returns the batch loss
// measured before the step.
double train_step(model::model_graph& m, nn::optimizer& opt, const nn::tensor& normalized_images,
                  std::span<const int> labels);

// Mini-batch training with per-epoch validation records. Deterministic for
// a fixed seed when workers == 1. Throws diverged_loss on non-finite loss.
std::vector<epoch_record> train_model(const train_config& config, model::model_graph& m,
                                      const data::dataset& train_split,
                                      const data::dataset& val_split);

struct resource_usage {
    double seconds = 0.0;
    std::optional<std::uint64_t> peak_mem_bytes;
};

// Wall-clock (monotonic) plus best-effort peak RSS; memory is absent when
// the platform query fails, never guessed.
resource_usage resource_log(const std::function<void()>& fn);

// Parameter archive: magic "QHCP", version u32 LE, then per-parameter
// records (name_len u32 LE, name bytes, rank u32 LE, dims u32 LE each,
// float64 LE values) until EOF. Load matches entries to the model by name
// and shape and applies nothing on failure.
void save_checkpoint(model::model_graph& m, const std::string& path);
void load_checkpoint(model::model_graph& m, const std::string& path);

// Header epoch,train_loss,val_loss,val_acc,val_f1,seconds,peak_mem_bytes;
// one row per epoch, empty last field when memory is absent.
void write_metrics_csv(std::span<const epoch_record> records, const std::string& path);

} // namespace qhybrid::train
