#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qhybrid::runner {

// One JSON document drives every command; flags are merged on top by the
// CLI before parsing. Unknown keys are rejected so typos fail loudly.
struct run_config {
    std::string dataset = "synthetic"; // mnist | cifar100 | synthetic
    std::string model = "hybrid";      // hybrid | classical
    std::string data_dir;              // falls back to $QHYBRID_DATA_DIR
    std::string out_dir = "out";
    std::string checkpoint;            // input checkpoint for evaluate/attack/analyze
    std::string weights;               // JSON weight file for render-circuit

    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::string optimizer = "adam"; // adam | sgd
    std::uint64_t seed = 42;
    int workers = 1;
    double val_fraction = 0.1;
    std::optional<bool> augment; // default: on for mnist/cifar100, off for synthetic

    std::size_t qubits = 4;
    std::size_t layers = 2;

    double epsilon = 0.1;
    std::size_t pca_components = 2;

    std::size_t train_subset = 0; // 0 = use everything
    std::size_t test_subset = 0;

    std::size_t synthetic_classes = 10;
    std::size_t synthetic_train_per_class = 50;
    std::size_t synthetic_test_per_class = 20;
    std::vector<std::size_t> synthetic_shape = {1, 28, 28};
    double synthetic_noise = 0.05;

    bool augment_effective() const {
        return augment.value_or(dataset != "synthetic");
    }
};

// Throws error(config_error) on malformed JSON, unknown keys, bad types,
// or out-of-range values.
run_config parse_config(const std::string& json_text);
run_config load_config_file(const std::string& path);
std::string config_to_json(const run_config& cfg);

struct run_result {
    int exit_code = 0;   // 0 ok, 2 config, 3 data, 4 numeric, 5 checkpoint
    std::string output;  // human-readable summary (files are written first)
    std::string message; // error description when exit_code != 0
};

// Commands: train, evaluate, attack, analyze, describe, render-circuit.
// Each writes its machine-readable artifacts into cfg.out_dir before
// composing the summary, and never throws — failures land in the result.
run_result run_command(const std::string& command, const run_config& cfg);

} // namespace qhybrid::runner
