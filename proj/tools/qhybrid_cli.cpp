// Command-line front end. Everything goes through the C API of the shared
// library: flags are merged over an optional JSON config file (flags win)
// and the merged document drives the run.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhybrid/capi.h"

namespace {

int exit_code_for(qh_status s) {
    switch (s) {
        case QH_OK: return 0;
        case QH_ERR_CONFIG: return 2;
        case QH_ERR_DATA: return 3;
        case QH_ERR_NUMERIC: return 4;
        case QH_ERR_CHECKPOINT: return 5;
        default: return 2;
    }
}

struct flag_store {
    std::string config_path, dataset, model, out_dir, data_dir, checkpoint, weights;
    std::uint64_t seed = 0;
    long long epochs = 0, batch_size = 0, qubits = 0, layers = 0, workers = 0;
    double lr = 0.0, epsilon = 0.0;
};

void add_common_options(CLI::App* sub, flag_store& fs) {
    sub->add_option("--config", fs.config_path, "JSON config file; flags override its values");
    sub->add_option("--dataset", fs.dataset, "mnist, cifar100, or synthetic");
    sub->add_option("--model", fs.model, "hybrid or classical");
    sub->add_option("--epochs", fs.epochs, "training epochs");
    sub->add_option("--batch-size", fs.batch_size, "mini-batch size");
    sub->add_option("--lr", fs.lr, "learning rate");
    sub->add_option("--seed", fs.seed, "run seed");
    sub->add_option("--qubits", fs.qubits, "quantum register width (1-10)");
    sub->add_option("--layers", fs.layers, "entangler layer count");
    sub->add_option("--epsilon", fs.epsilon, "attack strength in raw pixel units");
    sub->add_option("--out", fs.out_dir, "output directory");
    sub->add_option("--workers", fs.workers, "per-batch worker threads (1 = deterministic)");
    sub->add_option("--data-dir", fs.data_dir, "dataset directory (default $QHYBRID_DATA_DIR)");
    sub->add_option("--checkpoint", fs.checkpoint, "model checkpoint to load");
    sub->add_option("--weights", fs.weights, "JSON weight file for render-circuit");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid quantum-classical image classifier"};
    app.require_subcommand(1);
    flag_store fs;
    for (const char* name :
         {"train", "evaluate", "attack", "analyze", "describe", "render-circuit"}) {
        add_common_options(app.add_subcommand(name), fs);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();

    nlohmann::json doc = nlohmann::json::object();
    std::string raw_config;
    if (sub->count("--config") > 0) {
        std::ifstream f(fs.config_path);
        if (!f.good()) {
            std::fprintf(stderr, "error: cannot open config file %s\n", fs.config_path.c_str());
            return 2;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        raw_config = ss.str();
        try {
            doc = nlohmann::json::parse(raw_config);
        } catch (const std::exception&) {
            doc = nlohmann::json(); // forward the raw text; the library reports the parse error
        }
    }

    std::string config_text;
    if (doc.is_object()) {
        const auto set_str = [&](const char* flag, const char* key, const std::string& v) {
            if (sub->count(flag) > 0) doc[key] = v;
        };
        set_str("--dataset", "dataset", fs.dataset);
        set_str("--model", "model", fs.model);
        set_str("--out", "out_dir", fs.out_dir);
        set_str("--data-dir", "data_dir", fs.data_dir);
        set_str("--checkpoint", "checkpoint", fs.checkpoint);
        set_str("--weights", "weights", fs.weights);
        if (sub->count("--epochs") > 0) doc["epochs"] = fs.epochs;
        if (sub->count("--batch-size") > 0) doc["batch_size"] = fs.batch_size;
        if (sub->count("--lr") > 0) doc["lr"] = fs.lr;
        if (sub->count("--seed") > 0) doc["seed"] = fs.seed;
        if (sub->count("--qubits") > 0) doc["qubits"] = fs.qubits;
        if (sub->count("--layers") > 0) doc["layers"] = fs.layers;
        if (sub->count("--epsilon") > 0) doc["epsilon"] = fs.epsilon;
        if (sub->count("--workers") > 0) doc["workers"] = fs.workers;
        config_text = doc.dump();
    } else {
        config_text = raw_config;
    }

    qh_run* run = nullptr;
    qh_status st = qh_run_open(config_text.c_str(), &run);
    if (st != QH_OK) {
        std::fprintf(stderr, "error: %s\n", qh_last_error());
        return exit_code_for(st);
    }

    char* summary = nullptr;
    st = qh_run_command(run, sub->get_name().c_str(), &summary);
    if (st != QH_OK) {
        std::fprintf(stderr, "error: %s\n", qh_last_error());
        qh_run_close(run);
        return exit_code_for(st);
    }
    if (summary != nullptr) {
        std::fputs(summary, stdout);
        qh_string_free(summary);
    }
    qh_run_close(run);
    return 0;
}
