#include "qhybrid/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qhybrid/data.hpp"
#include "qhybrid/error.hpp"
#include "qhybrid/eval.hpp"
#include "qhybrid/model.hpp"
#include "qhybrid/qsim.hpp"
#include "qhybrid/train.hpp"

namespace qhybrid::runner {

namespace {

using nlohmann::json;

// Which stage an error escaped from decides the exit code: config 2,
// data 3, numeric divergence 4, checkpoint 5.
enum class phase { configure, load_data, build_model, load_checkpoint, run, write_output };

struct phased_error {
    int exit_code;
    std::string message;
};

int classify(errc c, phase p) {
    if (c == errc::diverged_loss) return 4;
    if (p == phase::configure || c == errc::config_error) return 2;
    if (p == phase::load_checkpoint) return 5;
    if (p == phase::load_data || p == phase::write_output) return 3;
    return 2;
}

template <typename Fn>
auto with_phase(phase p, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const error& e) {
        throw phased_error{classify(e.code(), p), e.what()};
    } catch (const std::exception& e) {
        throw phased_error{p == phase::load_data ? 3 : 2, e.what()};
    }
}

std::size_t get_count(const json& v, const std::string& key, std::size_t min_value) {
    require(v.is_number_integer() || v.is_number_unsigned(), errc::config_error,
            "config key '" + key + "' must be an integer");
    const auto raw = v.get<std::int64_t>();
    require(raw >= 0 && static_cast<std::size_t>(raw) >= min_value, errc::config_error,
            "config key '" + key + "' must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(raw);
}

double get_real(const json& v, const std::string& key) {
    require(v.is_number(), errc::config_error, "config key '" + key + "' must be a number");
    return v.get<double>();
}

std::string get_string(const json& v, const std::string& key) {
    require(v.is_string(), errc::config_error, "config key '" + key + "' must be a string");
    return v.get<std::string>();
}

} // namespace

run_config parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const std::exception& e) {
        fail(errc::config_error, std::string("config is not valid JSON: ") + e.what());
    }
    require(doc.is_object(), errc::config_error, "config must be a JSON object");

    run_config cfg;
    for (const auto& [key, v] : doc.items()) {
        if (key == "dataset") {
            cfg.dataset = get_string(v, key);
        } else if (key == "model") {
            cfg.model = get_string(v, key);
        } else if (key == "data_dir") {
            cfg.data_dir = get_string(v, key);
        } else if (key == "out_dir") {
            cfg.out_dir = get_string(v, key);
        } else if (key == "checkpoint") {
            cfg.checkpoint = get_string(v, key);
        } else if (key == "weights") {
            cfg.weights = get_string(v, key);
        } else if (key == "epochs") {
            cfg.epochs = get_count(v, key, 1);
        } else if (key == "batch_size") {
            cfg.batch_size = get_count(v, key, 1);
        } else if (key == "lr") {
            cfg.lr = get_real(v, key);
            require(cfg.lr > 0.0, errc::config_error, "lr must be positive");
        } else if (key == "optimizer") {
            cfg.optimizer = get_string(v, key);
        } else if (key == "seed") {
            require(v.is_number_integer() || v.is_number_unsigned(), errc::config_error,
                    "config key 'seed' must be an integer");
            cfg.seed = v.get<std::uint64_t>();
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(get_count(v, key, 1));
        } else if (key == "val_fraction") {
            cfg.val_fraction = get_real(v, key);
            require(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0, errc::config_error,
                    "val_fraction must lie in (0,1)");
        } else if (key == "augment") {
            require(v.is_boolean(), errc::config_error, "config key 'augment' must be a boolean");
            cfg.augment = v.get<bool>();
        } else if (key == "qubits") {
            cfg.qubits = get_count(v, key, 1);
            require(cfg.qubits <= 10, errc::config_error, "qubits must lie in [1,10]");
        } else if (key == "layers") {
            cfg.layers = get_count(v, key, 1);
        } else if (key == "epsilon") {
            cfg.epsilon = get_real(v, key);
            require(cfg.epsilon >= 0.0, errc::config_error, "epsilon must be >= 0");
        } else if (key == "pca_components") {
            cfg.pca_components = get_count(v, key, 1);
        } else if (key == "train_subset") {
            cfg.train_subset = get_count(v, key, 0);
        } else if (key == "test_subset") {
            cfg.test_subset = get_count(v, key, 0);
        } else if (key == "synthetic_classes") {
            cfg.synthetic_classes = get_count(v, key, 2);
        } else if (key == "synthetic_train_per_class") {
            cfg.synthetic_train_per_class = get_count(v, key, 1);
        } else if (key == "synthetic_test_per_class") {
            cfg.synthetic_test_per_class = get_count(v, key, 1);
        } else if (key == "synthetic_shape") {
            require(v.is_array() && v.size() == 3, errc::config_error,
                    "synthetic_shape must be a [C,H,W] array");
            cfg.synthetic_shape.clear();
            for (const auto& d : v) cfg.synthetic_shape.push_back(get_count(d, key, 1));
        } else if (key == "synthetic_noise") {
            cfg.synthetic_noise = get_real(v, key);
            require(cfg.synthetic_noise >= 0.0, errc::config_error,
                    "synthetic_noise must be >= 0");
        } else {
            fail(errc::config_error, "unknown config key '" + key + "'");
        }
    }
    require(cfg.dataset == "mnist" || cfg.dataset == "cifar100" || cfg.dataset == "synthetic",
            errc::config_error, "dataset must be mnist, cifar100, or synthetic");
    require(cfg.model == "hybrid" || cfg.model == "classical", errc::config_error,
            "model must be hybrid or classical");
    require(cfg.optimizer == "adam" || cfg.optimizer == "sgd", errc::config_error,
            "optimizer must be adam or sgd");
    return cfg;
}

run_config load_config_file(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), errc::config_error, "cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const run_config& cfg) {
    json doc;
    doc["dataset"] = cfg.dataset;
    doc["model"] = cfg.model;
    if (!cfg.data_dir.empty()) doc["data_dir"] = cfg.data_dir;
    doc["out_dir"] = cfg.out_dir;
    if (!cfg.checkpoint.empty()) doc["checkpoint"] = cfg.checkpoint;
    if (!cfg.weights.empty()) doc["weights"] = cfg.weights;
    doc["epochs"] = cfg.epochs;
    doc["batch_size"] = cfg.batch_size;
    doc["lr"] = cfg.lr;
    doc["optimizer"] = cfg.optimizer;
    doc["seed"] = cfg.seed;
    doc["workers"] = cfg.workers;
    doc["val_fraction"] = cfg.val_fraction;
    doc["augment"] = cfg.augment_effective();
    doc["qubits"] = cfg.qubits;
    doc["layers"] = cfg.layers;
    doc["epsilon"] = cfg.epsilon;
    doc["pca_components"] = cfg.pca_components;
    if (cfg.train_subset) doc["train_subset"] = cfg.train_subset;
    if (cfg.test_subset) doc["test_subset"] = cfg.test_subset;
    if (cfg.dataset == "synthetic") {
        doc["synthetic_classes"] = cfg.synthetic_classes;
        doc["synthetic_train_per_class"] = cfg.synthetic_train_per_class;
        doc["synthetic_test_per_class"] = cfg.synthetic_test_per_class;
        doc["synthetic_shape"] = cfg.synthetic_shape;
        doc["synthetic_noise"] = cfg.synthetic_noise;
    }
    return doc.dump(2);
}

namespace {

std::string data_dir_for(const run_config& cfg) {
    if (!cfg.data_dir.empty()) return cfg.data_dir;
    if (const char* env = std::getenv("QHYBRID_DATA_DIR")) {
        if (*env) return env;
    }
    fail(errc::io_error, "no data directory: pass data_dir or set QHYBRID_DATA_DIR");
}

struct loaded_data {
    data::dataset train_full; // pre-split
    data::dataset test;
};

loaded_data load_for(const run_config& cfg) {
    loaded_data out;
    if (cfg.dataset == "mnist") {
        const std::string dir = data_dir_for(cfg);
        out.train_full = data::load_mnist_idx(dir + "/train-images-idx3-ubyte",
                                              dir + "/train-labels-idx1-ubyte");
        out.test = data::load_mnist_idx(dir + "/t10k-images-idx3-ubyte",
                                        dir + "/t10k-labels-idx1-ubyte");
    } else if (cfg.dataset == "cifar100") {
        const std::string dir = data_dir_for(cfg);
        out.train_full = data::load_cifar100_binary(dir + "/train.bin");
        out.test = data::load_cifar100_binary(dir + "/test.bin");
    } else {
        out.train_full =
            data::synthetic_dataset(cfg.synthetic_classes, cfg.synthetic_train_per_class,
                                    cfg.synthetic_shape, cfg.seed, cfg.synthetic_noise);
        out.test = data::synthetic_dataset(cfg.synthetic_classes, cfg.synthetic_test_per_class,
                                           cfg.synthetic_shape,
                                           rng::derive(cfg.seed, seed_tag::test_data),
                                           cfg.synthetic_noise);
    }
    if (cfg.train_subset > 0) {
        out.train_full = data::stratified_subset(out.train_full, cfg.train_subset, cfg.seed);
    }
    if (cfg.test_subset > 0) {
        out.test = data::stratified_subset(out.test, cfg.test_subset,
                                           rng::derive(cfg.seed, seed_tag::test_data));
    }
    out.test.split = data::split_tag::test;
    return out;
}

model::model_graph build_model(const run_config& cfg, const std::vector<std::size_t>& shape,
                               std::size_t n_classes) {
    rng r(rng::derive(cfg.seed, seed_tag::model_init));
    model::model_graph m = cfg.model == "hybrid"
                               ? model::model_graph::build_hybrid(shape, n_classes, r, cfg.qubits,
                                                                  cfg.layers)
                               : model::model_graph::build_classical(shape, n_classes, r);
    m.set_workers(cfg.workers);
    return m;
}

train::train_config to_train_config(const run_config& cfg) {
    train::train_config tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.optimizer = cfg.optimizer == "adam" ? nn::opt_kind::adam : nn::opt_kind::sgd;
    tc.lr = cfg.lr;
    tc.seed = cfg.seed;
    tc.augment = cfg.augment_effective();
    tc.workers = cfg.workers;
    return tc;
}

void ensure_out_dir(const run_config& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    require(!ec, errc::io_error, "cannot create output directory " + cfg.out_dir);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open " + path + " for writing");
    f << text;
    f.flush();
    require(f.good(), errc::io_error, "write failed on " + path);
}

json metrics_to_json(const train::metrics& m) {
    json doc;
    doc["loss"] = m.loss;
    doc["accuracy"] = m.accuracy;
    doc["precision"] = m.precision;
    doc["recall"] = m.recall;
    doc["macro_f1"] = m.macro_f1;
    doc["f1_averaging"] = "macro";
    doc["absent_classes"] = m.absent_classes;
    json rows = json::array();
    for (std::size_t t = 0; t < m.confusion.n_classes; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < m.confusion.n_classes; ++p) row.push_back(m.confusion.at(t, p));
        rows.push_back(std::move(row));
    }
    doc["confusion"] = std::move(rows);
    return doc;
}

std::string path_in(const run_config& cfg, const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

run_result cmd_train(const run_config& cfg) {
    const train::train_config tc = with_phase(phase::configure, [&] {
        auto t = to_train_config(cfg);
        t.validate();
        return t;
    });
    loaded_data ds = with_phase(phase::load_data, [&] { return load_for(cfg); });
    auto split = with_phase(phase::load_data, [&] {
        return data::stratified_split(ds.train_full, cfg.val_fraction, cfg.seed);
    });
    model::model_graph m = with_phase(phase::build_model, [&] {
        return build_model(cfg, ds.train_full.sample_shape(), ds.train_full.n_classes());
    });
    const auto records = with_phase(phase::run, [&] {
        return train::train_model(tc, m, split.train, split.val);
    });
    const train::metrics test_metrics =
        with_phase(phase::run, [&] { return train::evaluate(m, ds.test, cfg.batch_size); });

    with_phase(phase::write_output, [&] {
        ensure_out_dir(cfg);
        train::write_metrics_csv(records, path_in(cfg, "metrics.csv"));
        json final_doc;
        final_doc["config"] = json::parse(config_to_json(cfg));
        final_doc["parameter_count"] = m.parameter_count();
        final_doc["test"] = metrics_to_json(test_metrics);
        write_text(path_in(cfg, "final.json"), final_doc.dump(2) + "\n");
        train::save_checkpoint(m, path_in(cfg, "model.qhcp"));
        write_text(path_in(cfg, "arch.json"), m.describe_json() + "\n");
    });

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "trained %s on %s: %zu epochs, %zu parameters, test accuracy %.4f, "
                  "test macro-F1 %.4f\n",
                  cfg.model.c_str(), cfg.dataset.c_str(), cfg.epochs, m.parameter_count(),
                  test_metrics.accuracy, test_metrics.macro_f1);
    return {0, buf, ""};
}

model::model_graph restore_model(const run_config& cfg, const loaded_data& ds) {
    with_phase(phase::configure, [&] {
        require(!cfg.checkpoint.empty(), errc::config_error,
                "this command needs a checkpoint path");
    });
    model::model_graph m = with_phase(phase::build_model, [&] {
        return build_model(cfg, ds.test.sample_shape(), ds.test.n_classes());
    });
    with_phase(phase::load_checkpoint, [&] { train::load_checkpoint(m, cfg.checkpoint); });
    return m;
}

run_result cmd_evaluate(const run_config& cfg) {
    loaded_data ds = with_phase(phase::load_data, [&] { return load_for(cfg); });
    model::model_graph m = restore_model(cfg, ds);
    const train::metrics tm =
        with_phase(phase::run, [&] { return train::evaluate(m, ds.test, cfg.batch_size); });
    with_phase(phase::write_output, [&] {
        ensure_out_dir(cfg);
        json doc;
        doc["config"] = json::parse(config_to_json(cfg));
        doc["parameter_count"] = m.parameter_count();
        doc["test"] = metrics_to_json(tm);
        write_text(path_in(cfg, "final.json"), doc.dump(2) + "\n");
        write_text(path_in(cfg, "arch.json"), m.describe_json() + "\n");
    });
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "evaluated %s on %s test split: accuracy %.4f, macro-F1 %.4f, loss %.4f\n",
                  cfg.model.c_str(), cfg.dataset.c_str(), tm.accuracy, tm.macro_f1, tm.loss);
    return {0, buf, ""};
}

run_result cmd_attack(const run_config& cfg) {
    loaded_data ds = with_phase(phase::load_data, [&] { return load_for(cfg); });
    model::model_graph m = restore_model(cfg, ds);
    const eval::robustness_report rep = with_phase(phase::run, [&] {
        return eval::robust_accuracy(m, ds.test, {cfg.epsilon}, cfg.batch_size);
    });
    with_phase(phase::write_output, [&] {
        ensure_out_dir(cfg);
        json doc;
        doc["attack"] = "fgsm";
        doc["epsilon"] = rep.epsilon;
        doc["epsilon_units"] = "raw_pixel";
        doc["clamp"] = {0.0, 1.0};
        doc["clean_accuracy"] = rep.clean_accuracy;
        doc["robust_accuracy"] = rep.robust_accuracy;
        doc["dataset"] = cfg.dataset;
        doc["model"] = cfg.model;
        write_text(path_in(cfg, "attack.json"), doc.dump(2) + "\n");
    });
    char buf[160];
    std::snprintf(buf, sizeof buf, "fgsm eps=%.4g: clean accuracy %.4f, robust accuracy %.4f\n",
                  rep.epsilon, rep.clean_accuracy, rep.robust_accuracy);
    return {0, buf, ""};
}

run_result cmd_analyze(const run_config& cfg) {
    loaded_data ds = with_phase(phase::load_data, [&] { return load_for(cfg); });
    model::model_graph m = restore_model(cfg, ds);
    const auto dump =
        with_phase(phase::run, [&] { return eval::dump_embeddings(m, ds.test, cfg.batch_size); });
    const auto pca = with_phase(phase::run, [&] {
        return eval::pca_project(dump, cfg.pca_components);
    });
    with_phase(phase::write_output, [&] {
        ensure_out_dir(cfg);
        eval::write_embeddings_csv(dump, path_in(cfg, "embeddings.csv"));
        eval::write_pca_outputs(pca, dump.labels, path_in(cfg, "pca.csv"),
                                path_in(cfg, "pca.json"));
    });
    std::ostringstream os;
    os << "dumped " << dump.labels.size() << " embeddings (width " << dump.features.dim(1)
       << "); explained variance ratios:";
    for (double rr : pca.explained_variance_ratio) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.4f", rr);
        os << buf;
    }
    os << "\n";
    return {0, os.str(), ""};
}

run_result cmd_describe(const run_config& cfg) {
    model::model_graph m = with_phase(phase::build_model, [&] {
        std::vector<std::size_t> shape;
        std::size_t n_classes;
        if (cfg.dataset == "mnist") {
            shape = {1, 28, 28};
            n_classes = 10;
        } else if (cfg.dataset == "cifar100") {
            shape = {3, 32, 32};
            n_classes = 100;
        } else {
            shape = cfg.synthetic_shape;
            n_classes = cfg.synthetic_classes;
        }
        return build_model(cfg, shape, n_classes);
    });
    return {0, m.describe_json() + "\n", ""};
}

run_result cmd_render_circuit(const run_config& cfg) {
    const qsim::circuit_spec spec = with_phase(phase::configure, [&] {
        qsim::circuit_spec s = qsim::circuit_spec::zeros(cfg.qubits, cfg.layers);
        if (!cfg.weights.empty()) {
            std::ifstream f(cfg.weights);
            require(f.good(), errc::config_error, "cannot open weights file " + cfg.weights);
            json doc;
            try {
                doc = json::parse(f);
            } catch (const std::exception& e) {
                fail(errc::config_error, std::string("weights file is not valid JSON: ") + e.what());
            }
            require(doc.is_array() && doc.size() == s.weights.size(), errc::config_error,
                    "weights file must be a flat array of " + std::to_string(s.weights.size()) +
                        " numbers (layers x qubits)");
            for (std::size_t i = 0; i < s.weights.size(); ++i) {
                require(doc[i].is_number(), errc::config_error, "weights must be numbers");
                s.weights[i] = doc[i].get<double>();
            }
        }
        return s;
    });
    return {0, qsim::render_circuit(spec) + "\n", ""};
}

} // namespace

run_result run_command(const std::string& command, const run_config& cfg) {
    try {
        if (command == "train") return cmd_train(cfg);
        if (command == "evaluate") return cmd_evaluate(cfg);
        if (command == "attack") return cmd_attack(cfg);
        if (command == "analyze") return cmd_analyze(cfg);
        if (command == "describe") return cmd_describe(cfg);
        if (command == "render-circuit") return cmd_render_circuit(cfg);
        return {2, "", "unknown command '" + command + "'"};
    } catch (const phased_error& e) {
        return {e.exit_code, "", e.message};
    } catch (const error& e) {
        return {classify(e.code(), phase::run), "", e.what()};
    } catch (const std::exception& e) {
        return {2, "", e.what()};
    }
}

} // namespace qhybrid::runner
