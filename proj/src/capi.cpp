#include "qhybrid/capi.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <span>
#include <string>

#include "qhybrid/error.hpp"
#include "qhybrid/qgrad.hpp"
#include "qhybrid/qsim.hpp"
#include "qhybrid/runner.hpp"

namespace {

thread_local std::string t_last_error;

qh_status fail_with(qh_status s, const std::string& msg) {
    t_last_error = msg;
    return s;
}

qh_status status_for(qhybrid::errc c) {
    using qhybrid::errc;
    switch (c) {
        case errc::config_error:
            return QH_ERR_CONFIG;
        case errc::bad_magic:
        case errc::truncated_file:
        case errc::count_mismatch:
        case errc::label_out_of_range:
        case errc::empty_split:
        case errc::data_error:
        case errc::io_error:
            return QH_ERR_DATA;
        case errc::diverged_loss:
            return QH_ERR_NUMERIC;
        case errc::version_mismatch:
            return QH_ERR_CHECKPOINT;
        default:
            return QH_ERR_INVALID;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
qh_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const qhybrid::error& e) {
        return fail_with(status_for(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail_with(QH_ERR_INVALID, "out of memory");
    } catch (const std::exception& e) {
        return fail_with(QH_ERR_INVALID, e.what());
    }
}

} // namespace

struct qh_run {
    qhybrid::runner::run_config config;
};

struct qh_circuit {
    qhybrid::qsim::circuit_spec spec;
};

extern "C" {

const char* qh_version(void) { return "1.0.0"; }

const char* qh_last_error(void) { return t_last_error.c_str(); }

void qh_string_free(char* s) { std::free(s); }

qh_status qh_run_open(const char* config_json, qh_run** out) {
    if (out == nullptr) return fail_with(QH_ERR_INVALID, "out handle is null");
    *out = nullptr;
    if (config_json == nullptr) return fail_with(QH_ERR_INVALID, "config_json is null");
    return guarded([&] {
        auto run = std::make_unique<qh_run>();
        run->config = qhybrid::runner::parse_config(config_json);
        *out = run.release();
        return QH_OK;
    });
}

void qh_run_close(qh_run* run) { delete run; }

qh_status qh_run_command(qh_run* run, const char* command, char** summary_out) {
    if (summary_out != nullptr) *summary_out = nullptr;
    if (run == nullptr) return fail_with(QH_ERR_INVALID, "run handle is null");
    if (command == nullptr) return fail_with(QH_ERR_INVALID, "command is null");
    return guarded([&] {
        const auto res = qhybrid::runner::run_command(command, run->config);
        if (res.exit_code != 0) {
            switch (res.exit_code) {
                case 2: return fail_with(QH_ERR_CONFIG, res.message);
                case 3: return fail_with(QH_ERR_DATA, res.message);
                case 4: return fail_with(QH_ERR_NUMERIC, res.message);
                case 5: return fail_with(QH_ERR_CHECKPOINT, res.message);
                default: return fail_with(QH_ERR_INVALID, res.message);
            }
        }
        if (summary_out != nullptr) {
            *summary_out = dup_string(res.output);
            if (*summary_out == nullptr) return fail_with(QH_ERR_INVALID, "out of memory");
        }
        return QH_OK;
    });
}

qh_status qh_circuit_open(size_t n_qubits, size_t n_layers, const double* weights,
                          qh_circuit** out) {
    if (out == nullptr) return fail_with(QH_ERR_INVALID, "out handle is null");
    *out = nullptr;
    return guarded([&] {
        if (n_qubits < 1 || n_qubits > 10) {
            return fail_with(QH_ERR_CONFIG, "n_qubits must lie in [1,10]");
        }
        if (n_layers < 1) return fail_with(QH_ERR_CONFIG, "n_layers must be >= 1");
        auto c = std::make_unique<qh_circuit>();
        c->spec = qhybrid::qsim::circuit_spec::zeros(n_qubits, n_layers);
        if (weights != nullptr) {
            std::copy_n(weights, c->spec.weights.size(), c->spec.weights.begin());
        }
        *out = c.release();
        return QH_OK;
    });
}

void qh_circuit_close(qh_circuit* circuit) { delete circuit; }

qh_status qh_circuit_set_weights(qh_circuit* circuit, const double* weights, size_t count) {
    if (circuit == nullptr) return fail_with(QH_ERR_INVALID, "circuit handle is null");
    if (weights == nullptr) return fail_with(QH_ERR_INVALID, "weights pointer is null");
    if (count != circuit->spec.weights.size()) {
        return fail_with(QH_ERR_CONFIG,
                         "expected " + std::to_string(circuit->spec.weights.size()) + " weights");
    }
    std::copy_n(weights, count, circuit->spec.weights.begin());
    return QH_OK;
}

qh_status qh_circuit_expectations(qh_circuit* circuit, const double* features, size_t n_features,
                                  double* out_expectations) {
    if (circuit == nullptr) return fail_with(QH_ERR_INVALID, "circuit handle is null");
    if (features == nullptr || out_expectations == nullptr) {
        return fail_with(QH_ERR_INVALID, "features/out pointers must not be null");
    }
    return guarded([&] {
        const std::span<const double> f(features, n_features);
        const auto state = qhybrid::qsim::amplitude_embed(f, circuit->spec.n_qubits);
        const auto result = qhybrid::qsim::circuit_forward(circuit->spec, state);
        std::copy(result.expectations.begin(), result.expectations.end(), out_expectations);
        return QH_OK;
    });
}

qh_status qh_circuit_gradients(qh_circuit* circuit, const double* features, size_t n_features,
                               const double* upstream, double* d_weights, double* d_features) {
    if (circuit == nullptr) return fail_with(QH_ERR_INVALID, "circuit handle is null");
    if (features == nullptr || upstream == nullptr) {
        return fail_with(QH_ERR_INVALID, "features/upstream pointers must not be null");
    }
    return guarded([&] {
        const std::span<const double> f(features, n_features);
        const std::span<const double> up(upstream, circuit->spec.n_qubits);
        const auto grads = qhybrid::qgrad::adjoint_backward(circuit->spec, f, up);
        if (d_weights != nullptr) {
            std::copy(grads.d_weights.begin(), grads.d_weights.end(), d_weights);
        }
        if (d_features != nullptr) {
            std::copy(grads.d_input_features.begin(), grads.d_input_features.end(), d_features);
        }
        return QH_OK;
    });
}

qh_status qh_circuit_render(qh_circuit* circuit, char** text_out) {
    if (text_out != nullptr) *text_out = nullptr;
    if (circuit == nullptr) return fail_with(QH_ERR_INVALID, "circuit handle is null");
    if (text_out == nullptr) return fail_with(QH_ERR_INVALID, "text_out pointer is null");
    return guarded([&] {
        *text_out = dup_string(qhybrid::qsim::render_circuit(circuit->spec));
        if (*text_out == nullptr) return fail_with(QH_ERR_INVALID, "out of memory");
        return QH_OK;
    });
}

} // extern "C"
