#ifndef QHYBRID_CAPI_H
#define QHYBRID_CAPI_H

/* C interface to the hybrid quantum-classical training library. All entry
 * points are exception-safe: failures return a status code and leave a
 * description in qh_last_error() (thread-local). Strings returned through
 * out-parameters are heap-allocated; release them with qh_string_free. */

#include <stddef.h>

#ifdef _WIN32
#define QH_API __declspec(dllexport)
#else
#define QH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qh_status {
    QH_OK = 0,
    QH_ERR_CONFIG = 2,     /* bad configuration or arguments */
    QH_ERR_DATA = 3,       /* dataset missing or malformed */
    QH_ERR_NUMERIC = 4,    /* numerical divergence */
    QH_ERR_CHECKPOINT = 5, /* checkpoint missing or incompatible */
    QH_ERR_INVALID = 6     /* null handles, bad sizes, internal misuse */
} qh_status;

typedef struct qh_run qh_run;         /* one configured run */
typedef struct qh_circuit qh_circuit; /* standalone variational circuit */

QH_API const char* qh_version(void);

/* Description of the most recent failure on this thread; never NULL. */
QH_API const char* qh_last_error(void);

QH_API void qh_string_free(char* s);

/* Configure a run from a JSON document (same schema as the CLI config
 * file). The handle owns a copy of the configuration. */
QH_API qh_status qh_run_open(const char* config_json, qh_run** out);
QH_API void qh_run_close(qh_run* run);

/* Execute one command: train, evaluate, attack, analyze, describe, or
 * render-circuit. Machine-readable artifacts are written into the
 * configured output directory first; *summary_out (optional) receives the
 * human-readable summary. */
QH_API qh_status qh_run_command(qh_run* run, const char* command, char** summary_out);

/* Ring-entangler circuit with n_qubits (1..10) and n_layers rounds.
 * weights is row-major [n_layers][n_qubits], or NULL for all zeros. */
QH_API qh_status qh_circuit_open(size_t n_qubits, size_t n_layers, const double* weights,
                                 qh_circuit** out);
QH_API void qh_circuit_close(qh_circuit* circuit);

QH_API qh_status qh_circuit_set_weights(qh_circuit* circuit, const double* weights, size_t count);

/* Amplitude-embeds features (length must be 2^n_qubits, nonzero norm), runs
 * the circuit, and writes the n_qubits Pauli-Z expectations. */
QH_API qh_status qh_circuit_expectations(qh_circuit* circuit, const double* features,
                                         size_t n_features, double* out_expectations);

/* Exact adjoint gradient of sum_i upstream[i] * <Z_i>. upstream has length
 * n_qubits; d_weights (length n_layers*n_qubits) and d_features (length
 * 2^n_qubits, through the embedding normalization) may each be NULL when
 * not wanted. */
QH_API qh_status qh_circuit_gradients(qh_circuit* circuit, const double* features,
                                      size_t n_features, const double* upstream,
                                      double* d_weights, double* d_features);

/* ASCII diagram of the circuit, one line per wire. */
QH_API qh_status qh_circuit_render(qh_circuit* circuit, char** text_out);

#ifdef __cplusplus
}
#endif

#endif /* QHYBRID_CAPI_H */
