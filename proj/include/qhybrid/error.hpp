#pragma once

#include <stdexcept>
#include <string>

namespace qhybrid {

enum class errc {
    zero_norm_input,
    length_mismatch,
    invalid_bit,
    wire_out_of_range,
    duplicate_wires,
    qubit_mismatch,
    too_many_qubits,
    index_out_of_range,
    shape_mismatch,
    label_out_of_range,
    no_cached_forward,
    bad_magic,
    truncated_file,
    count_mismatch,
    version_mismatch,
    empty_split,
    degenerate_input,
    diverged_loss,
    unsupported_shape,
    config_error,
    data_error,
    io_error,
};

const char* errc_name(errc c);

class error : public std::runtime_error {
public:
    error(errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

} // namespace qhybrid
