#include "qhybrid/error.hpp"

namespace qhybrid {

const char* errc_name(errc c) {
    switch (c) {
        case errc::zero_norm_input: return "ZeroNormInput";
        case errc::length_mismatch: return "LengthMismatch";
        case errc::invalid_bit: return "InvalidBit";
        case errc::wire_out_of_range: return "WireOutOfRange";
        case errc::duplicate_wires: return "DuplicateWires";
        case errc::qubit_mismatch: return "QubitMismatch";
        case errc::too_many_qubits: return "TooManyQubits";
        case errc::index_out_of_range: return "IndexOutOfRange";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::label_out_of_range: return "LabelOutOfRange";
        case errc::no_cached_forward: return "NoCachedForward";
        case errc::bad_magic: return "BadMagic";
        case errc::truncated_file: return "TruncatedFile";
        case errc::count_mismatch: return "CountMismatch";
        case errc::version_mismatch: return "VersionMismatch";
        case errc::empty_split: return "EmptySplit";
        case errc::degenerate_input: return "DegenerateInput";
        case errc::diverged_loss: return "DivergedLoss";
        case errc::unsupported_shape: return "UnsupportedShape";
        case errc::config_error: return "ConfigError";
        case errc::data_error: return "DataError";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace qhybrid
