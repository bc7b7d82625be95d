#include "qhybrid/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qhybrid/error.hpp"

namespace qhybrid::qsim {

namespace {

constexpr std::size_t max_oracle_qubits = 10;

std::size_t pow2(std::size_t n) { return std::size_t{1} << n; }

// bit of basis index k that belongs to wire w (wire 0 = MSB)
std::size_t wire_mask(std::size_t n_qubits, std::size_t wire) {
    return std::size_t{1} << (n_qubits - 1 - wire);
}

void check_wire(const state_vector& s, std::size_t wire) {
    require(wire < s.n_qubits, errc::wire_out_of_range,
            "wire " + std::to_string(wire) + " out of range for " +
                std::to_string(s.n_qubits) + " qubits");
}

void apply_single_qubit(state_vector& s, std::size_t wire, const std::array<cplx, 4>& u) {
    const std::size_t mask = wire_mask(s.n_qubits, wire);
    const std::size_t dim = s.dim();
    for (std::size_t k = 0; k < dim; ++k) {
        if (k & mask) continue;
        const std::size_t k1 = k | mask;
        const cplx a = s.amplitudes[k];
        const cplx b = s.amplitudes[k1];
        s.amplitudes[k] = u[0] * a + u[1] * b;
        s.amplitudes[k1] = u[2] * a + u[3] * b;
    }
}

void apply_cnot(state_vector& s, std::size_t control, std::size_t target) {
    const std::size_t cmask = wire_mask(s.n_qubits, control);
    const std::size_t tmask = wire_mask(s.n_qubits, target);
    const std::size_t dim = s.dim();
    for (std::size_t k = 0; k < dim; ++k) {
        if ((k & cmask) && !(k & tmask)) {
            std::swap(s.amplitudes[k], s.amplitudes[k | tmask]);
        }
    }
}

} // namespace

state_vector state_vector::zero(std::size_t n_qubits) {
    require(n_qubits >= 1, errc::qubit_mismatch, "need at least one qubit");
    state_vector s;
    s.n_qubits = n_qubits;
    s.amplitudes.assign(pow2(n_qubits), cplx(0.0, 0.0));
    s.amplitudes[0] = cplx(1.0, 0.0);
    return s;
}

double state_vector::norm() const {
    double acc = 0.0;
    for (const cplx& a : amplitudes) acc += std::norm(a);
    return std::sqrt(acc);
}

std::array<cplx, 4> gate_matrix(gate_kind kind, double angle) {
    const double h = angle / 2.0;
    switch (kind) {
    case gate_kind::rx: {
        const cplx c(std::cos(h), 0.0), ms(0.0, -std::sin(h));
        return {c, ms, ms, c};
    }
    case gate_kind::ry: {
        const double c = std::cos(h), s = std::sin(h);
        return {cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0)};
    }
    case gate_kind::rz:
        return {std::exp(cplx(0, -h)), cplx(0, 0), cplx(0, 0), std::exp(cplx(0, h))};
    case gate_kind::pauli_x:
        return {cplx(0, 0), cplx(1, 0), cplx(1, 0), cplx(0, 0)};
    case gate_kind::pauli_z:
        return {cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(-1, 0)};
    case gate_kind::hadamard: {
        const double r = 1.0 / std::sqrt(2.0);
        return {cplx(r, 0), cplx(r, 0), cplx(r, 0), cplx(-r, 0)};
    }
    case gate_kind::cnot:
        break;
    }
    fail(errc::index_out_of_range, "gate_matrix: cnot has no 2x2 matrix");
}

circuit_spec circuit_spec::zeros(std::size_t n_qubits, std::size_t n_layers) {
    circuit_spec spec;
    spec.n_qubits = n_qubits;
    spec.n_layers = n_layers;
    spec.weights.assign(n_qubits * n_layers, 0.0);
    spec.validate();
    return spec;
}

void circuit_spec::validate() const {
    require(n_qubits >= 1, errc::qubit_mismatch, "circuit needs at least one qubit");
    require(n_layers >= 1, errc::qubit_mismatch, "circuit needs at least one layer");
    require(weights.size() == n_layers * n_qubits, errc::length_mismatch,
            "weights must have shape (n_layers, n_qubits) = (" + std::to_string(n_layers) +
                ", " + std::to_string(n_qubits) + ")");
}

state_vector amplitude_embed(std::span<const double> features, std::size_t n_qubits) {
    require(n_qubits >= 1, errc::qubit_mismatch, "need at least one qubit");
    const std::size_t dim = pow2(n_qubits);
    require(features.size() == dim, errc::length_mismatch,
            "amplitude embedding expects " + std::to_string(dim) + " features, got " +
                std::to_string(features.size()));
    double sq = 0.0;
    for (double x : features) sq += x * x;
    const double nrm = std::sqrt(sq);
    require(nrm >= 1e-12, errc::zero_norm_input, "cannot embed a zero-norm feature vector");
    state_vector s;
    s.n_qubits = n_qubits;
    s.amplitudes.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) s.amplitudes[k] = cplx(features[k] / nrm, 0.0);
    return s;
}

state_vector angle_embed(std::span<const double> features) {
    const std::size_t n = features.size();
    require(n >= 1, errc::length_mismatch, "angle embedding needs at least one feature");
    state_vector s = state_vector::zero(n);
    for (std::size_t w = 0; w < n; ++w) {
        apply_gate(s, gate::ry(w, features[w]));
    }
    return s;
}

state_vector basis_embed(std::span<const int> bits) {
    const std::size_t n = bits.size();
    require(n >= 1, errc::length_mismatch, "basis embedding needs at least one bit");
    std::size_t index = 0;
    for (std::size_t i = 0; i < n; ++i) {
        require(bits[i] == 0 || bits[i] == 1, errc::invalid_bit,
                "bit " + std::to_string(i) + " is " + std::to_string(bits[i]));
        index = (index << 1) | static_cast<std::size_t>(bits[i]);
    }
    state_vector s;
    s.n_qubits = n;
    s.amplitudes.assign(pow2(n), cplx(0.0, 0.0));
    s.amplitudes[index] = cplx(1.0, 0.0);
    return s;
}

void apply_gate(state_vector& state, const gate& g) {
    check_wire(state, g.wire);
    if (g.kind == gate_kind::cnot) {
        check_wire(state, g.wire2);
        require(g.wire != g.wire2, errc::duplicate_wires, "cnot control equals target");
        apply_cnot(state, g.wire, g.wire2);
        return;
    }
    apply_single_qubit(state, g.wire, gate_matrix(g.kind, g.angle));
}

void entangler_layer(state_vector& state, std::span<const double> layer_weights) {
    const std::size_t n = state.n_qubits;
    require(layer_weights.size() == n, errc::length_mismatch,
            "entangler layer expects " + std::to_string(n) + " weights, got " +
                std::to_string(layer_weights.size()));
    for (std::size_t w = 0; w < n; ++w) {
        apply_single_qubit(state, w, gate_matrix(gate_kind::rx, layer_weights[w]));
    }
    // CNOT ring; a 2-qubit ring degenerates to one CNOT, a single qubit to none
    if (n == 2) {
        apply_cnot(state, 0, 1);
    } else if (n >= 3) {
        for (std::size_t w = 0; w < n; ++w) {
            apply_cnot(state, w, (w + 1) % n);
        }
    }
}

forward_result circuit_forward(const circuit_spec& spec, const state_vector& input) {
    spec.validate();
    require(input.n_qubits == spec.n_qubits, errc::qubit_mismatch,
            "input state has " + std::to_string(input.n_qubits) + " qubits, circuit wants " +
                std::to_string(spec.n_qubits));
    forward_result out;
    out.state = input;
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        entangler_layer(out.state, spec.layer_weights(l));
    }
    out.expectations.resize(spec.n_qubits);
    for (std::size_t w = 0; w < spec.n_qubits; ++w) {
        out.expectations[w] = expectation_z(out.state, w);
    }
    return out;
}

std::vector<state_vector> circuit_forward_states(const circuit_spec& spec,
                                                 const state_vector& input) {
    spec.validate();
    require(input.n_qubits == spec.n_qubits, errc::qubit_mismatch,
            "input state qubit count does not match circuit");
    std::vector<state_vector> states;
    states.reserve(spec.n_layers + 1);
    states.push_back(input);
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        state_vector next = states.back();
        entangler_layer(next, spec.layer_weights(l));
        states.push_back(std::move(next));
    }
    return states;
}

double expectation_z(const state_vector& state, std::size_t wire) {
    check_wire(state, wire);
    const std::size_t mask = wire_mask(state.n_qubits, wire);
    double acc = 0.0;
    for (std::size_t k = 0; k < state.dim(); ++k) {
        const double p = std::norm(state.amplitudes[k]);
        acc += (k & mask) ? -p : p;
    }
    return acc;
}

namespace {

// The oracle builds gate matrices from scratch so it shares nothing with the
// strided kernels it cross-checks.
unitary_matrix identity_matrix(std::size_t dim) {
    unitary_matrix m;
    m.dim = dim;
    m.entries.assign(dim * dim, cplx(0, 0));
    for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = cplx(1, 0);
    return m;
}

unitary_matrix kron(const unitary_matrix& a, const unitary_matrix& b) {
    unitary_matrix m;
    m.dim = a.dim * b.dim;
    m.entries.assign(m.dim * m.dim, cplx(0, 0));
    for (std::size_t ar = 0; ar < a.dim; ++ar)
        for (std::size_t ac = 0; ac < a.dim; ++ac)
            for (std::size_t br = 0; br < b.dim; ++br)
                for (std::size_t bc = 0; bc < b.dim; ++bc)
                    m.at(ar * b.dim + br, ac * b.dim + bc) = a.at(ar, ac) * b.at(br, bc);
    return m;
}

unitary_matrix matmul(const unitary_matrix& a, const unitary_matrix& b) {
    unitary_matrix m;
    m.dim = a.dim;
    m.entries.assign(m.dim * m.dim, cplx(0, 0));
    for (std::size_t r = 0; r < m.dim; ++r)
        for (std::size_t k = 0; k < m.dim; ++k) {
            const cplx ark = a.at(r, k);
            if (ark == cplx(0, 0)) continue;
            for (std::size_t c = 0; c < m.dim; ++c) m.at(r, c) += ark * b.at(k, c);
        }
    return m;
}

unitary_matrix rx_2x2(double theta) {
    unitary_matrix m;
    m.dim = 2;
    m.entries = {cplx(std::cos(theta / 2), 0), cplx(0, -std::sin(theta / 2)),
                 cplx(0, -std::sin(theta / 2)), cplx(std::cos(theta / 2), 0)};
    return m;
}

// full-register CNOT as a permutation matrix (wire 0 = MSB)
unitary_matrix cnot_matrix(std::size_t n_qubits, std::size_t control, std::size_t target) {
    const std::size_t dim = pow2(n_qubits);
    const std::size_t cmask = wire_mask(n_qubits, control);
    const std::size_t tmask = wire_mask(n_qubits, target);
    unitary_matrix m;
    m.dim = dim;
    m.entries.assign(dim * dim, cplx(0, 0));
    for (std::size_t col = 0; col < dim; ++col) {
        const std::size_t row = (col & cmask) ? (col ^ tmask) : col;
        m.at(row, col) = cplx(1, 0);
    }
    return m;
}

} // namespace

unitary_matrix dense_unitary_oracle(const circuit_spec& spec) {
    spec.validate();
    require(spec.n_qubits <= max_oracle_qubits, errc::too_many_qubits,
            "dense oracle limited to " + std::to_string(max_oracle_qubits) + " qubits");
    const std::size_t n = spec.n_qubits;
    unitary_matrix total = identity_matrix(pow2(n));
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        // rotation row as a Kronecker product, wire 0 leftmost
        unitary_matrix rot = rx_2x2(spec.weight(l, 0));
        for (std::size_t w = 1; w < n; ++w) rot = kron(rot, rx_2x2(spec.weight(l, w)));
        unitary_matrix layer = rot;
        if (n == 2) {
            layer = matmul(cnot_matrix(n, 0, 1), layer);
        } else if (n >= 3) {
            for (std::size_t w = 0; w < n; ++w) {
                layer = matmul(cnot_matrix(n, w, (w + 1) % n), layer);
            }
        }
        total = matmul(layer, total);
    }
    return total;
}

state_vector apply_unitary(const unitary_matrix& u, const state_vector& input) {
    require(u.dim == input.dim(), errc::qubit_mismatch, "unitary/state dimension mismatch");
    state_vector out;
    out.n_qubits = input.n_qubits;
    out.amplitudes.assign(u.dim, cplx(0, 0));
    for (std::size_t r = 0; r < u.dim; ++r) {
        cplx acc(0, 0);
        for (std::size_t c = 0; c < u.dim; ++c) acc += u.at(r, c) * input.amplitudes[c];
        out.amplitudes[r] = acc;
    }
    return out;
}

namespace {

std::string rx_token(double theta) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "RX(%.2f)", theta);
    return buf;
}

// display width = visible cells; the box/drawing glyphs used here are all
// single-cell despite being multi-byte UTF-8
std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++w;
    }
    return w;
}

void pad_column(std::vector<std::string>& tokens) {
    std::size_t width = 0;
    for (const auto& t : tokens) width = std::max(width, display_width(t));
    for (auto& t : tokens) {
        std::size_t w = display_width(t);
        while (w++ < width) t += "─"; // ─
    }
}

} // namespace

std::string render_circuit(const circuit_spec& spec) {
    spec.validate();
    require(spec.n_qubits <= max_oracle_qubits, errc::too_many_qubits,
            "rendering limited to " + std::to_string(max_oracle_qubits) + " qubits");
    const std::size_t n = spec.n_qubits;

    // columns[c][wire]
    std::vector<std::vector<std::string>> columns;
    auto blank_column = [&] { return std::vector<std::string>(n, "─"); };
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        std::vector<std::string> rot(n);
        for (std::size_t w = 0; w < n; ++w) rot[w] = rx_token(spec.weight(l, w));
        columns.push_back(std::move(rot));
        const std::size_t n_cnots = (n == 1) ? 0 : (n == 2 ? 1 : n);
        for (std::size_t c = 0; c < n_cnots; ++c) {
            auto col = blank_column();
            col[c] = "●";           // ● control
            col[(c + 1) % n] = "⊕"; // ⊕ target
            columns.push_back(std::move(col));
        }
    }
    columns.push_back(std::vector<std::string>(n, "⟨Z⟩")); // ⟨Z⟩

    for (auto& col : columns) pad_column(col);

    std::string out;
    for (std::size_t w = 0; w < n; ++w) {
        out += std::to_string(w) + ": ";
        for (const auto& col : columns) {
            out += "──";
            out += col[w];
        }
        out += "\n";
    }
    return out;
}

} // namespace qhybrid::qsim
