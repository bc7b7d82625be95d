#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qhybrid::qsim {

using cplx = std::complex<double>;

// Full statevector of an n-qubit register. Wire 0 is the most significant
// bit of the basis index, so |b0 b1 ... b_{n-1}> sits at index
// sum_i b_i * 2^(n-1-i).
struct state_vector {
    std::size_t n_qubits = 0;
    std::vector<cplx> amplitudes;

    static state_vector zero(std::size_t n_qubits); // |00...0>

    std::size_t dim() const { return amplitudes.size(); }
    double norm() const;
};

enum class gate_kind { rx, ry, rz, pauli_x, pauli_z, hadamard, cnot };

struct gate {
    gate_kind kind;
    std::size_t wire = 0;   // target wire; control wire for cnot
    std::size_t wire2 = 0;  // cnot target
    double angle = 0.0;

    static gate rx(std::size_t wire, double angle) { return {gate_kind::rx, wire, 0, angle}; }
    static gate ry(std::size_t wire, double angle) { return {gate_kind::ry, wire, 0, angle}; }
    static gate rz(std::size_t wire, double angle) { return {gate_kind::rz, wire, 0, angle}; }
    static gate pauli_x(std::size_t wire) { return {gate_kind::pauli_x, wire, 0, 0.0}; }
    static gate pauli_z(std::size_t wire) { return {gate_kind::pauli_z, wire, 0, 0.0}; }
    static gate hadamard(std::size_t wire) { return {gate_kind::hadamard, wire, 0, 0.0}; }
    static gate cnot(std::size_t control, std::size_t target) {
        return {gate_kind::cnot, control, target, 0.0};
    }
};

// 2x2 matrix of a single-qubit gate, row-major. cnot is not representable here.
std::array<cplx, 4> gate_matrix(gate_kind kind, double angle);

// Ring-entangler circuit: n_layers rounds of per-wire RX rotations followed
// by a CNOT ring (one CNOT for n=2, none for n=1). weights is row-major
// [n_layers][n_qubits].
struct circuit_spec {
    std::size_t n_qubits = 0;
    std::size_t n_layers = 0;
    std::vector<double> weights;

    static circuit_spec zeros(std::size_t n_qubits, std::size_t n_layers);

    double weight(std::size_t layer, std::size_t wire) const {
        return weights[layer * n_qubits + wire];
    }
    double& weight(std::size_t layer, std::size_t wire) {
        return weights[layer * n_qubits + wire];
    }
    std::span<const double> layer_weights(std::size_t layer) const {
        return std::span<const double>(weights).subspan(layer * n_qubits, n_qubits);
    }
    void validate() const; // shape check
};

// State preparation. amplitude_embed normalizes internally and rejects
// zero-norm input; basis_embed maps bit strings with wire 0 as MSB.
state_vector amplitude_embed(std::span<const double> features, std::size_t n_qubits);
state_vector angle_embed(std::span<const double> features);
state_vector basis_embed(std::span<const int> bits);

void apply_gate(state_vector& state, const gate& g);
void entangler_layer(state_vector& state, std::span<const double> layer_weights);

struct forward_result {
    state_vector state;
    std::vector<double> expectations; // <Z_i> per wire, each in [-1, 1]
};

forward_result circuit_forward(const circuit_spec& spec, const state_vector& input);

// Same forward pass, keeping the state after embedding and after each layer
// (n_layers + 1 states). Used by the adjoint differentiation sweep.
std::vector<state_vector> circuit_forward_states(const circuit_spec& spec,
                                                 const state_vector& input);

double expectation_z(const state_vector& state, std::size_t wire);

// Dense 2^n x 2^n unitary, row-major.
struct unitary_matrix {
    std::size_t dim = 0;
    std::vector<cplx> entries;

    cplx& at(std::size_t row, std::size_t col) { return entries[row * dim + col]; }
    const cplx& at(std::size_t row, std::size_t col) const { return entries[row * dim + col]; }
};

// Builds the circuit's full unitary explicitly via Kronecker products and
// matrix multiplication. Verification oracle for the strided kernels above;
// test use only, capped at n <= 10.
unitary_matrix dense_unitary_oracle(const circuit_spec& spec);

state_vector apply_unitary(const unitary_matrix& u, const state_vector& input);

// One text line per wire, gate columns aligned, e.g.
//   0: ──RX(0.50)──●──────⊕──⟨Z⟩
std::string render_circuit(const circuit_spec& spec);

} // namespace qhybrid::qsim
