#include "qhybrid/qgrad.hpp"

#include <cmath>

#include "qhybrid/error.hpp"

namespace qhybrid::qgrad {

using qsim::cplx;
using qsim::state_vector;

namespace {

std::size_t wire_mask(std::size_t n_qubits, std::size_t wire) {
    return std::size_t{1} << (n_qubits - 1 - wire);
}

// apply X on one wire: permutes amplitudes
state_vector apply_x(const state_vector& s, std::size_t wire) {
    state_vector out = s;
    const std::size_t mask = wire_mask(s.n_qubits, wire);
    for (std::size_t k = 0; k < s.dim(); ++k) {
        out.amplitudes[k ^ mask] = s.amplitudes[k];
    }
    return out;
}

void apply_rx_row(state_vector& s, std::span<const double> thetas, double sign) {
    for (std::size_t w = 0; w < s.n_qubits; ++w) {
        qsim::apply_gate(s, qsim::gate::rx(w, sign * thetas[w]));
    }
}

void apply_cnot_ring_inverse(state_vector& s) {
    const std::size_t n = s.n_qubits;
    if (n == 2) {
        qsim::apply_gate(s, qsim::gate::cnot(0, 1));
    } else if (n >= 3) {
        for (std::size_t w = n; w-- > 0;) qsim::apply_gate(s, qsim::gate::cnot(w, (w + 1) % n));
    }
}

cplx inner(const state_vector& a, const state_vector& b) {
    cplx acc(0, 0);
    for (std::size_t k = 0; k < a.dim(); ++k) acc += std::conj(a.amplitudes[k]) * b.amplitudes[k];
    return acc;
}

} // namespace

adjoint_result adjoint_backward_states(const qsim::circuit_spec& spec,
                                       const std::vector<state_vector>& states,
                                       std::span<const double> upstream) {
    spec.validate();
    const std::size_t n = spec.n_qubits;
    const std::size_t L = spec.n_layers;
    require(states.size() == L + 1, errc::length_mismatch,
            "adjoint sweep needs n_layers + 1 cached states");
    require(upstream.size() == n, errc::length_mismatch,
            "upstream must have one entry per wire");

    // dL/d psi_final* : weight every amplitude by sum_i u_i * (+-1 on wire i)
    const state_vector& final_state = states[L];
    state_vector mu = final_state;
    for (std::size_t k = 0; k < mu.dim(); ++k) {
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            wsum += (k & wire_mask(n, i)) ? -upstream[i] : upstream[i];
        }
        mu.amplitudes[k] *= wsum;
    }

    adjoint_result out;
    out.d_weights.assign(L * n, 0.0);

    // reverse sweep: un-apply each layer from the dual state mu while the
    // rotated-but-not-entangled state chi comes from the forward cache
    for (std::size_t l = L; l-- > 0;) {
        apply_cnot_ring_inverse(mu);
        state_vector chi = states[l];
        apply_rx_row(chi, spec.layer_weights(l), 1.0);
        for (std::size_t w = 0; w < n; ++w) {
            // d theta = 2 Re <mu, -i/2 X_w chi> = Im <mu, X_w chi>
            out.d_weights[l * n + w] = inner(mu, apply_x(chi, w)).imag();
        }
        apply_rx_row(mu, spec.layer_weights(l), -1.0);
    }

    // gradient w.r.t. the real initial amplitudes
    out.d_state0.resize(mu.dim());
    for (std::size_t k = 0; k < mu.dim(); ++k) out.d_state0[k] = 2.0 * mu.amplitudes[k].real();
    return out;
}

quantum_gradients adjoint_backward(const qsim::circuit_spec& spec,
                                   std::span<const double> input_features,
                                   std::span<const double> upstream) {
    const state_vector embedded = qsim::amplitude_embed(input_features, spec.n_qubits);
    const auto states = qsim::circuit_forward_states(spec, embedded);
    adjoint_result core = adjoint_backward_states(spec, states, upstream);

    // chain through x -> x/||x||: J = (I - x_hat x_hat^T) / ||x||
    double sq = 0.0;
    for (double x : input_features) sq += x * x;
    const double nrm = std::sqrt(sq);
    double proj = 0.0;
    for (std::size_t k = 0; k < input_features.size(); ++k) {
        proj += core.d_state0[k] * input_features[k] / nrm;
    }
    quantum_gradients out;
    out.d_weights = std::move(core.d_weights);
    out.d_input_features.resize(input_features.size());
    for (std::size_t k = 0; k < input_features.size(); ++k) {
        out.d_input_features[k] = (core.d_state0[k] - proj * input_features[k] / nrm) / nrm;
    }
    return out;
}

double parameter_shift(const qsim::circuit_spec& spec,
                       std::span<const double> input_features,
                       std::size_t wire, std::size_t layer, std::size_t k) {
    spec.validate();
    require(wire < spec.n_qubits, errc::index_out_of_range, "parameter_shift: wire out of range");
    require(layer < spec.n_layers && k < spec.n_qubits, errc::index_out_of_range,
            "parameter_shift: weight index out of range");
    const state_vector embedded = qsim::amplitude_embed(input_features, spec.n_qubits);

    qsim::circuit_spec shifted = spec;
    constexpr double half_pi = 1.5707963267948966192313216916398;
    shifted.weight(layer, k) = spec.weight(layer, k) + half_pi;
    const double plus = qsim::circuit_forward(shifted, embedded).expectations[wire];
    shifted.weight(layer, k) = spec.weight(layer, k) - half_pi;
    const double minus = qsim::circuit_forward(shifted, embedded).expectations[wire];
    return (plus - minus) / 2.0;
}

} // namespace qhybrid::qgrad
