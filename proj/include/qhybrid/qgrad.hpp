#pragma once

#include <span>
#include <vector>

#include "qhybrid/qsim.hpp"

namespace qhybrid::qgrad {

struct quantum_gradients {
    std::vector<double> d_weights;        // row-major [n_layers][n_qubits]
    std::vector<double> d_input_features; // one entry per embedded feature (2^n)
};

// Gradient of a loss L(<Z_0>, ..., <Z_{n-1}>) with respect to every circuit
// weight and, through the amplitude-embedding normalization x -> x/||x||,
// with respect to the raw input features. upstream[i] = dL/d<Z_i>.
// Exact reverse sweep over the cached per-layer states.
quantum_gradients adjoint_backward(const qsim::circuit_spec& spec,
                                   std::span<const double> input_features,
                                   std::span<const double> upstream);

// Core of the sweep, reusable with a caller-supplied initial state and its
// cached layer states (as produced by qsim::circuit_forward_states).
// d_state0 is the gradient with respect to the real part of the initial
// amplitudes; valid when the initial state is real, which holds for both
// embedding paths used here.
struct adjoint_result {
    std::vector<double> d_weights;
    std::vector<double> d_state0;
};

adjoint_result adjoint_backward_states(const qsim::circuit_spec& spec,
                                       const std::vector<qsim::state_vector>& states,
                                       std::span<const double> upstream);

// Two-point shift rule: d<Z_wire>/d theta_{l,k} evaluated as
// (<Z>(theta + pi/2) - <Z>(theta - pi/2)) / 2. Exact for the RX generators
// used in the entangler; kept as an independent oracle for the sweep above.
double parameter_shift(const qsim::circuit_spec& spec,
                       std::span<const double> input_features,
                       std::size_t wire, std::size_t layer, std::size_t k);

} // namespace qhybrid::qgrad
