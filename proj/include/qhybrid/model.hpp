#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qhybrid/nn.hpp"
#include "qhybrid/qgrad.hpp"
#include "qhybrid/qsim.hpp"
#include "qhybrid/rng.hpp"

namespace qhybrid::model {

// Classical->quantum bridge. Takes [B, 2^n] activations, L2-normalizes each
// row (norm guarded by +1e-12 so an all-zero row stays finite), runs the
// ring-entangler circuit per sample, and emits the n Pauli-Z expectations.
// Backward chains the adjoint sweep through the normalization Jacobian.
class quantum_layer final : public nn::layer {
public:
    quantum_layer(std::size_t n_qubits, std::size_t n_layers, rng& init_rng);

    std::string kind() const override { return "quantum"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    nn::tensor forward(const nn::tensor& input) override;
    nn::tensor backward(const nn::tensor& upstream) override;
    void collect_params(const std::string& prefix, std::vector<nn::param_ref>& out) override;

    qsim::circuit_spec spec() const; // weights snapshot in circuit form

    std::size_t n_qubits() const { return n_qubits_; }
    std::size_t n_layers() const { return n_layers_; }
    void set_workers(int workers) { workers_ = workers; }

    nn::tensor weights; // [L, n], row-major matches circuit_spec layout
    nn::tensor d_weights;

private:
    std::size_t n_qubits_, n_layers_;
    int workers_ = 1;
    nn::tensor cached_input_;
    std::vector<std::vector<qsim::state_vector>> cached_states_; // per sample
    bool has_cache_ = false;
};

enum class model_kind { hybrid, classical };

const char* model_kind_name(model_kind k);

// Ordered layer pipeline with shape validation at construction. Forward
// caches per-layer activations implicitly (inside the layers) plus the
// input to the final layer, which doubles as the penultimate feature map
// used for embedding dumps (hybrid: the n quantum expectations; classical:
// the matched relu block output).
class model_graph {
public:
    model_graph(model_kind kind, std::vector<std::size_t> input_shape,
                std::vector<std::unique_ptr<nn::layer>> layers);

    // Reference stacks; dataset_shape is [C,H,W] and must be 1x28x28 or
    // 3x32x32. Wider shapes are out of scope and rejected. The documented
    // reference circuit is 4 qubits / 2 layers; other sizes widen or narrow
    // the bridge dense layer to 2^n accordingly.
    static model_graph build_hybrid(const std::vector<std::size_t>& dataset_shape,
                                    std::size_t n_classes, rng& init_rng,
                                    std::size_t n_qubits = 4, std::size_t n_layers = 2);
    static model_graph build_classical(const std::vector<std::size_t>& dataset_shape,
                                       std::size_t n_classes, rng& init_rng);

    nn::tensor forward(const nn::tensor& batch);
    // Fills every parameter gradient; returns d(batch) for attack use.
    nn::tensor backward(const nn::tensor& d_logits);

    std::vector<nn::param_ref> params();
    std::size_t parameter_count();

    model_kind kind() const { return kind_; }
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    std::size_t n_classes() const { return output_shape_.back(); }
    std::size_t penultimate_width() const { return penultimate_width_; }
    const nn::tensor& penultimate() const; // valid after a forward pass

    const std::vector<std::unique_ptr<nn::layer>>& layers() const { return layers_; }
    quantum_layer* quantum(); // nullptr for classical graphs
    void set_workers(int workers);

    std::string describe_json() const; // layer kinds, shapes, param counts

private:
    model_kind kind_;
    std::vector<std::size_t> input_shape_;  // per sample, no batch dim
    std::vector<std::size_t> output_shape_; // per sample
    std::vector<std::unique_ptr<nn::layer>> layers_;
    std::vector<nn::layer_info> infos_;
    std::size_t penultimate_width_ = 0;
    nn::tensor penultimate_;
    bool has_forward_ = false;
};

} // namespace qhybrid::model
