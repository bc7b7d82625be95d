#include "qhybrid/model.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "qhybrid/error.hpp"
#include "qhybrid/parallel.hpp"

namespace qhybrid::model {

namespace {
constexpr double norm_guard = 1e-12;
constexpr double two_pi = 6.283185307179586476925286766559;
} // namespace

quantum_layer::quantum_layer(std::size_t n_qubits, std::size_t n_layers, rng& init_rng)
    : weights({n_layers, n_qubits}),
      d_weights({n_layers, n_qubits}),
      n_qubits_(n_qubits),
      n_layers_(n_layers) {
    require(n_qubits >= 1, errc::wire_out_of_range, "quantum layer needs at least one qubit");
    require(n_layers >= 1, errc::shape_mismatch, "quantum layer needs at least one layer");
    for (double& w : weights.data) w = init_rng.uniform(0.0, two_pi);
}

qsim::circuit_spec quantum_layer::spec() const {
    qsim::circuit_spec s;
    s.n_qubits = n_qubits_;
    s.n_layers = n_layers_;
    s.weights = weights.data;
    return s;
}

std::vector<std::size_t> quantum_layer::output_shape(const std::vector<std::size_t>& in) const {
    require(in.size() == 2, errc::shape_mismatch, "quantum layer expects [B,F]");
    require(in[1] == (std::size_t{1} << n_qubits_), errc::shape_mismatch,
            "quantum layer expects " + std::to_string(std::size_t{1} << n_qubits_) +
                " input features, got " + std::to_string(in[1]));
    return {in[0], n_qubits_};
}

nn::tensor quantum_layer::forward(const nn::tensor& input) {
    const auto out_shape = output_shape(input.shape);
    const std::size_t B = input.dim(0), F = input.dim(1);
    nn::tensor out(out_shape);
    cached_states_.assign(B, {});
    const qsim::circuit_spec circuit = spec();
    parallel_for(B, workers_, [&](std::size_t b) {
        double s2 = 0.0;
        for (std::size_t f = 0; f < F; ++f) s2 += input.at(b, f) * input.at(b, f);
        const double r = 1.0 / (std::sqrt(s2) + norm_guard);
        qsim::state_vector psi;
        psi.n_qubits = n_qubits_;
        psi.amplitudes.resize(F);
        for (std::size_t f = 0; f < F; ++f) psi.amplitudes[f] = qsim::cplx(input.at(b, f) * r, 0.0);
        cached_states_[b] = qsim::circuit_forward_states(circuit, psi);
        const qsim::state_vector& final_state = cached_states_[b].back();
        for (std::size_t w = 0; w < n_qubits_; ++w) {
            out.at(b, w) = qsim::expectation_z(final_state, w);
        }
    });
    cached_input_ = input;
    has_cache_ = true;
    return out;
}

nn::tensor quantum_layer::backward(const nn::tensor& upstream) {
    require_cache(has_cache_);
    const nn::tensor& input = cached_input_;
    const std::size_t B = input.dim(0), F = input.dim(1);
    require(upstream.rank() == 2 && upstream.dim(0) == B && upstream.dim(1) == n_qubits_,
            errc::shape_mismatch, "quantum layer upstream must be [B,n]");
    const qsim::circuit_spec circuit = spec();
    nn::tensor d_input(input.shape);
    const std::size_t n_chunks = chunk_count(B, workers_);
    std::vector<std::vector<double>> chunk_dw( // per-chunk weight-grad partials
        n_chunks, std::vector<double>(weights.size(), 0.0));
    parallel_chunks(B, workers_, [&](std::size_t begin, std::size_t end, std::size_t c) {
        for (std::size_t b = begin; b < end; ++b) {
            std::vector<double> up(n_qubits_);
            for (std::size_t w = 0; w < n_qubits_; ++w) up[w] = upstream.at(b, w);
            const qgrad::adjoint_result res =
                qgrad::adjoint_backward_states(circuit, cached_states_[b], up);
            for (std::size_t i = 0; i < res.d_weights.size(); ++i) {
                chunk_dw[c][i] += res.d_weights[i];
            }
            // chain d_state0 through psi = x / (||x|| + guard)
            double s2 = 0.0, gdotx = 0.0;
            for (std::size_t f = 0; f < F; ++f) {
                s2 += input.at(b, f) * input.at(b, f);
                gdotx += res.d_state0[f] * input.at(b, f);
            }
            const double s = std::sqrt(s2);
            const double r = 1.0 / (s + norm_guard);
            const double coef = s > 0.0 ? gdotx * r * r / s : 0.0;
            for (std::size_t f = 0; f < F; ++f) {
                d_input.at(b, f) = res.d_state0[f] * r - coef * input.at(b, f);
            }
        }
    });
    d_weights.fill(0.0);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        for (std::size_t i = 0; i < weights.size(); ++i) d_weights.data[i] += chunk_dw[c][i];
    }
    has_cache_ = false;
    return d_input;
}

void quantum_layer::collect_params(const std::string& prefix, std::vector<nn::param_ref>& out) {
    out.push_back({prefix + ".weights", &weights, &d_weights});
}

const char* model_kind_name(model_kind k) {
    return k == model_kind::hybrid ? "hybrid" : "classical";
}

model_graph::model_graph(model_kind kind, std::vector<std::size_t> input_shape,
                         std::vector<std::unique_ptr<nn::layer>> layers)
    : kind_(kind), input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    require(!layers_.empty(), errc::shape_mismatch, "model needs at least one layer");
    std::size_t n_quantum = 0;
    std::vector<std::size_t> shape;
    shape.reserve(input_shape_.size() + 1);
    shape.push_back(1); // probe batch dim
    shape.insert(shape.end(), input_shape_.begin(), input_shape_.end());
    for (const auto& l : layers_) {
        shape = l->output_shape(shape); // throws on incompatible wiring
        std::vector<nn::param_ref> ps;
        l->collect_params("p", ps);
        nn::layer_info info;
        info.kind = l->kind();
        info.output_shape.assign(shape.begin() + 1, shape.end());
        info.param_count = nn::count_parameters(ps);
        infos_.push_back(std::move(info));
        if (l->kind() == "quantum") ++n_quantum;
    }
    require(shape.size() == 2, errc::shape_mismatch, "model must end in a [B,n_classes] layer");
    output_shape_.assign(shape.begin() + 1, shape.end());
    const std::size_t want_quantum = kind_ == model_kind::hybrid ? 1 : 0;
    require(n_quantum == want_quantum, errc::shape_mismatch,
            std::string(model_kind_name(kind_)) + " graph must contain exactly " +
                std::to_string(want_quantum) + " quantum layer(s), found " +
                std::to_string(n_quantum));
    penultimate_width_ =
        infos_.size() >= 2 ? nn::shape_product(infos_[infos_.size() - 2].output_shape)
                           : nn::shape_product(input_shape_);
}

namespace {

// Shared conv front ends; both model kinds use the same trunk so the
// comparison isolates the block before the classifier head.
void push_trunk(std::vector<std::unique_ptr<nn::layer>>& ls,
                const std::vector<std::size_t>& dataset_shape, std::size_t bridge_width, rng& r) {
    using std::make_unique;
    const bool mnist_shaped = dataset_shape == std::vector<std::size_t>{1, 28, 28};
    const bool cifar_shaped = dataset_shape == std::vector<std::size_t>{3, 32, 32};
    if (mnist_shaped) {
        ls.push_back(make_unique<nn::conv2d>(1, 8, 3, 1, 1, r));
        ls.push_back(make_unique<nn::relu>());
        ls.push_back(make_unique<nn::maxpool2d>(2, 2));
        ls.push_back(make_unique<nn::conv2d>(8, 16, 3, 1, 1, r));
        ls.push_back(make_unique<nn::relu>());
        ls.push_back(make_unique<nn::maxpool2d>(2, 2));
        ls.push_back(make_unique<nn::flatten>());
        ls.push_back(make_unique<nn::dense>(16 * 7 * 7, bridge_width, r));
        return;
    }
    if (cifar_shaped) {
        ls.push_back(make_unique<nn::conv2d>(3, 16, 3, 1, 1, r));
        ls.push_back(make_unique<nn::relu>());
        ls.push_back(make_unique<nn::maxpool2d>(2, 2));
        ls.push_back(make_unique<nn::conv2d>(16, 32, 3, 1, 1, r));
        ls.push_back(make_unique<nn::relu>());
        ls.push_back(make_unique<nn::maxpool2d>(2, 2));
        ls.push_back(make_unique<nn::flatten>());
        ls.push_back(make_unique<nn::dense>(32 * 8 * 8, bridge_width, r));
        return;
    }
    std::ostringstream os;
    os << "reference models accept 1x28x28 or 3x32x32 inputs, got [";
    for (std::size_t i = 0; i < dataset_shape.size(); ++i) os << (i ? "," : "") << dataset_shape[i];
    os << "]";
    fail(errc::unsupported_shape, os.str());
}

} // namespace

model_graph model_graph::build_hybrid(const std::vector<std::size_t>& dataset_shape,
                                      std::size_t n_classes, rng& init_rng,
                                      std::size_t n_qubits, std::size_t n_layers) {
    require(n_qubits >= 1 && n_qubits <= 10, errc::too_many_qubits,
            "hybrid models support 1..10 qubits");
    std::vector<std::unique_ptr<nn::layer>> ls;
    push_trunk(ls, dataset_shape, std::size_t{1} << n_qubits, init_rng);
    ls.push_back(std::make_unique<quantum_layer>(n_qubits, n_layers, init_rng));
    ls.push_back(std::make_unique<nn::dense>(n_qubits, n_classes, init_rng));
    return model_graph(model_kind::hybrid, dataset_shape, std::move(ls));
}

model_graph model_graph::build_classical(const std::vector<std::size_t>& dataset_shape,
                                         std::size_t n_classes, rng& init_rng) {
    std::vector<std::unique_ptr<nn::layer>> ls;
    push_trunk(ls, dataset_shape, 16, init_rng);
    ls.push_back(std::make_unique<nn::dense>(16, 16, init_rng));
    ls.push_back(std::make_unique<nn::relu>());
    ls.push_back(std::make_unique<nn::dense>(16, n_classes, init_rng));
    return model_graph(model_kind::classical, dataset_shape, std::move(ls));
}

nn::tensor model_graph::forward(const nn::tensor& batch) {
    require(batch.rank() == input_shape_.size() + 1, errc::shape_mismatch,
            "batch rank does not match model input");
    for (std::size_t i = 0; i < input_shape_.size(); ++i) {
        require(batch.dim(i + 1) == input_shape_[i], errc::shape_mismatch,
                "batch shape " + batch.shape_str() + " does not match model input");
    }
    nn::tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (i + 1 == layers_.size()) penultimate_ = x;
        x = layers_[i]->forward(x);
    }
    has_forward_ = true;
    return x;
}

nn::tensor model_graph::backward(const nn::tensor& d_logits) {
    require(has_forward_, errc::no_cached_forward, "model backward called without a forward pass");
    nn::tensor g = d_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = layers_[i]->backward(g);
    }
    has_forward_ = false;
    return g;
}

std::vector<nn::param_ref> model_graph::params() {
    std::vector<nn::param_ref> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect_params("layer" + std::to_string(i) + "." + layers_[i]->kind(), out);
    }
    return out;
}

std::size_t model_graph::parameter_count() {
    const auto ps = params();
    return nn::count_parameters(ps);
}

const nn::tensor& model_graph::penultimate() const {
    require(penultimate_.size() > 0, errc::no_cached_forward,
            "penultimate features require a forward pass");
    return penultimate_;
}

quantum_layer* model_graph::quantum() {
    for (auto& l : layers_) {
        if (auto* q = dynamic_cast<quantum_layer*>(l.get())) return q;
    }
    return nullptr;
}

void model_graph::set_workers(int workers) {
    if (auto* q = quantum()) q->set_workers(workers);
}

std::string model_graph::describe_json() const {
    nlohmann::json doc;
    doc["kind"] = model_kind_name(kind_);
    doc["input_shape"] = input_shape_;
    doc["n_classes"] = output_shape_.back();
    doc["penultimate_width"] = penultimate_width_;
    std::size_t total = 0;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& info : infos_) {
        nlohmann::json l;
        l["kind"] = info.kind;
        l["output_shape"] = info.output_shape;
        l["params"] = info.param_count;
        layers.push_back(std::move(l));
        total += info.param_count;
    }
    doc["layers"] = std::move(layers);
    doc["parameter_count"] = total;
    return doc.dump(2);
}

} // namespace qhybrid::model
