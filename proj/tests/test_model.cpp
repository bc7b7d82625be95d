#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "qhybrid/error.hpp"
#include "qhybrid/model.hpp"
#include "qhybrid/qgrad.hpp"
#include "qhybrid/rng.hpp"

using namespace qhybrid;
using nn::tensor;

namespace {

constexpr double pi = std::numbers::pi;

tensor random_tensor(std::vector<std::size_t> shape, rng& r, double scale = 1.0) {
    tensor t(std::move(shape));
    for (auto& v : t.data) v = scale * r.normal();
    return t;
}

// small hybrid graph: 1x4x4 image -> conv -> relu -> flatten -> bridge ->
// 2-qubit circuit -> 3-way head
model::model_graph tiny_hybrid(rng& r) {
    std::vector<std::unique_ptr<nn::layer>> layers;
    layers.push_back(std::make_unique<nn::conv2d>(1, 2, 3, 1, 1, r));
    layers.push_back(std::make_unique<nn::relu>());
    layers.push_back(std::make_unique<nn::flatten>());
    layers.push_back(std::make_unique<nn::dense>(32, 4, r));
    layers.push_back(std::make_unique<model::quantum_layer>(2, 1, r));
    layers.push_back(std::make_unique<nn::dense>(2, 3, r));
    return model::model_graph(model::model_kind::hybrid, {1, 4, 4}, std::move(layers));
}

double graph_probe(model::model_graph& m, const tensor& input, const tensor& upstream) {
    tensor out = m.forward(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += upstream.data[i] * out.data[i];
    return acc;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("quantum layer has one weight per rotation") {
    rng r(401);
    model::quantum_layer q(4, 2, r);
    CHECK(q.weights.shape == std::vector<std::size_t>{2, 4});
    CHECK(q.output_shape({5, 16}) == std::vector<std::size_t>{5, 4});

    std::vector<nn::param_ref> params;
    q.collect_params("layer5.quantum", params);
    REQUIRE(params.size() == 1);
    CHECK(params[0].name == "layer5.quantum.weights");
    CHECK(nn::count_parameters(params) == 8);

    for (double w : q.weights.data) {
        CHECK(w >= 0.0);
        CHECK(w < 2.0 * pi);
    }

    CHECK_THROWS_AS(q.output_shape({5, 8}), error);  // needs width 2^n
    CHECK_THROWS_AS(q.output_shape({5}), error);
}

TEST_CASE("quantum layer forward matches the raw circuit on unit-scale input") {
    rng r(402);
    model::quantum_layer q(3, 2, r);
    tensor x = random_tensor({4, 8}, r);

    tensor out = q.forward(x);
    REQUIRE(out.shape == std::vector<std::size_t>{4, 3});

    auto spec = q.spec();
    for (std::size_t s = 0; s < 4; ++s) {
        std::vector<double> feats(x.data.begin() + 8 * s, x.data.begin() + 8 * (s + 1));
        auto state = qsim::amplitude_embed(feats, 3);
        auto fwd = qsim::circuit_forward(spec, state);
        for (std::size_t w = 0; w < 3; ++w) {
            // the layer normalizes with a 1e-12 guard, the oracle exactly
            CHECK(std::abs(out.at(s, w) - fwd.expectations[w]) <= 1e-9);
            CHECK(out.at(s, w) >= -1.0 - 1e-12);
            CHECK(out.at(s, w) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("quantum layer weight gradients match the parameter-shift oracle") {
    rng r(403);
    model::quantum_layer q(2, 2, r);
    tensor x = random_tensor({3, 4}, r);
    q.forward(x);

    tensor upstream({3, 2});
    upstream.fill(0.0);
    upstream.at(1, 0) = 1.0; // isolate sample 1, wire 0
    q.backward(upstream);

    auto spec = q.spec();
    std::vector<double> feats(x.data.begin() + 4, x.data.begin() + 8);
    for (std::size_t layer = 0; layer < 2; ++layer)
        for (std::size_t k = 0; k < 2; ++k) {
            double shift = qgrad::parameter_shift(spec, feats, 0, layer, k);
            CHECK(std::abs(q.d_weights.at(layer, k) - shift) <= 1e-8);
        }
}

TEST_CASE("quantum layer input gradients match finite differences") {
    rng r(404);
    model::quantum_layer q(2, 2, r);
    tensor x = random_tensor({2, 4}, r);
    tensor upstream = random_tensor({2, 2}, r);

    q.forward(x);
    tensor d_input = q.backward(upstream);
    REQUIRE(d_input.same_shape(x));

    auto layer_probe = [&](const tensor& in) {
        tensor out = q.forward(in);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += upstream.data[i] * out.data[i];
        return acc;
    };
    const double h = 1e-6;
    for (std::size_t j = 0; j < x.size(); ++j) {
        tensor plus = x, minus = x;
        plus.data[j] += h;
        minus.data[j] -= h;
        double fd = (layer_probe(plus) - layer_probe(minus)) / (2.0 * h);
        CHECK(std::abs(d_input.data[j] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("bridge normalization makes the quantum layer scale invariant") {
    rng r(405);
    model::quantum_layer q(2, 1, r);
    tensor x = random_tensor({2, 4}, r, 2.0); // row norms well above the guard
    tensor scaled = x;
    for (auto& v : scaled.data) v *= 7.0;

    tensor a = q.forward(x);
    tensor b = q.forward(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= 1e-11);
}

TEST_CASE("all-zero bridge rows stay finite with zero gradients") {
    rng r(406);
    model::quantum_layer q(2, 1, r);
    tensor x({2, 4});
    x.fill(0.0);
    x.at(1, 2) = 1.5; // second row is healthy

    tensor out = q.forward(x);
    CHECK(out.all_finite());
    CHECK(out.at(0, 0) == 0.0); // zero state has zero expectation everywhere
    CHECK(out.at(0, 1) == 0.0);

    tensor upstream({2, 2});
    upstream.fill(1.0);
    tensor d = q.backward(upstream);
    CHECK(d.all_finite());
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(0, 3) == 0.0);
}

TEST_CASE("graph forward/backward gradients pass a finite-difference audit") {
    rng r(407);
    auto m = tiny_hybrid(r);
    tensor x = random_tensor({2, 1, 4, 4}, r);
    tensor upstream = random_tensor({2, 3}, r);

    graph_probe(m, x, upstream);
    tensor d_input = m.backward(upstream);
    REQUIRE(d_input.same_shape(x));

    auto params = m.params();
    std::vector<tensor> grads;
    for (auto& p : params) grads.push_back(*p.grad);

    const double h = 1e-5;
    for (std::size_t pi_ = 0; pi_ < params.size(); ++pi_) {
        for (std::size_t j = 0; j < params[pi_].value->size(); j += 3) {
            double saved = params[pi_].value->data[j];
            params[pi_].value->data[j] = saved + h;
            double up = graph_probe(m, x, upstream);
            params[pi_].value->data[j] = saved - h;
            double down = graph_probe(m, x, upstream);
            params[pi_].value->data[j] = saved;
            double fd = (up - down) / (2.0 * h);
            INFO(params[pi_].name, " index ", j);
            CHECK(std::abs(grads[pi_].data[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }

    for (std::size_t j = 0; j < x.size(); j += 2) {
        tensor plus = x, minus = x;
        plus.data[j] += h;
        minus.data[j] -= h;
        double up = graph_probe(m, plus, upstream);
        double down = graph_probe(m, minus, upstream);
        double fd = (up - down) / (2.0 * h);
        CHECK(std::abs(d_input.data[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("graph construction validates layer wiring") {
    rng r(408);
    // dense width clashes with the flattened image
    std::vector<std::unique_ptr<nn::layer>> bad;
    bad.push_back(std::make_unique<nn::flatten>());
    bad.push_back(std::make_unique<nn::dense>(10, 4, r));
    CHECK_THROWS_AS(
        model::model_graph(model::model_kind::classical, {1, 4, 4}, std::move(bad)), error);

    // hybrid graphs carry exactly one quantum layer
    std::vector<std::unique_ptr<nn::layer>> none;
    none.push_back(std::make_unique<nn::flatten>());
    none.push_back(std::make_unique<nn::dense>(16, 3, r));
    CHECK_THROWS_AS(
        model::model_graph(model::model_kind::hybrid, {1, 4, 4}, std::move(none)), error);

    std::vector<std::unique_ptr<nn::layer>> extra;
    extra.push_back(std::make_unique<nn::flatten>());
    extra.push_back(std::make_unique<nn::dense>(16, 4, r));
    extra.push_back(std::make_unique<model::quantum_layer>(2, 1, r));
    extra.push_back(std::make_unique<model::quantum_layer>(2, 1, r));
    CHECK_THROWS_AS(
        model::model_graph(model::model_kind::hybrid, {1, 4, 4}, std::move(extra)), error);

    // classical graphs carry none
    std::vector<std::unique_ptr<nn::layer>> misplaced;
    misplaced.push_back(std::make_unique<nn::flatten>());
    misplaced.push_back(std::make_unique<nn::dense>(16, 4, r));
    misplaced.push_back(std::make_unique<model::quantum_layer>(2, 1, r));
    CHECK_THROWS_AS(
        model::model_graph(model::model_kind::classical, {1, 4, 4}, std::move(misplaced)),
        error);
}

TEST_CASE("reference stacks hit their frozen parameter counts") {
    rng r(409);
    auto mnist_h = model::model_graph::build_hybrid({1, 28, 28}, 10, r);
    auto mnist_c = model::model_graph::build_classical({1, 28, 28}, 10, r);
    CHECK(mnist_h.parameter_count() == 13866);
    CHECK(mnist_c.parameter_count() == 14250);
    CHECK(mnist_h.parameter_count() < mnist_c.parameter_count());

    auto cifar_h = model::model_graph::build_hybrid({3, 32, 32}, 100, r);
    auto cifar_c = model::model_graph::build_classical({3, 32, 32}, 100, r);
    CHECK(cifar_h.parameter_count() == 38380);
    CHECK(cifar_c.parameter_count() == 39844);
    CHECK(cifar_h.parameter_count() < cifar_c.parameter_count());

    CHECK(mnist_h.n_classes() == 10);
    CHECK(mnist_h.penultimate_width() == 4);
    CHECK(mnist_c.penultimate_width() == 16);
    CHECK(mnist_h.quantum() != nullptr);
    CHECK(mnist_c.quantum() == nullptr);
}

TEST_CASE("reference builder rejects unsupported shapes and qubit counts") {
    rng r(410);
    CHECK_THROWS_AS(model::model_graph::build_hybrid({2, 28, 28}, 10, r), error);
    CHECK_THROWS_AS(model::model_graph::build_hybrid({1, 32, 32}, 10, r), error);
    CHECK_THROWS_AS(model::model_graph::build_hybrid({1, 28, 28}, 10, r, 11, 2), error);
    CHECK_THROWS_AS(model::model_graph::build_hybrid({1, 28, 28}, 10, r, 0, 2), error);

    // non-default circuit sizes widen the bridge to 2^n
    auto small = model::model_graph::build_hybrid({1, 28, 28}, 10, r, 3, 1);
    CHECK(small.penultimate_width() == 3);
    small.forward(tensor({1, 1, 28, 28}));
}

TEST_CASE("penultimate features are the quantum expectations") {
    rng r(411);
    auto m = tiny_hybrid(r);
    CHECK_THROWS_AS(m.penultimate(), error);

    tensor x = random_tensor({3, 1, 4, 4}, r);
    tensor logits = m.forward(x);
    CHECK(logits.shape == std::vector<std::size_t>{3, 3});

    const tensor& pen = m.penultimate();
    CHECK(pen.shape == std::vector<std::size_t>{3, 2});
    for (double v : pen.data) {
        CHECK(v >= -1.0 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("graph backward requires a forward pass") {
    rng r(412);
    auto m = tiny_hybrid(r);
    tensor upstream({2, 3});
    CHECK_THROWS_AS(m.backward(upstream), error);
}

TEST_CASE("describe json lists the full stack") {
    rng r(413);
    auto m = model::model_graph::build_hybrid({1, 28, 28}, 10, r);
    auto j = nlohmann::json::parse(m.describe_json());
    CHECK(j["kind"] == "hybrid");
    CHECK(j["parameter_count"] == 13866);
    CHECK(j["n_classes"] == 10);
    CHECK(j["penultimate_width"] == 4);
    CHECK(j["input_shape"] == nlohmann::json({1, 28, 28}));
    REQUIRE(j["layers"].is_array());
    bool has_quantum = false;
    for (const auto& l : j["layers"]) has_quantum |= (l["kind"] == "quantum");
    CHECK(has_quantum);
}

TEST_CASE("worker count does not change forward results") {
    rng r(414);
    model::quantum_layer q(3, 2, r);
    tensor x = random_tensor({7, 8}, r);
    tensor upstream = random_tensor({7, 3}, r);

    q.set_workers(1);
    tensor out1 = q.forward(x);
    q.backward(upstream);
    tensor dw1 = q.d_weights;

    q.set_workers(3);
    tensor out3 = q.forward(x);
    q.backward(upstream);
    tensor dw3 = q.d_weights;

    for (std::size_t i = 0; i < out1.size(); ++i) CHECK(out1.data[i] == out3.data[i]);
    for (std::size_t i = 0; i < dw1.size(); ++i)
        CHECK(std::abs(dw1.data[i] - dw3.data[i]) <= 1e-12);
}

} // TEST_SUITE
