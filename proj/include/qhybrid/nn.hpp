#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qhybrid/rng.hpp"
#include "qhybrid/tensor.hpp"

namespace qhybrid::nn {

struct param_ref {
    std::string name;
    tensor* value = nullptr;
    tensor* grad = nullptr;
};

// number of trainable scalars over a parameter list
std::size_t count_parameters(std::span<const param_ref> params);

struct layer_info {
    std::string kind;
    std::vector<std::size_t> output_shape;
    std::size_t param_count = 0;
};

class layer {
public:
    virtual ~layer() = default;

    virtual std::string kind() const = 0;

    // shape inference; throws shape_mismatch / unsupported_shape on bad wiring
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;

    // forward caches whatever backward needs; backward returns d_input and
    // fills parameter gradients (overwriting, one backward per forward)
    virtual tensor forward(const tensor& input) = 0;
    virtual tensor backward(const tensor& upstream) = 0;

    virtual void collect_params(const std::string& /*prefix*/, std::vector<param_ref>& /*out*/) {}

protected:
    void require_cache(bool have) const;
};

class conv2d final : public layer {
public:
    conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
           std::size_t stride, std::size_t padding, rng& init_rng);

    std::string kind() const override { return "conv2d"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    tensor forward(const tensor& input) override;
    tensor backward(const tensor& upstream) override;
    void collect_params(const std::string& prefix, std::vector<param_ref>& out) override;

    tensor weight; // [O,C,k,k]
    tensor bias;   // [O]
    tensor d_weight;
    tensor d_bias;

private:
    std::size_t in_channels_, out_channels_, kernel_, stride_, padding_;
    tensor cached_input_;
    bool has_cache_ = false;
};

class maxpool2d final : public layer {
public:
    maxpool2d(std::size_t window, std::size_t stride);

    std::string kind() const override { return "maxpool2d"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    tensor forward(const tensor& input) override;
    tensor backward(const tensor& upstream) override;

private:
    std::size_t window_, stride_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_; // flat input index per output cell
    bool has_cache_ = false;
};

class relu final : public layer {
public:
    std::string kind() const override { return "relu"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return in;
    }
    tensor forward(const tensor& input) override;
    tensor backward(const tensor& upstream) override;

private:
    tensor cached_input_;
    bool has_cache_ = false;
};

class flatten final : public layer {
public:
    std::string kind() const override { return "flatten"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    tensor forward(const tensor& input) override;
    tensor backward(const tensor& upstream) override;

private:
    std::vector<std::size_t> in_shape_;
    bool has_cache_ = false;
};

class dense final : public layer {
public:
    dense(std::size_t in_features, std::size_t out_features, rng& init_rng);

    std::string kind() const override { return "dense"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override;
    tensor forward(const tensor& input) override;
    tensor backward(const tensor& upstream) override;
    void collect_params(const std::string& prefix, std::vector<param_ref>& out) override;

    tensor weight; // [O,F]: out = input * W^T + b
    tensor bias;   // [O]
    tensor d_weight;
    tensor d_bias;

private:
    std::size_t in_features_, out_features_;
    tensor cached_input_;
    bool has_cache_ = false;
};

// softmax rows of a [B,C] tensor, max-subtracted for stability
tensor softmax(const tensor& logits);

struct ce_result {
    double loss = 0.0;
    tensor d_logits; // (softmax - onehot) / B
};

ce_result softmax_cross_entropy(const tensor& logits, std::span<const int> labels);

enum class opt_kind { sgd, adam };

class optimizer {
public:
    optimizer(opt_kind kind, double learning_rate);

    void step(std::span<param_ref> params);

    opt_kind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    std::uint64_t step_count() const { return step_count_; }

private:
    opt_kind kind_;
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_; // Adam moments, one slot per param
};

} // namespace qhybrid::nn
