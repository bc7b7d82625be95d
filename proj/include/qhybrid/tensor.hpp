#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace qhybrid::nn {

// Dense row-major double tensor. Shape [B,C,H,W] for images, [B,F] for
// feature matrices, [O,F] for dense weights, and so on.
struct tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    tensor() = default;
    explicit tensor(std::vector<std::size_t> s);
    tensor(std::vector<std::size_t> s, std::vector<double> values);

    static tensor zeros(std::vector<std::size_t> s) { return tensor(std::move(s)); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    bool same_shape(const tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    void fill(double v);
    bool all_finite() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

} // namespace qhybrid::nn
