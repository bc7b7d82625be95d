#include "qhybrid/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qhybrid/error.hpp"

namespace qhybrid::nn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t d : shape) p *= d;
    return p;
}

tensor::tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(shape_product(shape), 0.0);
}

tensor::tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    require(data.size() == shape_product(shape), errc::shape_mismatch,
            "tensor data length does not match shape " + shape_str());
}

std::string tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

void tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

std::size_t count_parameters(std::span<const param_ref> params) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.value->size();
    return total;
}

void layer::require_cache(bool have) const {
    require(have, errc::no_cached_forward, kind() + ": backward called without a forward pass");
}

namespace {

constexpr double bias_init = 0.01;

void he_uniform(tensor& t, std::size_t fan_in, rng& r) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& x : t.data) x = r.uniform(-bound, bound);
}

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    return (in + 2 * p - k) / s + 1;
}

} // namespace

conv2d::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, rng& init_rng)
    : weight({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      d_weight({out_channels, in_channels, kernel, kernel}),
      d_bias({out_channels}),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
    require(stride >= 1, errc::shape_mismatch, "conv2d stride must be >= 1");
    he_uniform(weight, in_channels * kernel * kernel, init_rng);
    bias.fill(bias_init);
}

std::vector<std::size_t> conv2d::output_shape(const std::vector<std::size_t>& in) const {
    require(in.size() == 4, errc::shape_mismatch, "conv2d expects [B,C,H,W]");
    require(in[1] == in_channels_, errc::shape_mismatch,
            "conv2d expects " + std::to_string(in_channels_) + " input channels, got " +
                std::to_string(in[1]));
    require(in[2] + 2 * padding_ >= kernel_ && in[3] + 2 * padding_ >= kernel_,
            errc::shape_mismatch, "conv2d kernel does not fit padded input");
    return {in[0], out_channels_, conv_out_dim(in[2], kernel_, stride_, padding_),
            conv_out_dim(in[3], kernel_, stride_, padding_)};
}

tensor conv2d::forward(const tensor& input) {
    const auto out_shape = output_shape(input.shape);
    const std::size_t B = input.dim(0), H = input.dim(2), W = input.dim(3);
    const std::size_t OH = out_shape[2], OW = out_shape[3];
    tensor out(out_shape);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_channels_; ++o) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    double acc = bias.at(o);
                    for (std::size_t c = 0; c < in_channels_; ++c) {
                        for (std::size_t ky = 0; ky < kernel_; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(padding_);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < kernel_; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(padding_);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                acc += input.at(b, c, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix)) *
                                       weight.at(o, c, ky, kx);
                            }
                        }
                    }
                    out.at(b, o, oy, ox) = acc;
                }
            }
        }
    }
    cached_input_ = input;
    has_cache_ = true;
    return out;
}

tensor conv2d::backward(const tensor& upstream) {
    require_cache(has_cache_);
    const tensor& input = cached_input_;
    const std::size_t B = input.dim(0), H = input.dim(2), W = input.dim(3);
    const std::size_t OH = upstream.dim(2), OW = upstream.dim(3);
    d_weight.fill(0.0);
    d_bias.fill(0.0);
    tensor d_input(input.shape);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_channels_; ++o) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    const double g = upstream.at(b, o, oy, ox);
                    if (g == 0.0) continue;
                    d_bias.at(o) += g;
                    for (std::size_t c = 0; c < in_channels_; ++c) {
                        for (std::size_t ky = 0; ky < kernel_; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                static_cast<std::ptrdiff_t>(padding_);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < kernel_; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                    static_cast<std::ptrdiff_t>(padding_);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                const auto uy = static_cast<std::size_t>(iy);
                                const auto ux = static_cast<std::size_t>(ix);
                                d_weight.at(o, c, ky, kx) += g * input.at(b, c, uy, ux);
                                d_input.at(b, c, uy, ux) += g * weight.at(o, c, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    }
    has_cache_ = false;
    return d_input;
}

void conv2d::collect_params(const std::string& prefix, std::vector<param_ref>& out) {
    out.push_back({prefix + ".weight", &weight, &d_weight});
    out.push_back({prefix + ".bias", &bias, &d_bias});
}

maxpool2d::maxpool2d(std::size_t window, std::size_t stride) : window_(window), stride_(stride) {
    require(window >= 1 && stride >= 1, errc::shape_mismatch, "maxpool2d window/stride must be >= 1");
}

std::vector<std::size_t> maxpool2d::output_shape(const std::vector<std::size_t>& in) const {
    require(in.size() == 4, errc::shape_mismatch, "maxpool2d expects [B,C,H,W]");
    require(window_ <= in[2] && window_ <= in[3], errc::shape_mismatch,
            "maxpool2d window larger than spatial dims");
    return {in[0], in[1], (in[2] - window_) / stride_ + 1, (in[3] - window_) / stride_ + 1};
}

tensor maxpool2d::forward(const tensor& input) {
    const auto out_shape = output_shape(input.shape);
    const std::size_t B = input.dim(0), C = input.dim(1);
    const std::size_t OH = out_shape[2], OW = out_shape[3];
    tensor out(out_shape);
    argmax_.assign(out.size(), 0);
    std::size_t oi = 0;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t ky = 0; ky < window_; ++ky) {
                        for (std::size_t kx = 0; kx < window_; ++kx) {
                            const std::size_t iy = oy * stride_ + ky;
                            const std::size_t ix = ox * stride_ + kx;
                            const double v = input.at(b, c, iy, ix);
                            // strict > keeps the first maximum in row-major scan order
                            if (v > best) {
                                best = v;
                                best_idx = ((b * C + c) * input.dim(2) + iy) * input.dim(3) + ix;
                            }
                        }
                    }
                    out.at(b, c, oy, ox) = best;
                    argmax_[oi] = best_idx;
                }
            }
        }
    }
    in_shape_ = input.shape;
    has_cache_ = true;
    return out;
}

tensor maxpool2d::backward(const tensor& upstream) {
    require_cache(has_cache_);
    tensor d_input(in_shape_);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        d_input.data[argmax_[i]] += upstream.data[i];
    }
    has_cache_ = false;
    return d_input;
}

tensor relu::forward(const tensor& input) {
    tensor out = input;
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    cached_input_ = input;
    has_cache_ = true;
    return out;
}

tensor relu::backward(const tensor& upstream) {
    require_cache(has_cache_);
    tensor d_input = upstream;
    for (std::size_t i = 0; i < d_input.size(); ++i) {
        if (cached_input_.data[i] <= 0.0) d_input.data[i] = 0.0; // subgradient 0 at 0
    }
    has_cache_ = false;
    return d_input;
}

std::vector<std::size_t> flatten::output_shape(const std::vector<std::size_t>& in) const {
    require(in.size() >= 2, errc::shape_mismatch, "flatten expects a batched tensor");
    std::size_t f = 1;
    for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
    return {in[0], f};
}

tensor flatten::forward(const tensor& input) {
    in_shape_ = input.shape;
    has_cache_ = true;
    tensor out = input;
    out.shape = output_shape(input.shape);
    return out;
}

tensor flatten::backward(const tensor& upstream) {
    require_cache(has_cache_);
    tensor d_input = upstream;
    d_input.shape = in_shape_;
    has_cache_ = false;
    return d_input;
}

dense::dense(std::size_t in_features, std::size_t out_features, rng& init_rng)
    : weight({out_features, in_features}),
      bias({out_features}),
      d_weight({out_features, in_features}),
      d_bias({out_features}),
      in_features_(in_features),
      out_features_(out_features) {
    he_uniform(weight, in_features, init_rng);
    bias.fill(bias_init);
}

std::vector<std::size_t> dense::output_shape(const std::vector<std::size_t>& in) const {
    require(in.size() == 2, errc::shape_mismatch, "dense expects [B,F]");
    require(in[1] == in_features_, errc::shape_mismatch,
            "dense expects " + std::to_string(in_features_) + " input features, got " +
                std::to_string(in[1]));
    return {in[0], out_features_};
}

tensor dense::forward(const tensor& input) {
    const auto out_shape = output_shape(input.shape);
    const std::size_t B = input.dim(0);
    tensor out(out_shape);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_features_; ++o) {
            double acc = bias.at(o);
            for (std::size_t f = 0; f < in_features_; ++f) {
                acc += input.at(b, f) * weight.at(o, f);
            }
            out.at(b, o) = acc;
        }
    }
    cached_input_ = input;
    has_cache_ = true;
    return out;
}

tensor dense::backward(const tensor& upstream) {
    require_cache(has_cache_);
    const tensor& input = cached_input_;
    const std::size_t B = input.dim(0);
    d_weight.fill(0.0);
    d_bias.fill(0.0);
    tensor d_input(input.shape);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_features_; ++o) {
            const double g = upstream.at(b, o);
            d_bias.at(o) += g;
            for (std::size_t f = 0; f < in_features_; ++f) {
                d_weight.at(o, f) += g * input.at(b, f);
                d_input.at(b, f) += g * weight.at(o, f);
            }
        }
    }
    has_cache_ = false;
    return d_input;
}

void dense::collect_params(const std::string& prefix, std::vector<param_ref>& out) {
    out.push_back({prefix + ".weight", &weight, &d_weight});
    out.push_back({prefix + ".bias", &bias, &d_bias});
}

tensor softmax(const tensor& logits) {
    require(logits.rank() == 2, errc::shape_mismatch, "softmax expects [B,C]");
    const std::size_t B = logits.dim(0), C = logits.dim(1);
    tensor out(logits.shape);
    for (std::size_t b = 0; b < B; ++b) {
        double mx = logits.at(b, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits.at(b, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double e = std::exp(logits.at(b, c) - mx);
            out.at(b, c) = e;
            z += e;
        }
        for (std::size_t c = 0; c < C; ++c) out.at(b, c) /= z;
    }
    return out;
}

ce_result softmax_cross_entropy(const tensor& logits, std::span<const int> labels) {
    require(logits.rank() == 2, errc::shape_mismatch, "softmax_cross_entropy expects [B,C]");
    const std::size_t B = logits.dim(0), C = logits.dim(1);
    require(labels.size() == B, errc::shape_mismatch, "one label per batch row required");
    for (int y : labels) {
        require(y >= 0 && static_cast<std::size_t>(y) < C, errc::label_out_of_range,
                "label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
    }
    ce_result res;
    res.d_logits = tensor(logits.shape);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double mx = logits.at(b, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits.at(b, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(logits.at(b, c) - mx);
        const double logz = std::log(z) + mx;
        loss += logz - logits.at(b, static_cast<std::size_t>(labels[b]));
        for (std::size_t c = 0; c < C; ++c) {
            const double p = std::exp(logits.at(b, c) - logz);
            res.d_logits.at(b, c) =
                (p - (static_cast<std::size_t>(labels[b]) == c ? 1.0 : 0.0)) /
                static_cast<double>(B);
        }
    }
    res.loss = loss / static_cast<double>(B);
    return res;
}

optimizer::optimizer(opt_kind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {
    require(learning_rate > 0.0, errc::config_error, "learning rate must be positive");
}

void optimizer::step(std::span<param_ref> params) {
    if (kind_ == opt_kind::sgd) {
        ++step_count_;
        for (auto& p : params) {
            require(p.value->same_shape(*p.grad), errc::shape_mismatch,
                    p.name + ": gradient shape differs from parameter shape");
            for (std::size_t i = 0; i < p.value->size(); ++i) {
                p.value->data[i] -= lr_ * p.grad->data[i];
            }
        }
        return;
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t j = 0; j < params.size(); ++j) {
            m_[j].assign(params[j].value->size(), 0.0);
            v_[j].assign(params[j].value->size(), 0.0);
        }
    }
    require(m_.size() == params.size(), errc::shape_mismatch,
            "optimizer state does not match parameter list");
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(beta1_, t);
    const double bc2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t j = 0; j < params.size(); ++j) {
        auto& p = params[j];
        require(p.value->same_shape(*p.grad), errc::shape_mismatch,
                p.name + ": gradient shape differs from parameter shape");
        require(m_[j].size() == p.value->size(), errc::shape_mismatch,
                p.name + ": optimizer moment size mismatch");
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            const double g = p.grad->data[i];
            m_[j][i] = beta1_ * m_[j][i] + (1.0 - beta1_) * g;
            v_[j][i] = beta2_ * v_[j][i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[j][i] / bc1;
            const double vhat = v_[j][i] / bc2;
            p.value->data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace qhybrid::nn
