#include "qhybrid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "qhybrid/error.hpp"
#include "qhybrid/rng.hpp"
#include "qhybrid/train.hpp"

namespace qhybrid::eval {

void attack_config::validate() const {
    require(epsilon >= 0.0, errc::config_error, "epsilon must be >= 0");
    require(std::isfinite(epsilon), errc::config_error, "epsilon must be finite");
}

nn::tensor fgsm_attack(model::model_graph& m, const nn::tensor& raw_batch,
                       std::span<const int> labels, const attack_config& cfg,
                       const data::norm_stats& stats) {
    cfg.validate();
    require(raw_batch.rank() == 4, errc::shape_mismatch, "attack expects a raw [B,C,H,W] batch");
    require(raw_batch.dim(0) == labels.size(), errc::shape_mismatch,
            "one label per attacked sample required");

    const nn::tensor x = data::normalize_batch(raw_batch, stats);
    const nn::tensor logits = m.forward(x);
    const nn::ce_result ce = nn::softmax_cross_entropy(logits, labels);
    const nn::tensor d_normalized = m.backward(ce.d_logits);

    // d(raw) = d(normalized) / std per channel; sign(0) stays 0 so eps=0
    // leaves the batch untouched.
    nn::tensor out = raw_batch;
    const std::size_t C = raw_batch.dim(1);
    const std::size_t plane = raw_batch.dim(2) * raw_batch.dim(3);
    for (std::size_t b = 0; b < raw_batch.dim(0); ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (b * C + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const double g = d_normalized.data[off + j] / stats.stddev[c];
                const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
                out.data[off + j] = std::clamp(out.data[off + j] + cfg.epsilon * s, 0.0, 1.0);
            }
        }
    }
    return out;
}

robustness_report robust_accuracy(model::model_graph& m, const data::dataset& split,
                                  const attack_config& cfg, std::size_t batch_size) {
    cfg.validate();
    require(split.size() > 0, errc::empty_split, "robustness evaluation needs a nonempty split");
    split.validate();
    const std::size_t N = split.size();
    std::vector<int> clean_preds, adv_preds;
    clean_preds.reserve(N);
    adv_preds.reserve(N);
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t len = std::min(batch_size, N - start);
        std::vector<std::size_t> idx(len);
        for (std::size_t j = 0; j < len; ++j) idx[j] = start + j;
        const data::batch b = data::gather(split, idx);

        const nn::tensor clean_logits = m.forward(data::normalize_batch(b.images, split.normalization));
        const auto cp = train::predict_labels(clean_logits);
        clean_preds.insert(clean_preds.end(), cp.begin(), cp.end());

        const nn::tensor adv = fgsm_attack(m, b.images, b.labels, cfg, split.normalization);
        const nn::tensor adv_logits = m.forward(data::normalize_batch(adv, split.normalization));
        const auto ap = train::predict_labels(adv_logits);
        adv_preds.insert(adv_preds.end(), ap.begin(), ap.end());
    }
    robustness_report rep;
    rep.epsilon = cfg.epsilon;
    rep.clean_accuracy = train::accuracy_score(clean_preds, split.labels);
    rep.robust_accuracy = train::accuracy_score(adv_preds, split.labels);
    return rep;
}

embedding_dump dump_embeddings(model::model_graph& m, const data::dataset& split,
                               std::size_t batch_size) {
    require(split.size() > 0, errc::empty_split, "embedding dump needs a nonempty split");
    split.validate();
    const std::size_t N = split.size();
    const std::size_t F = m.penultimate_width();
    embedding_dump dump;
    dump.features = nn::tensor({N, F});
    dump.labels = split.labels;
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t len = std::min(batch_size, N - start);
        std::vector<std::size_t> idx(len);
        for (std::size_t j = 0; j < len; ++j) idx[j] = start + j;
        const data::batch b = data::gather(split, idx);
        (void)m.forward(data::normalize_batch(b.images, split.normalization));
        const nn::tensor& feats = m.penultimate();
        require(feats.size() == len * F, errc::shape_mismatch,
                "penultimate width does not match the declared model width");
        std::copy_n(feats.data.begin(), len * F,
                    dump.features.data.begin() + static_cast<std::ptrdiff_t>(start * F));
    }
    return dump;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// v -= (v . u) u for each earlier component u, then renormalize; returns
// false when v collapses to (numerical) zero.
bool orthonormalize(std::vector<double>& v, const nn::tensor& components, std::size_t n_prev) {
    const std::size_t F = v.size();
    for (std::size_t p = 0; p < n_prev; ++p) {
        std::span<const double> u(components.data.data() + p * F, F);
        const double proj = dot(v, u);
        for (std::size_t i = 0; i < F; ++i) v[i] -= proj * u[i];
    }
    const double nrm = std::sqrt(dot(v, v));
    if (nrm < 1e-150) return false;
    for (double& x : v) x /= nrm;
    return true;
}

} // namespace

pca_result pca_project(const embedding_dump& emb, std::size_t k) {
    const std::size_t N = emb.features.dim(0);
    const std::size_t F = emb.features.dim(1);
    require(N >= 2, errc::degenerate_input, "PCA needs at least two samples");
    require(k >= 1 && k <= F, errc::config_error,
            "component count must lie in [1, feature width]");

    // mean-center
    nn::tensor centered = emb.features;
    std::vector<double> mean(F, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t f = 0; f < F; ++f) mean[f] += centered.at(i, f);
    }
    for (double& v : mean) v /= static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t f = 0; f < F; ++f) centered.at(i, f) -= mean[f];
    }

    // covariance, F x F
    std::vector<double> cov(F * F, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t a = 0; a < F; ++a) {
            const double va = centered.at(i, a);
            if (va == 0.0) continue;
            for (std::size_t b = 0; b < F; ++b) cov[a * F + b] += va * centered.at(i, b);
        }
    }
    for (double& v : cov) v /= static_cast<double>(N - 1);
    double total_variance = 0.0;
    for (std::size_t a = 0; a < F; ++a) total_variance += cov[a * F + a];
    require(total_variance > 0.0, errc::degenerate_input,
            "features have zero variance; nothing to project");

    pca_result res;
    res.components = nn::tensor({k, F});
    res.explained_variance.resize(k);

    std::vector<double> deflated = cov;
    rng r(0x70ca5eedULL); // fixed stream: results depend only on the inputs
    for (std::size_t comp = 0; comp < k; ++comp) {
        std::vector<double> v(F);
        for (double& x : v) x = r.normal();
        bool alive = orthonormalize(v, res.components, comp);
        std::vector<double> w(F);
        double lambda = 0.0;
        if (alive) {
            for (int iter = 0; iter < 1000; ++iter) {
                for (std::size_t a = 0; a < F; ++a) {
                    w[a] = dot(std::span<const double>(deflated.data() + a * F, F), v);
                }
                if (!orthonormalize(w, res.components, comp)) {
                    alive = false;
                    break;
                }
                double residual = 0.0;
                for (std::size_t a = 0; a < F; ++a) {
                    const double d = w[a] - v[a];
                    residual += d * d;
                }
                v = w;
                if (std::sqrt(residual) < 1e-10) break;
            }
        }
        if (!alive) {
            // remaining variance is numerically zero; complete the basis
            // with the first coordinate direction that survives
            for (std::size_t a = 0; a < F; ++a) {
                std::fill(v.begin(), v.end(), 0.0);
                v[a] = 1.0;
                if (orthonormalize(v, res.components, comp)) break;
            }
        }
        for (std::size_t a = 0; a < F; ++a) {
            w[a] = dot(std::span<const double>(deflated.data() + a * F, F), v);
        }
        lambda = std::max(0.0, dot(w, v));
        // canonical sign: the largest-magnitude coordinate is positive
        std::size_t big = 0;
        for (std::size_t a = 1; a < F; ++a) {
            if (std::abs(v[a]) > std::abs(v[big])) big = a;
        }
        if (v[big] < 0.0) {
            for (double& x : v) x = -x;
        }
        for (std::size_t a = 0; a < F; ++a) res.components.at(comp, a) = v[a];
        res.explained_variance[comp] = lambda;
        // deflate: C <- C - lambda v v^T
        for (std::size_t a = 0; a < F; ++a) {
            for (std::size_t b = 0; b < F; ++b) deflated[a * F + b] -= lambda * v[a] * v[b];
        }
    }

    // deflation can leave tiny inversions between near-equal eigenvalues
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return res.explained_variance[a] > res.explained_variance[b];
    });
    nn::tensor sorted_components({k, F});
    std::vector<double> sorted_var(k);
    for (std::size_t i = 0; i < k; ++i) {
        sorted_var[i] = res.explained_variance[order[i]];
        for (std::size_t a = 0; a < F; ++a) {
            sorted_components.at(i, a) = res.components.at(order[i], a);
        }
    }
    res.components = std::move(sorted_components);
    res.explained_variance = std::move(sorted_var);

    res.explained_variance_ratio.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        res.explained_variance_ratio[i] = res.explained_variance[i] / total_variance;
    }

    res.projected = nn::tensor({N, k});
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (std::size_t a = 0; a < F; ++a) s += centered.at(i, a) * res.components.at(c, a);
            res.projected.at(i, c) = s;
        }
    }
    return res;
}

namespace {

void write_feature_csv(const nn::tensor& rows, std::span<const int> labels,
                       const std::string& col_prefix, std::size_t first_col_index,
                       const std::string& path) {
    require(rows.dim(0) == labels.size(), errc::shape_mismatch,
            "one label per feature row required");
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open " + path + " for writing");
    f << "label";
    for (std::size_t c = 0; c < rows.dim(1); ++c) {
        f << "," << col_prefix << (first_col_index + c);
    }
    f << "\n";
    char buf[64];
    for (std::size_t i = 0; i < rows.dim(0); ++i) {
        f << labels[i];
        for (std::size_t c = 0; c < rows.dim(1); ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", rows.at(i, c));
            f << buf;
        }
        f << "\n";
    }
    f.flush();
    require(f.good(), errc::io_error, "write failed on " + path);
}

} // namespace

void write_embeddings_csv(const embedding_dump& emb, const std::string& path) {
    write_feature_csv(emb.features, emb.labels, "f", 0, path);
}

void write_pca_outputs(const pca_result& res, std::span<const int> labels,
                       const std::string& csv_path, const std::string& json_path) {
    write_feature_csv(res.projected, labels, "pc", 1, csv_path);
    nlohmann::json doc;
    doc["explained_variance"] = res.explained_variance;
    doc["explained_variance_ratio"] = res.explained_variance_ratio;
    doc["components"] = nlohmann::json::array();
    const std::size_t k = res.components.shape[0];
    const std::size_t width = res.components.shape[1];
    for (std::size_t i = 0; i < k; ++i) {
        doc["components"].push_back(std::vector<double>(
            res.components.data.begin() + static_cast<std::ptrdiff_t>(i * width),
            res.components.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width)));
    }
    doc["n_components"] = res.explained_variance.size();
    std::ofstream f(json_path, std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open " + json_path + " for writing");
    f << doc.dump(2) << "\n";
    require(f.good(), errc::io_error, "write failed on " + json_path);
}

} // namespace qhybrid::eval
