#pragma once

#include <span>
#include <string>
#include <vector>

#include "qhybrid/data.hpp"
#include "qhybrid/model.hpp"
#include "qhybrid/nn.hpp"

namespace qhybrid::eval {

struct attack_config {
    double epsilon = 0.1; // raw-pixel units; perturbed pixels clamp to [0,1]

    void validate() const;
};

// Single-step FGSM: x' = clamp(x + eps * sign(dL/dx), 0, 1). The batch is
// raw [0,1] pixels; the loss gradient is taken through normalization and
// the whole model (including the quantum layer), then mapped back to raw
// pixel space. sign(0) = 0, so eps=0 returns the input bit-exactly.
nn::tensor fgsm_attack(model::model_graph& m, const nn::tensor& raw_batch,
                       std::span<const int> labels, const attack_config& cfg,
                       const data::norm_stats& stats);

struct robustness_report {
    double clean_accuracy = 0.0;
    double robust_accuracy = 0.0;
    double epsilon = 0.0;
};

// Accuracy on FGSM-perturbed inputs, reported next to clean accuracy.
robustness_report robust_accuracy(model::model_graph& m, const data::dataset& split,
                                  const attack_config& cfg, std::size_t batch_size = 128);

struct embedding_dump {
    nn::tensor features; // [N, width] penultimate activations
    std::vector<int> labels;
};

// Penultimate features over a split: the n quantum expectations for hybrid
// graphs, the matched 16-wide block output for classical ones.
embedding_dump dump_embeddings(model::model_graph& m, const data::dataset& split,
                               std::size_t batch_size = 128);

struct pca_result {
    nn::tensor projected;                         // [N, k] coordinates
    nn::tensor components;                        // [k, width], orthonormal rows
    std::vector<double> explained_variance;       // eigenvalues, non-increasing
    std::vector<double> explained_variance_ratio; // eigenvalue / total variance
};

// Top-k principal components of the mean-centered features via power
// iteration with deflation (1000 iterations or 1e-10 residual per
// component) and re-orthogonalization against earlier components.
pca_result pca_project(const embedding_dump& emb, std::size_t k);

// CSV `label,f0,f1,...`.
void write_embeddings_csv(const embedding_dump& emb, const std::string& path);

// CSV `label,pc1,pc2,...` plus a JSON sidecar with the explained-variance
// ratios and eigenvalues.
void write_pca_outputs(const pca_result& res, std::span<const int> labels,
                       const std::string& csv_path, const std::string& json_path);

} // namespace qhybrid::eval
