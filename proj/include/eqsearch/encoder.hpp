#pragma once

#include <array>
#include <vector>

#include "eqsearch/expression_graph.hpp"
#include "eqsearch/model_params.hpp"

namespace eqsearch {

enum class Mode { Train, Eval };

// E(p)[2i] = sin(p / 10000^(2i/d)), E(p)[2i+1] = cos(p / 10000^(2i/d)).
std::vector<double> positional_embedding(int p, int d = kHiddenDim);

// Several graphs flattened into one disjoint node set.
struct PackedBatch {
    std::vector<NodeFeature> features;
    std::vector<int> positions;
    std::vector<int> offsets;        // graph g owns nodes [offsets[g], offsets[g+1])
    std::vector<int> neighbor_start; // CSR over global node ids
    std::vector<int> neighbors;

    std::size_t graphs() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t nodes() const noexcept { return features.size(); }
};

PackedBatch pack_graphs(const std::vector<const ExpressionGraph*>& graphs);
PackedBatch pack_graphs(const std::vector<ExpressionGraph>& graphs);

template <class T>
struct BatchNormCache {
    Matrix<T> xhat;
    Vector<T> inv_std;
    Vector<T> batch_mean, batch_var;
};

template <class T>
struct ForwardState {
    Mode mode = Mode::Train;
    BnPlacement placement = BnPlacement::AfterL1L2;
    std::array<Matrix<T>, 4> pre;     // aggregated pre-activations of conv layers 1..4
    std::array<Matrix<T>, 4> out;     // ReLU outputs of conv layers 1..4; out[3] is phi
    std::array<Matrix<T>, 2> normed;  // batch-norm outputs
    std::array<BatchNormCache<T>, 2> bn;
    Matrix<T> P;       // positional rows for layer 1
    Matrix<T> mean_phi;  // graphs x 512
    Matrix<T> pooled;    // graphs x 64

    const Matrix<T>& phi() const { return out[3]; }
    // Index of the conv layer whose output feeds batch norm k.
    int bn_after(int k) const { return k == 0 ? 0 : (placement == BnPlacement::AfterL1L2 ? 1 : 2); }
};

template <class T>
ForwardState<T> forward(const PackedBatch& batch, const ModelParams<T>& params, Mode mode);

// Folds the batch statistics of a train-mode pass into the running averages.
template <class T>
void update_running_stats(ModelParams<T>& params, const ForwardState<T>& state);

// Accumulates into `grads` the parameter gradients given dL/d pooled
// (graphs x 64) and optionally dL/d phi (nodes x 512).
template <class T>
void backward(const PackedBatch& batch, const ModelParams<T>& params, const ForwardState<T>& state,
              const Matrix<T>& d_pooled, const Matrix<T>* d_phi, ModelParams<T>& grads);

template <class T>
struct NormalizeState {
    Matrix<T> output;
    Vector<T> norms;
    T mean = 0, stddev = 0, scale = 1;
    Mode mode = Mode::Train;
};

// Train mode divides by (mean + population std) of the row norms; eval mode
// uses the running statistics. Throws DegenerateBatch.
template <class T>
NormalizeState<T> normalize_embeddings(const Matrix<T>& pooled, const ModelParams<T>& params, Mode mode);

template <class T>
void update_norm_stats(ModelParams<T>& params, const NormalizeState<T>& state);

template <class T>
Matrix<T> normalize_embeddings_backward(const Matrix<T>& pooled, const NormalizeState<T>& state,
                                        const Matrix<T>& d_output);

// Rows scaled to unit length.
template <class T>
Matrix<T> unit_normalize(const Matrix<T>& x);
template <class T>
Matrix<T> unit_normalize_backward(const Matrix<T>& x, const Matrix<T>& d_output);

template <class T>
struct HeadLogits {
    Matrix<T> tag, attr, chr;
};

template <class T>
HeadLogits<T> head_logits(const Matrix<T>& phi_rows, const ModelParams<T>& params);

// Accumulates head gradients and returns dL/d phi_rows.
template <class T>
Matrix<T> head_backward(const Matrix<T>& phi_rows, const HeadLogits<T>& d_logits, const ModelParams<T>& params,
                        ModelParams<T>& grads);

struct HeadDistributions {
    std::vector<double> tag, attr, chr;
};

HeadDistributions predict_masked(const Vector<double>& phi_row, const ModelParams<double>& params);
HeadDistributions predict_masked(const Vector<float>& phi_row, const ModelParams<float>& params);

// Eval-mode pooled and normalized embedding of one graph. Each graph runs
// alone so the result does not depend on what else is being embedded.
template <class T>
Vector<T> embed_graph(const ExpressionGraph& graph, const ModelParams<T>& params, bool unit_norm = false);

template <class T>
Matrix<T> embed_graphs(const std::vector<ExpressionGraph>& graphs, const ModelParams<T>& params,
                       bool unit_norm = false);

}  // namespace eqsearch
