#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "eqsearch/checkpoint.hpp"
#include "eqsearch/corpus.hpp"
#include "eqsearch/encoder.hpp"
#include "eqsearch/expression_graph.hpp"
#include "eqsearch/objectives.hpp"
#include "eqsearch/relation_pairs.hpp"
#include "eqsearch/sampler.hpp"

namespace eqsearch {

enum class SimilarityLoss { Histogram, Triplet };
enum class MaskStream { Anchors, Independent };

struct TrainConfig {
    int epochs = 20;
    int batch_size = 128;
    double lr0 = 1e-4;
    int bins = kDefaultBins;
    double margin = kDefaultMargin;
    double mask_rate = kDefaultMaskRate;
    double poisson_mean = kAugmentationMeanFlips;
    SimilarityLoss loss = SimilarityLoss::Histogram;
    double tau = kDefaultTemperature;
    std::uint64_t seed = 0;
    bool augmentation = true;
    bool masking = true;
    double similarity_weight = 1.0;
    double masking_weight = 1.0;
    MaskStream mask_stream = MaskStream::Anchors;
    BnPlacement bn_placement = BnPlacement::AfterL1L2;
    // Triplets drawn per epoch; 0 means one per training equation.
    std::size_t triplets_per_epoch = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    // Triplets sampled from the hold-out corpus for the per-epoch ranking score.
    std::size_t holdout_triplets = 2000;
    // Contrastive finetuning.
    int finetune_epochs = 50;
    double finetune_lr0 = 1e-3;
    int finetune_batch = 1024;
    bool infonce_exclude_diagonal = false;

    std::string to_text() const;
};

// `key = value` lines; `#` starts a comment. Throws InvalidArgument on
// unknown keys or bad values.
TrainConfig parse_train_config(std::string_view text);
TrainConfig load_train_config(const std::filesystem::path& path);

// Graphs of one optimization step: anchors, positives and negatives
// (`triplets` each, in that order) followed by graphs used only for masking.
struct LossBatch {
    struct MaskedNode {
        int graph = 0;
        int node = 0;
        MaskTarget target;
    };
    std::vector<ExpressionGraph> graphs;
    std::size_t triplets = 0;
    std::vector<MaskedNode> masked;
};

struct LossOptions {
    bool similarity = true;
    SimilarityLoss loss = SimilarityLoss::Histogram;
    int bins = kDefaultBins;
    double margin = kDefaultMargin;
    double similarity_weight = 1.0;
    double masking_weight = 1.0;
};

template <class T>
struct LossEvaluation {
    double similarity = 0;
    double masking = 0;
    double total = 0;
    std::vector<double> s_pos, s_neg;
    PackedBatch batch;
    ForwardState<T> forward;
    std::optional<NormalizeState<T>> norm;
};

// Train-mode forward of the composite loss; accumulates gradients into
// `grads` when given.
template <class T>
LossEvaluation<T> evaluate_loss(const LossBatch& batch, const ModelParams<T>& params, const LossOptions& options,
                                ModelParams<T>* grads);

template <class T>
struct ContrastiveEvaluation {
    double value = 0;
    PackedBatch batch;
    ForwardState<T> forward;
};

// InfoNCE over unit-normalized pooled embeddings of matching lhs/rhs graphs.
template <class T>
ContrastiveEvaluation<T> evaluate_contrastive_loss(const std::vector<ExpressionGraph>& lhs,
                                                   const std::vector<ExpressionGraph>& rhs,
                                                   const ModelParams<T>& params, double tau, bool exclude_diagonal,
                                                   ModelParams<T>* grads);

template <class T>
class Adam {
public:
    Adam(double beta1, double beta2, double epsilon);
    void step(ModelParams<T>& params, ModelParams<T>& grads, double lr);
    std::size_t steps() const noexcept { return t_; }

private:
    double beta1_, beta2_, epsilon_;
    std::size_t t_ = 0;
    std::optional<ModelParams<T>> m_, v_;
};

// lr0 * (1 - step / total)
double linear_decay(double lr0, std::size_t step, std::size_t total);

struct EpochMetrics {
    int epoch = 0;
    std::size_t steps = 0;
    double similarity_loss = 0;
    double masking_loss = 0;
    double total_loss = 0;
    double learning_rate = 0;
    std::optional<double> holdout_ranking;
    double seconds = 0;

    std::string to_json() const;
};

struct StepResult {
    double similarity = 0;
    double masking = 0;
    double total = 0;
    double learning_rate = 0;
};

class Trainer {
public:
    // `init` continues from existing weights; otherwise fresh initialization
    // from config.seed.
    Trainer(const Corpus& corpus, const Vocabulary& vocab, TrainConfig config,
            std::optional<ModelParams<float>> init = std::nullopt);

    std::size_t steps_per_epoch() const noexcept { return steps_per_epoch_; }
    std::size_t total_steps() const noexcept { return steps_per_epoch_ * static_cast<std::size_t>(config_.epochs); }
    std::size_t step_count() const noexcept { return step_; }
    double learning_rate(std::size_t step) const { return linear_decay(config_.lr0, step, total_steps()); }

    // One optimizer step. Throws Error when the loss is not finite.
    StepResult step();
    EpochMetrics run_epoch(const Corpus* holdout = nullptr);

    const ModelParams<float>& params() const noexcept { return params_; }
    const TrainConfig& config() const noexcept { return config_; }
    Checkpoint checkpoint() const;

private:
    LossBatch make_batch();

    const Corpus& corpus_;
    Vocabulary vocab_;
    TrainConfig config_;
    TripletSampler sampler_;
    std::vector<ExpressionGraph> graphs_;
    ModelParams<float> params_;
    Adam<float> adam_;
    std::mt19937_64 rng_;
    std::size_t steps_per_epoch_ = 1;
    std::size_t step_ = 0;
    int epoch_ = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

Checkpoint train(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& config,
                 const Corpus* holdout = nullptr, const EpochCallback& on_epoch = {});

// Fresh, untrained weights for `vocab`.
Checkpoint initial_checkpoint(const Vocabulary& vocab, const TrainConfig& config);

// Batches of min(finetune_batch, |pairs|) pairs; a trailing batch with
// fewer than two pairs is dropped. Produces a cosine-similarity checkpoint.
Checkpoint finetune_contrastive(const std::vector<RelationPair>& pairs, const Checkpoint& start,
                                const TrainConfig& config, const EpochCallback& on_epoch = {});

// Eval-mode embedding (normalized the way the checkpoint is meant to be
// queried) of every equation of `corpus`.
Matrix<float> embed_corpus_matrix(const Corpus& corpus, const Checkpoint& checkpoint);

// Conditional ranking score over `n_triplets` sampled from `corpus`.
double holdout_ranking_score(const Corpus& corpus, const Checkpoint& checkpoint, std::size_t n_triplets,
                             std::uint64_t seed);

// Fraction of masked nodes whose tag the tag head recovers (eval mode).
double masked_tag_accuracy(const Corpus& corpus, const Checkpoint& checkpoint, double mask_rate, std::uint64_t seed);

}  // namespace eqsearch
