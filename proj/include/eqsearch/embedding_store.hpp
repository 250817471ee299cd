#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "eqsearch/checkpoint.hpp"
#include "eqsearch/corpus.hpp"
#include "eqsearch/expression_graph.hpp"
#include "eqsearch/model_params.hpp"

namespace eqsearch {

struct SearchHit {
    std::string eq_id;
    std::size_t row = 0;
    double score = 0;
};

// Equation ids with one embedding row each. Scores are inner products, or
// cosines when the metric says so.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    // Throws InvalidArgument on duplicate ids, row/id count mismatch or
    // non-finite entries.
    EmbeddingStore(std::vector<std::string> ids, Matrix<float> vectors, std::string model_hash,
                   Similarity metric = Similarity::InnerProduct);

    std::size_t size() const noexcept { return ids_.size(); }
    Eigen::Index dim() const noexcept { return vectors_.cols(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Matrix<float>& vectors() const noexcept { return vectors_; }
    const std::string& model_hash() const noexcept { return model_hash_; }
    Similarity metric() const noexcept { return metric_; }
    std::optional<std::size_t> row_of(const std::string& eq_id) const;

    // Score of row i against q under the store's metric, in double.
    double score(std::size_t row, const Vector<float>& q) const;

    // Top-k by score, descending, ties by eq_id. k > n returns n hits.
    std::vector<SearchHit> query_exact(const Vector<float>& q, std::size_t k,
                                       std::optional<std::size_t> exclude_row = std::nullopt) const;

    // Ranks the given candidate rows exactly.
    std::vector<SearchHit> rank_rows(const Vector<float>& q, std::vector<std::size_t> rows, std::size_t k) const;

private:
    std::vector<std::string> ids_;
    Matrix<float> vectors_;
    std::vector<double> inv_norms_;
    std::string model_hash_;
    Similarity metric_ = Similarity::InnerProduct;
    std::unordered_map<std::string, std::size_t> rows_;
};

// Eval-mode embeddings of every equation. Throws VocabularyMismatch when
// `expected` is given and differs from the checkpoint's vocabulary.
EmbeddingStore embed_corpus(const Corpus& corpus, const Checkpoint& checkpoint, const Vocabulary* expected = nullptr);

// Componentwise sum of the node feature rows.
Vector<float> bow_embed(const ExpressionGraph& graph);

// Cosine-scored bag-of-words store.
EmbeddingStore bow_store(const Corpus& corpus, const Vocabulary& vocab);
std::string bow_model_hash(const Vocabulary& vocab);

// Header {n, dim, model_hash, metric}, little-endian float32 rows, id table.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

}  // namespace eqsearch
