#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eqsearch/model_params.hpp"
#include "eqsearch/sampler.hpp"

namespace eqsearch {

// Fraction of triplets with <a, p> > <a, n> (ties count 0). Rows of
// `embeddings` are indexed by equation. Throws InvalidArgument when empty.
double ranking_score(const std::vector<TripletSample>& triplets, const Matrix<float>& embeddings);
double ranking_score(const std::vector<TripletSample>& triplets, const Matrix<double>& embeddings);

// relevant-in-top-k / k, even when fewer than k results were returned.
double precision_at_k(const std::vector<bool>& relevance, std::size_t k);

inline constexpr std::size_t kUmapHorizon = 1000;

// Sum over the first 1000 ranks of P(k) at every relevant rank k.
double umap(const std::vector<bool>& relevance);

// Smallest edit distance between `pattern` and any substring of `text`.
std::size_t substring_edit_distance(std::string_view text, std::string_view pattern);

inline constexpr std::size_t kFuzzyKeywordLength = 10;

// Substring match, or edit distance <= 1 for keywords longer than 10 characters.
bool keyword_relevant(std::string_view section_text, const std::vector<std::string>& keywords);

// Each of the 2n sides queries all other sides (self excluded); a hit when
// its partner is among the top k. Ties rank the lower index first.
double recall_at_k(const Matrix<float>& lhs, const Matrix<float>& rhs, std::size_t k, bool cosine);

// Leave-one-out 1-nearest-neighbor accuracy under Euclidean distance; ties
// go to the lower index. Throws InvalidArgument for fewer than two items.
double loo_1nn_accuracy(const Matrix<double>& points, const std::vector<int>& labels);

}  // namespace eqsearch
