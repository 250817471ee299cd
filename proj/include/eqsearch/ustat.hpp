#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "eqsearch/model_params.hpp"

namespace eqsearch {

enum class UKernel { Ranking, Histogram };

// pattern = x2 in P(x1) and x3 not in P(x1); s12, s13 are the two inner
// products. Both kernels are zero without the pattern.
double v_ranking(bool pattern, double s12, double s13);
double v_hist(bool pattern, double s12, double s13, int R = 64);

// related(i, j): whether j is a possible positive example for i.
using RelatedFn = std::function<bool(std::size_t, std::size_t)>;

inline constexpr std::size_t kCompleteUstatLimit = 60;

// Kernel average over all ordered triples of distinct indices. Throws
// InvalidArgument for n > 60 or n < 3.
double complete_ustat(const Matrix<double>& embeddings, const RelatedFn& related, UKernel kernel, int R = 64);

using Triple = std::array<std::size_t, 3>;

// Kernel average over the listed triples. Throws InvalidArgument when empty.
double incomplete_ustat(const std::vector<Triple>& triples, const Matrix<double>& embeddings,
                        const RelatedFn& related, UKernel kernel, int R = 64);

// Triplets as nodes, an edge between two triplets drawing an equation from a
// common paper. `papers[t]` lists the source papers of triplet t.
struct DependencyGraph {
    std::vector<std::vector<std::size_t>> adjacency;

    std::size_t size() const noexcept { return adjacency.size(); }
    std::size_t max_degree() const;
};

DependencyGraph build_dependency_graph(const std::vector<Triple>& papers);

struct Coloring {
    std::vector<std::size_t> colors;
    std::size_t chromatic_bound = 0;
};

// First-fit in order of descending degree (ties by node index).
Coloring greedy_coloring(const DependencyGraph& graph);

// Same coloring computed from per-paper color sets without materializing
// the edges; suited to large triplet sets.
Coloring greedy_coloring(const std::vector<Triple>& papers);

// 3 * sqrt(ln(1/delta) / (2N))
double janson_margin_complete(std::size_t n_papers, double delta);
// sqrt(ln(1/delta) * chi / (2|D|))
double janson_margin_incomplete(std::size_t chi, std::size_t n_triples, double delta);

}  // namespace eqsearch
