#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eqsearch/vocabulary.hpp"

namespace eqsearch {

// Indices into the three one-hot blocks; -1 means the block is all zero.
struct NodeFeature {
    std::int16_t tag = -1;
    std::int16_t attr = -1;
    std::int16_t chr = -1;

    bool empty() const noexcept { return tag < 0 && attr < 0 && chr < 0; }
    bool operator==(const NodeFeature&) const = default;
};

// A MathML tree as a feature graph. Node i has one-hot blocks `features[i]`,
// child position `positions[i]` under its parent (root: 0) and parent index
// `parents[i]` (root: -1). Edges are the undirected parent-child links.
struct ExpressionGraph {
    std::vector<NodeFeature> features;
    std::vector<int> positions;
    std::vector<int> parents;
    std::vector<std::string> kinds;  // tag name per node; implicit character nodes carry the parent's tag

    std::size_t size() const noexcept { return features.size(); }

    // Both directions of every parent-child link.
    std::vector<std::pair<int, int>> edges() const;
    // Adjacency lists (neighbors only, no self loops).
    std::vector<std::vector<int>> adjacency() const;
    // Dense |x| x 256 matrix of the one-hot features.
    Eigen::MatrixXd feature_matrix() const;

    bool operator==(const ExpressionGraph&) const = default;
};

// One node per XML element, preorder. Multi-character leaf text becomes one
// implicit child per character carrying the parent's tag and that character.
// Throws MalformedXml.
ExpressionGraph encode(std::string_view mathml, const Vocabulary& vocab);

// Permutation of the 192 character slots built from the identity by
// `flips` random transpositions.
std::array<std::int16_t, kCharSlots> random_character_permutation(std::mt19937_64& rng, int flips);

// Renames the characters of every `mi` node through `permutation`.
ExpressionGraph apply_character_permutation(const ExpressionGraph& graph,
                                            const std::array<std::int16_t, kCharSlots>& permutation);

inline constexpr double kAugmentationMeanFlips = 32.0;

// Draws the number of flips from Poisson(mean) unless `forced_flips` is set.
ExpressionGraph augment_identifiers(const ExpressionGraph& graph, std::uint64_t seed,
                                    std::optional<int> forced_flips = std::nullopt,
                                    double mean_flips = kAugmentationMeanFlips);
ExpressionGraph augment_identifiers(const ExpressionGraph& graph, std::mt19937_64& rng,
                                    double mean_flips = kAugmentationMeanFlips);

struct MaskTarget {
    int tag = 0;   // [0, 32); -1 when the node's tag is outside the vocabulary
    int attr = 0;  // [0, 33); 32 = no attribute
    int chr = 0;   // [0, 193); 192 = no character
};

struct MaskedGraph {
    ExpressionGraph graph;       // masked rows are all zero
    std::vector<int> masked;     // node indices, ascending
    std::vector<MaskTarget> targets;
};

inline constexpr double kDefaultMaskRate = 0.15;

// Masks max(1, ceil(rate * |x|)) distinct nodes chosen uniformly.
MaskedGraph mask_nodes(const ExpressionGraph& graph, double rate, std::uint64_t seed);
MaskedGraph mask_nodes(const ExpressionGraph& graph, double rate, std::mt19937_64& rng);

std::size_t mask_count(std::size_t nodes, double rate);

// Same graph with node storage order permuted: new node k is old node order[k].
ExpressionGraph relabel_nodes(const ExpressionGraph& graph, const std::vector<int>& order);

}  // namespace eqsearch
