#include "eqsearch/expression_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eqsearch/error.hpp"
#include "eqsearch/xml.hpp"

namespace eqsearch {

std::vector<std::pair<int, int>> ExpressionGraph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(2 * size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        if (parents[i] < 0) continue;
        out.emplace_back(parents[i], static_cast<int>(i));
        out.emplace_back(static_cast<int>(i), parents[i]);
    }
    return out;
}

std::vector<std::vector<int>> ExpressionGraph::adjacency() const {
    std::vector<std::vector<int>> adj(size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        if (parents[i] < 0) continue;
        adj[static_cast<std::size_t>(parents[i])].push_back(static_cast<int>(i));
        adj[i].push_back(parents[i]);
    }
    return adj;
}

Eigen::MatrixXd ExpressionGraph::feature_matrix() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), kFeatureDim);
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& f = features[i];
        auto row = static_cast<Eigen::Index>(i);
        if (f.tag >= 0) x(row, f.tag) = 1.0;
        if (f.attr >= 0) x(row, kAttrOffset + f.attr) = 1.0;
        if (f.chr >= 0) x(row, kCharOffset + f.chr) = 1.0;
    }
    return x;
}

namespace {

void add_node(ExpressionGraph& g, NodeFeature f, int position, int parent, const std::string& kind) {
    g.features.push_back(f);
    g.positions.push_back(position);
    g.parents.push_back(parent);
    g.kinds.push_back(kind);
}

void encode_element(const XmlNode& node, const Vocabulary& vocab, int position, int parent, ExpressionGraph& g) {
    NodeFeature f;
    int tag = vocab.tag_index(node.tag);
    f.tag = static_cast<std::int16_t>(tag);
    if (!node.attributes.empty()) {
        int best = vocab.attr_unknown();
        for (const auto& [name, value] : node.attributes) best = std::min(best, vocab.attr_index(name + "=" + value));
        f.attr = static_cast<std::int16_t>(best);
    }
    auto chars = utf8_chars(node.text);
    if (chars.size() == 1) f.chr = static_cast<std::int16_t>(vocab.char_index(chars.front()));

    int self = static_cast<int>(g.size());
    add_node(g, f, position, parent, node.tag);

    int child_pos = 0;
    for (const auto& child : node.children) encode_element(child, vocab, child_pos++, self, g);
    if (chars.size() > 1) {
        for (const auto& ch : chars) {
            NodeFeature cf;
            cf.tag = static_cast<std::int16_t>(tag);
            cf.chr = static_cast<std::int16_t>(vocab.char_index(ch));
            add_node(g, cf, child_pos++, self, node.tag);
        }
    }
}

}  // namespace

ExpressionGraph encode(std::string_view mathml, const Vocabulary& vocab) {
    XmlNode root = parse_xml(mathml);
    ExpressionGraph g;
    encode_element(root, vocab, 0, -1, g);
    return g;
}

std::array<std::int16_t, kCharSlots> random_character_permutation(std::mt19937_64& rng, int flips) {
    std::array<std::int16_t, kCharSlots> perm;
    std::iota(perm.begin(), perm.end(), std::int16_t{0});
    std::uniform_int_distribution<int> pick(0, kCharSlots - 1);
    for (int k = 0; k < flips; ++k) {
        int a = pick(rng);
        int b = pick(rng);
        std::swap(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
    }
    return perm;
}

ExpressionGraph apply_character_permutation(const ExpressionGraph& graph,
                                            const std::array<std::int16_t, kCharSlots>& permutation) {
    ExpressionGraph out = graph;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& f = out.features[i];
        if (out.kinds[i] == "mi" && f.chr >= 0) f.chr = permutation[static_cast<std::size_t>(f.chr)];
    }
    return out;
}

ExpressionGraph augment_identifiers(const ExpressionGraph& graph, std::mt19937_64& rng, double mean_flips) {
    std::poisson_distribution<int> flips(mean_flips);
    int k = flips(rng);
    return apply_character_permutation(graph, random_character_permutation(rng, k));
}

ExpressionGraph augment_identifiers(const ExpressionGraph& graph, std::uint64_t seed, std::optional<int> forced_flips,
                                    double mean_flips) {
    std::mt19937_64 rng(seed);
    if (forced_flips) return apply_character_permutation(graph, random_character_permutation(rng, *forced_flips));
    return augment_identifiers(graph, rng, mean_flips);
}

std::size_t mask_count(std::size_t nodes, double rate) {
    if (nodes == 0) return 0;
    // The epsilon keeps 0.15 * 20 = 3.0000000000000004 from rounding up to 4.
    auto n = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(nodes) - 1e-9));
    return std::clamp<std::size_t>(n, 1, nodes);
}

MaskedGraph mask_nodes(const ExpressionGraph& graph, double rate, std::mt19937_64& rng) {
    MaskedGraph out;
    out.graph = graph;
    std::size_t n = graph.size();
    std::size_t k = mask_count(n, rate);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    out.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.masked.begin(), out.masked.end());
    for (int idx : out.masked) {
        auto& f = out.graph.features[static_cast<std::size_t>(idx)];
        out.targets.push_back({f.tag, f.attr >= 0 ? f.attr : kNoAttributeClass, f.chr >= 0 ? f.chr : kNoCharacterClass});
        f = NodeFeature{};
    }
    return out;
}

MaskedGraph mask_nodes(const ExpressionGraph& graph, double rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return mask_nodes(graph, rate, rng);
}

ExpressionGraph relabel_nodes(const ExpressionGraph& graph, const std::vector<int>& order) {
    if (order.size() != graph.size()) throw InvalidArgument("relabel order has the wrong length");
    std::vector<int> new_index(graph.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_index[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    ExpressionGraph out;
    for (int old : order) {
        auto o = static_cast<std::size_t>(old);
        out.features.push_back(graph.features[o]);
        out.positions.push_back(graph.positions[o]);
        out.parents.push_back(graph.parents[o] < 0 ? -1 : new_index[static_cast<std::size_t>(graph.parents[o])]);
        out.kinds.push_back(graph.kinds[o]);
    }
    return out;
}

}  // namespace eqsearch
