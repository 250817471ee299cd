#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/expression_graph.hpp"
#include "eqsearch/latex_compiler.hpp"
#include "eqsearch/synthetic.hpp"
#include "eqsearch/vocabulary.hpp"
#include "test_support.hpp"

using namespace eqsearch;

namespace {

Vocabulary synthetic_vocab() {
    SyntheticConfig cfg;
    cfg.papers = 20;
    return build_vocabulary(synthetic_corpus(cfg));
}

bool is_tree(const ExpressionGraph& g) {
    if (g.size() == 0) return false;
    if (g.edges().size() != 2 * (g.size() - 1)) return false;
    std::vector<bool> seen(g.size(), false);
    std::vector<int> stack{0};
    seen[0] = true;
    auto adj = g.adjacency();
    std::size_t visited = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int u : adj[static_cast<std::size_t>(v)])
            if (!seen[static_cast<std::size_t>(u)]) {
                seen[static_cast<std::size_t>(u)] = true;
                ++visited;
                stack.push_back(u);
            }
    }
    return visited == g.size();
}

}  // namespace

TEST(Vocabulary, SingleIdentifierExample) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mi>x</mi></math>"});
    EXPECT_EQ(v.tags(), (std::vector<std::string>{"math", "mi"}));
    EXPECT_EQ(v.chars(), (std::vector<std::string>{"x", "UNK"}));
    EXPECT_EQ(v.attrs(), std::vector<std::string>{"UNK"});
}

TEST(Vocabulary, FrequencyOrderWithLexicalTies) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mi>b</mi><mi>a</mi><mi>b</mi><mn>2</mn></math>"});
    EXPECT_EQ(v.tags(), (std::vector<std::string>{"mi", "math", "mn"}));
    EXPECT_EQ(v.chars(), (std::vector<std::string>{"b", "2", "a", "UNK"}));
}

TEST(Vocabulary, OrderIndependentAndBijective) {
    std::vector<std::string> docs = {"<math><mi>x</mi><mo>+</mo><mn>1</mn></math>",
                                     "<math><mi mathvariant=\"bold\">y</mi></math>", "<math><msqrt><mi>z</mi></msqrt></math>"};
    auto a = build_vocabulary(docs);
    std::reverse(docs.begin(), docs.end());
    auto b = build_vocabulary(docs);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.hash(), b.hash());
    for (std::size_t i = 0; i < a.tags().size(); ++i) EXPECT_EQ(a.tag_index(a.tags()[i]), static_cast<int>(i));
    for (std::size_t i = 0; i < a.chars().size(); ++i) EXPECT_EQ(a.char_index(a.chars()[i]), static_cast<int>(i));
    EXPECT_EQ(a.char_index("\xe2\x88\x91"), a.char_unknown());
    EXPECT_EQ(a.attr_index("mathvariant=bold"), 0);
    EXPECT_EQ(a.tag_index("mtable"), -1);
}

TEST(Vocabulary, JsonRoundTrip) {
    auto v = synthetic_vocab();
    EXPECT_LE(v.tags().size(), static_cast<std::size_t>(kTagSlots));
    EXPECT_LE(v.attrs().size(), static_cast<std::size_t>(kAttrSlots));
    EXPECT_LE(v.chars().size(), static_cast<std::size_t>(kCharSlots));
    auto back = Vocabulary::from_json(v.to_json());
    EXPECT_EQ(back, v);
    EXPECT_EQ(back.hash(), v.hash());
}

TEST(Vocabulary, EmptyCorpusThrows) {
    EXPECT_THROW(build_vocabulary(std::vector<std::string>{}), EmptyCorpus);
}

TEST(Encode, SingleIdentifierExample) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mi>x</mi></math>"});
    auto g = encode("<math><mi>x</mi></math>", v);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g.edges().size(), 2u);  // one undirected edge, both directions
    EXPECT_EQ(g.positions, (std::vector<int>{0, 0}));
    EXPECT_EQ(g.features[1].tag, v.tag_index("mi"));
    EXPECT_EQ(g.features[1].attr, -1);
    EXPECT_EQ(g.features[1].chr, v.char_index("x"));
    auto m = g.feature_matrix();
    EXPECT_EQ(m.rows(), 2);
    EXPECT_EQ(m.cols(), kFeatureDim);
    EXPECT_EQ(m.row(1).sum(), 2.0);
    EXPECT_EQ(m(1, kCharOffset + v.char_index("x")), 1.0);
}

TEST(Encode, BoldAttribute) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mi mathvariant=\"bold\">x</mi></math>"});
    auto g = encode("<math><mi mathvariant=\"bold\">x</mi></math>", v);
    EXPECT_EQ(g.features[1].attr, v.attr_index("mathvariant=bold"));
    EXPECT_NE(g.features[1].attr, v.attr_unknown());
}

TEST(Encode, MultiCharacterLeavesSplit) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mn>42</mn></math>"});
    auto g = encode("<math><mn>42</mn></math>", v);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_EQ(g.features[1].chr, -1);
    EXPECT_EQ(g.parents[2], 1);
    EXPECT_EQ(g.parents[3], 1);
    EXPECT_EQ(g.positions[3], 1);
    EXPECT_EQ(g.features[2].chr, v.char_index("4"));
    EXPECT_EQ(g.features[3].tag, v.tag_index("mn"));
}

TEST(Encode, PropertiesOnSyntheticCorpus) {
    SyntheticConfig cfg;
    cfg.papers = 20;
    auto corpus = synthetic_corpus(cfg);
    auto v = build_vocabulary(corpus);
    for (const auto& e : corpus.equations()) {
        auto g = encode(e.mathml, v);
        EXPECT_TRUE(is_tree(g)) << e.eq_id;
        EXPECT_EQ(g, encode(e.mathml, v));
        auto m = g.feature_matrix();
        for (int b : {0, kAttrOffset, kCharOffset}) {
            int w = b == kCharOffset ? kCharSlots : kTagSlots;
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                auto block = m.row(r).segment(b, w);
                EXPECT_LE(block.sum(), 1.0);
                EXPECT_EQ(block.maxCoeff() == 1.0 || block.sum() == 0.0, true);
            }
        }
        auto edges = g.edges();
        for (auto [a, b] : edges) EXPECT_NE(std::find(edges.begin(), edges.end(), std::make_pair(b, a)), edges.end());
    }
}

TEST(Encode, MalformedThrows) {
    auto v = synthetic_vocab();
    EXPECT_THROW(encode("<math><mi>x</math>", v), MalformedXml);
}

TEST(Augment, ZeroFlipsIsIdentity) {
    auto v = synthetic_vocab();
    auto g = encode(compile_latex_subset("x+y=z"), v);
    EXPECT_EQ(augment_identifiers(g, 5, 0), g);
}

TEST(Augment, ConsistentRenaming) {
    auto v = synthetic_vocab();
    auto g = encode(compile_latex_subset("x+x\\cdot y"), v);
    std::vector<std::size_t> xs;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.kinds[i] == "mi" && g.features[i].chr == v.char_index("x")) xs.push_back(i);
    ASSERT_EQ(xs.size(), 2u);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto a = augment_identifiers(g, seed, 40);
        EXPECT_EQ(a.features[xs[0]].chr, a.features[xs[1]].chr);
        EXPECT_EQ(a.parents, g.parents);
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_EQ(a.features[i].tag, g.features[i].tag);
            if (g.kinds[i] != "mi") EXPECT_EQ(a.features[i].chr, g.features[i].chr);
        }
    }
}

TEST(Augment, PermutationIsBijection) {
    std::mt19937_64 rng(3);
    for (int flips : {0, 1, 32, 500}) {
        auto p = random_character_permutation(rng, flips);
        std::vector<std::int16_t> sorted(p.begin(), p.end());
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < kCharSlots; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    }
}

TEST(Augment, PoissonFlipCountChangesSomething) {
    auto v = synthetic_vocab();
    auto g = encode(compile_latex_subset("a+b+c+f+g+k"), v);
    int changed = 0;
    for (std::uint64_t s = 0; s < 20; ++s) changed += augment_identifiers(g, s) != g;
    EXPECT_GT(changed, 15);
}

TEST(Mask, SingleNodeIsMasked) {
    ExpressionGraph g;
    g.features = {{1, -1, 3}};
    g.positions = {0};
    g.parents = {-1};
    g.kinds = {"mi"};
    auto m = mask_nodes(g, 0.15, 1);
    ASSERT_EQ(m.masked, std::vector<int>{0});
    EXPECT_TRUE(m.graph.features[0].empty());
    EXPECT_EQ(m.targets[0].tag, 1);
    EXPECT_EQ(m.targets[0].attr, kNoAttributeClass);
    EXPECT_EQ(m.targets[0].chr, 3);
}

TEST(Mask, TargetsReadFromEncoding) {
    auto v = build_vocabulary(std::vector<std::string>{"<math><mi>x</mi></math>"});
    auto g = encode("<math><mi>x</mi></math>", v);
    bool seen = false;
    for (std::uint64_t s = 0; s < 20 && !seen; ++s) {
        auto m = mask_nodes(g, 0.15, s);
        for (std::size_t k = 0; k < m.masked.size(); ++k) {
            if (m.masked[k] != 1) continue;
            seen = true;
            EXPECT_EQ(m.targets[k].tag, v.tag_index("mi"));
            EXPECT_EQ(m.targets[k].attr, kNoAttributeClass);
            EXPECT_EQ(m.targets[k].chr, v.char_index("x"));
        }
    }
    EXPECT_TRUE(seen);
}

TEST(Mask, CountsAndZeroRows) {
    EXPECT_EQ(mask_count(20, 0.15), 3u);
    EXPECT_EQ(mask_count(1, 0.15), 1u);
    EXPECT_EQ(mask_count(7, 0.0), 1u);
    std::mt19937_64 rng(9);
    for (int n : {1, 5, 20, 33}) {
        auto g = eqtest::random_graph(rng, n);
        auto m = mask_nodes(g, 0.15, rng);
        EXPECT_EQ(m.masked.size(), mask_count(static_cast<std::size_t>(n), 0.15));
        EXPECT_TRUE(std::is_sorted(m.masked.begin(), m.masked.end()));
        EXPECT_EQ(std::adjacent_find(m.masked.begin(), m.masked.end()), m.masked.end());
        auto fm = m.graph.feature_matrix();
        for (int i : m.masked) EXPECT_EQ(fm.row(i).cwiseAbs().sum(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!std::binary_search(m.masked.begin(), m.masked.end(), static_cast<int>(i)))
                EXPECT_EQ(m.graph.features[i], g.features[i]);
    }
}

TEST(Mask, SelectionIsUniform) {
    std::mt19937_64 rng(21);
    ExpressionGraph g = eqtest::random_graph(rng, 10);
    std::vector<int> hits(10, 0);
    const int draws = 20000;
    for (int t = 0; t < draws; ++t)
        for (int i : mask_nodes(g, 0.1, rng).masked) ++hits[static_cast<std::size_t>(i)];
    double chi2 = 0, expected = draws / 10.0;
    for (int h : hits) chi2 += (h - expected) * (h - expected) / expected;
    EXPECT_LT(chi2, 27.88);  // chi-square, 9 dof, p = 0.001
}

TEST(Relabel, PermutesStorage) {
    std::mt19937_64 rng(4);
    auto g = eqtest::random_graph(rng, 6);
    std::vector<int> order{3, 0, 5, 1, 4, 2};
    auto r = relabel_nodes(g, order);
    for (std::size_t k = 0; k < order.size(); ++k) {
        EXPECT_EQ(r.features[k], g.features[static_cast<std::size_t>(order[k])]);
        EXPECT_EQ(r.positions[k], g.positions[static_cast<std::size_t>(order[k])]);
    }
    EXPECT_EQ(r.edges().size(), g.edges().size());
}
