#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/ustat.hpp"

using namespace eqsearch;

namespace {

struct Fixture {
    Matrix<double> emb;
    std::vector<int> paper;
    RelatedFn related() const {
        return [this](std::size_t i, std::size_t j) { return paper[i] == paper[j]; };
    }
};

Fixture random_fixture(std::mt19937_64& rng, std::size_t n, int papers) {
    std::normal_distribution<double> nd(0, 1);
    std::uniform_int_distribution<int> pp(0, papers - 1);
    Fixture f;
    f.emb = Matrix<double>::NullaryExpr(static_cast<Eigen::Index>(n), 4, [&] { return nd(rng); });
    for (std::size_t i = 0; i < n; ++i) f.paper.push_back(pp(rng));
    return f;
}

double dot(const Matrix<double>& e, std::size_t a, std::size_t b) {
    double s = 0;
    for (Eigen::Index k = 0; k < e.cols(); ++k) s += e(static_cast<Eigen::Index>(a), k) * e(static_cast<Eigen::Index>(b), k);
    return s;
}

// Oracle: explicit triple loop over ordered distinct triples.
double brute_complete(const Fixture& f, UKernel kernel) {
    const std::size_t n = f.paper.size();
    double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                if (i == j || j == k || i == k) continue;
                bool pattern = f.paper[i] == f.paper[j] && f.paper[i] != f.paper[k];
                double s12 = dot(f.emb, i, j), s13 = dot(f.emb, i, k);
                total += kernel == UKernel::Ranking ? (pattern && s12 > s13) : v_hist(pattern, s12, s13);
                ++count;
            }
    return total / static_cast<double>(count);
}

std::size_t max_clique(const DependencyGraph& g) {
    const std::size_t n = g.size();
    std::size_t best = n ? 1 : 0;
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        std::size_t bits = static_cast<std::size_t>(__builtin_popcountll(mask));
        if (bits <= best) continue;
        bool ok = true;
        for (std::size_t a = 0; a < n && ok; ++a)
            for (std::size_t b = a + 1; b < n && ok; ++b)
                if ((mask >> a & 1) && (mask >> b & 1))
                    ok = std::find(g.adjacency[a].begin(), g.adjacency[a].end(), b) != g.adjacency[a].end();
        if (ok) best = bits;
    }
    return best;
}

}  // namespace

TEST(Kernels, Values) {
    EXPECT_EQ(v_ranking(true, 0.5, 0.2), 1.0);
    EXPECT_EQ(v_ranking(true, 0.2, 0.2), 0.0);
    EXPECT_EQ(v_ranking(false, 0.9, 0.1), 0.0);
    EXPECT_NEAR(v_hist(true, -1, 1), 1.0, 1e-12);
    EXPECT_NEAR(v_hist(true, 1, -1), 0.0, 1e-12);
    EXPECT_EQ(v_hist(false, -1, 1), 0.0);
}

TEST(CompleteUstat, MatchesBruteForce) {
    std::mt19937_64 rng(1);
    for (std::size_t n : {3, 5, 8, 10}) {
        auto f = random_fixture(rng, n, 3);
        for (auto k : {UKernel::Ranking, UKernel::Histogram})
            EXPECT_NEAR(complete_ustat(f.emb, f.related(), k), brute_complete(f, k), 1e-12) << n;
    }
}

TEST(CompleteUstat, NoValidPairsGivesZeroAndBoundsAreChecked) {
    std::mt19937_64 rng(2);
    auto f = random_fixture(rng, 6, 1);
    for (auto& p : f.paper) p = static_cast<int>(&p - f.paper.data());
    EXPECT_EQ(complete_ustat(f.emb, f.related(), UKernel::Ranking), 0.0);
    EXPECT_THROW(complete_ustat(Matrix<double>::Zero(2, 4), f.related(), UKernel::Ranking), InvalidArgument);
    EXPECT_THROW(complete_ustat(Matrix<double>::Zero(61, 4), f.related(), UKernel::Ranking), InvalidArgument);
}

TEST(IncompleteUstat, AveragesListedTriples) {
    std::mt19937_64 rng(3);
    auto f = random_fixture(rng, 8, 2);
    std::vector<Triple> d{{0, 1, 2}, {3, 4, 5}, {6, 7, 0}};
    double expected = 0;
    for (auto t : d) {
        bool pattern = f.paper[t[0]] == f.paper[t[1]] && f.paper[t[0]] != f.paper[t[2]];
        expected += pattern && dot(f.emb, t[0], t[1]) > dot(f.emb, t[0], t[2]);
    }
    EXPECT_NEAR(incomplete_ustat(d, f.emb, f.related(), UKernel::Ranking), expected / 3, 1e-15);
    EXPECT_THROW(incomplete_ustat({}, f.emb, f.related(), UKernel::Ranking), InvalidArgument);
}

TEST(Coloring, DisjointAndShared) {
    std::vector<Triple> disjoint{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
    auto g = build_dependency_graph(disjoint);
    EXPECT_EQ(g.max_degree(), 0u);
    EXPECT_EQ(greedy_coloring(g).chromatic_bound, 1u);
    EXPECT_EQ(greedy_coloring(disjoint).chromatic_bound, 1u);

    std::vector<Triple> shared{{0, 1, 2}, {0, 3, 4}, {5, 0, 6}, {7, 8, 0}};
    auto h = build_dependency_graph(shared);
    EXPECT_EQ(h.max_degree(), 3u);
    EXPECT_EQ(greedy_coloring(h).chromatic_bound, shared.size());
    EXPECT_EQ(greedy_coloring(shared).chromatic_bound, shared.size());
}

TEST(Coloring, ProperAndAboveClique) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> paper(0, 14);
    for (int t = 0; t < 40; ++t) {
        std::vector<Triple> d(12);
        for (auto& tr : d) tr = {paper(rng), paper(rng), paper(rng)};
        auto g = build_dependency_graph(d);
        for (std::size_t a = 0; a < g.size(); ++a)
            for (auto b : g.adjacency[a])
                EXPECT_NE(std::find(g.adjacency[b].begin(), g.adjacency[b].end(), a), g.adjacency[b].end());
        auto c = greedy_coloring(g);
        for (std::size_t a = 0; a < g.size(); ++a)
            for (auto b : g.adjacency[a]) EXPECT_NE(c.colors[a], c.colors[b]);
        EXPECT_GE(c.chromatic_bound, 1u);
        EXPECT_GE(c.chromatic_bound, max_clique(g));
        EXPECT_LE(c.chromatic_bound, g.max_degree() + 1);
        auto fast = greedy_coloring(d);
        EXPECT_EQ(fast.chromatic_bound, c.chromatic_bound);
        EXPECT_EQ(fast.colors, c.colors);
    }
}

TEST(Janson, Margins) {
    EXPECT_NEAR(janson_margin_complete(1000, 0.05), 3 * std::sqrt(std::log(20.0) / 2000), 1e-15);
    EXPECT_NEAR(janson_margin_complete(1000, 0.05), 0.11611, 5e-6);
    EXPECT_LT(janson_margin_complete(1000, 0.999999), 1e-3);
    EXPECT_NEAR(janson_margin_incomplete(4, 800, 0.05), std::sqrt(std::log(20.0) * 4 / 1600), 1e-15);
}
