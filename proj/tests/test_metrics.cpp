#include <gtest/gtest.h>

#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/metrics.hpp"

using namespace eqsearch;

namespace {

std::vector<bool> relevant_at(std::size_t n, std::initializer_list<std::size_t> ranks) {
    std::vector<bool> r(n, false);
    for (auto k : ranks) r[k - 1] = true;
    return r;
}

// Oracle: classic dynamic program over the whole text and pattern, minimised
// over all start positions.
std::size_t brute_substring_distance(const std::string& text, const std::string& pat) {
    std::size_t best = pat.size();
    for (std::size_t i = 0; i <= text.size(); ++i)
        for (std::size_t j = i; j <= text.size(); ++j) {
            std::string sub = text.substr(i, j - i);
            std::vector<std::vector<std::size_t>> d(sub.size() + 1, std::vector<std::size_t>(pat.size() + 1));
            for (std::size_t a = 0; a <= sub.size(); ++a) d[a][0] = a;
            for (std::size_t b = 0; b <= pat.size(); ++b) d[0][b] = b;
            for (std::size_t a = 1; a <= sub.size(); ++a)
                for (std::size_t b = 1; b <= pat.size(); ++b)
                    d[a][b] = std::min({d[a - 1][b] + 1, d[a][b - 1] + 1, d[a - 1][b - 1] + (sub[a - 1] != pat[b - 1])});
            best = std::min(best, d[sub.size()][pat.size()]);
        }
    return best;
}

}  // namespace

TEST(RankingScore, Examples) {
    Matrix<float> e(3, 2);
    e << 1, 0, 1, 0, 0, 1;
    std::vector<TripletSample> t{{0, 1, 2, PositiveMethod::SamePaper}};
    EXPECT_EQ(ranking_score(t, e), 1.0);
    std::vector<TripletSample> tie{{0, 0, 0, PositiveMethod::SamePaper}};
    EXPECT_EQ(ranking_score(tie, e), 0.0);
    EXPECT_THROW(ranking_score(std::vector<TripletSample>{}, e), InvalidArgument);
}

TEST(RankingScore, InvariantUnderRescaling) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    Matrix<double> e = Matrix<double>::NullaryExpr(30, 8, [&] { return n(rng); });
    std::vector<TripletSample> ts;
    std::uniform_int_distribution<std::size_t> pick(0, 29);
    for (int i = 0; i < 200; ++i) ts.push_back({pick(rng), pick(rng), pick(rng), PositiveMethod::SamePaper});
    double s = ranking_score(ts, e);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(ranking_score(ts, Matrix<double>(e * 4.0)), s);
    EXPECT_EQ(ranking_score(ts, Matrix<double>(e * 0.5)), s);
}

TEST(PrecisionAtK, Examples) {
    EXPECT_DOUBLE_EQ(precision_at_k(relevant_at(10, {1, 4, 5, 9}), 10), 0.4);
    EXPECT_DOUBLE_EQ(precision_at_k(relevant_at(20, {1, 2, 15}), 10), 0.2);
    EXPECT_DOUBLE_EQ(precision_at_k(relevant_at(5, {1, 2}), 10), 0.2);
}

TEST(Umap, Examples) {
    EXPECT_NEAR(umap(relevant_at(10, {1, 3})), 5.0 / 3.0, 1e-12);
    EXPECT_EQ(umap(std::vector<bool>(10, false)), 0.0);
    EXPECT_NEAR(umap(std::vector<bool>(4, true)), 4.0, 1e-12);
    auto far = std::vector<bool>(1200, false);
    far[1100] = true;
    EXPECT_EQ(umap(far), 0.0);
}

TEST(Levenshtein, Fixtures) {
    EXPECT_EQ(substring_edit_distance("the erm objective", "erm"), 0u);
    EXPECT_EQ(substring_edit_distance("reinforcment learning", "reinforcement learning"), 1u);
    EXPECT_EQ(substring_edit_distance("kitten", "sitting"), 3u);
    EXPECT_EQ(substring_edit_distance("", "abc"), 3u);
    EXPECT_EQ(substring_edit_distance("abc", ""), 0u);
}

TEST(Levenshtein, MatchesBruteForce) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> ch('a', 'c'), len(0, 7);
    for (int t = 0; t < 200; ++t) {
        std::string text, pat;
        for (int i = len(rng); i > 0; --i) text += static_cast<char>(ch(rng));
        for (int i = 1 + len(rng) / 2; i > 0; --i) pat += static_cast<char>(ch(rng));
        EXPECT_EQ(substring_edit_distance(text, pat), brute_substring_distance(text, pat)) << text << " / " << pat;
    }
}

TEST(KeywordRelevant, Examples) {
    EXPECT_TRUE(keyword_relevant("we minimise the erm objective here", {"erm"}));
    EXPECT_TRUE(keyword_relevant("deep reinforcment learning agents", {"reinforcement learning"}));
    EXPECT_FALSE(keyword_relevant("a study of lattice gauge fields", {"policy gradient"}));
    EXPECT_FALSE(keyword_relevant("the ern objective", {"erm"}));
    EXPECT_TRUE(keyword_relevant("bayes theorem", {"posterior", "bayes"}));
}

TEST(RecallAtK, Examples) {
    Matrix<float> l = Matrix<float>::Zero(2, 4);
    l(0, 0) = l(1, 1) = 1;
    EXPECT_EQ(recall_at_k(l, l, 1, false), 1.0);
    EXPECT_EQ(recall_at_k(l, l, 1, true), 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<float> n(0, 1);
    Matrix<float> a = Matrix<float>::NullaryExpr(50, 8, [&] { return n(rng); });
    Matrix<float> b = Matrix<float>::NullaryExpr(50, 8, [&] { return n(rng); });
    EXPECT_EQ(recall_at_k(a, b, 100, false), 1.0);
    double r1 = recall_at_k(a, b, 1, true), r10 = recall_at_k(a, b, 10, true);
    EXPECT_LE(r1, r10);
}

TEST(Loo1nn, Examples) {
    Matrix<double> clusters(4, 1);
    clusters << 0, 0.1, 10, 10.1;
    EXPECT_EQ(loo_1nn_accuracy(clusters, {0, 0, 1, 1}), 1.0);
    Matrix<double> line(6, 1);
    line << 0, 1, 2, 3, 4, 5;
    EXPECT_EQ(loo_1nn_accuracy(line, {0, 1, 0, 1, 0, 1}), 0.0);
    EXPECT_EQ(loo_1nn_accuracy(line, {2, 2, 2, 2, 2, 2}), 1.0);
    EXPECT_THROW(loo_1nn_accuracy(Matrix<double>::Zero(1, 1), {0}), InvalidArgument);
}
