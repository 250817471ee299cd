#include "eqsearch/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "eqsearch/error.hpp"

namespace eqsearch {

namespace {

template <class T>
double ranking_score_impl(const std::vector<TripletSample>& triplets, const Matrix<T>& emb) {
    if (triplets.empty()) throw InvalidArgument("ranking score of an empty triplet set");
    std::size_t wins = 0;
    for (const auto& t : triplets) {
        auto a = static_cast<Eigen::Index>(t.anchor);
        auto p = static_cast<Eigen::Index>(t.positive);
        auto n = static_cast<Eigen::Index>(t.negative);
        if (std::max({a, p, n}) >= emb.rows()) throw DimensionMismatch("triplet refers to a missing embedding");
        double sp = static_cast<double>(emb.row(a).dot(emb.row(p)));
        double sn = static_cast<double>(emb.row(a).dot(emb.row(n)));
        wins += sp > sn;
    }
    return static_cast<double>(wins) / static_cast<double>(triplets.size());
}

}  // namespace

double ranking_score(const std::vector<TripletSample>& triplets, const Matrix<float>& embeddings) {
    return ranking_score_impl(triplets, embeddings);
}

double ranking_score(const std::vector<TripletSample>& triplets, const Matrix<double>& embeddings) {
    return ranking_score_impl(triplets, embeddings);
}

double precision_at_k(const std::vector<bool>& relevance, std::size_t k) {
    if (k == 0) throw InvalidArgument("precision at k needs k >= 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, relevance.size()); ++i) hits += relevance[i];
    return static_cast<double>(hits) / static_cast<double>(k);
}

double umap(const std::vector<bool>& relevance) {
    double total = 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(kUmapHorizon, relevance.size()); ++i) {
        if (!relevance[i]) continue;
        ++hits;
        total += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return total;
}

std::size_t substring_edit_distance(std::string_view text, std::string_view pattern) {
    // Rows over the pattern, columns over the text; row 0 is all zero so a
    // match may start anywhere, and the answer is the minimum of the last row.
    std::vector<std::size_t> prev(text.size() + 1, 0), cur(text.size() + 1);
    for (std::size_t i = 1; i <= pattern.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= text.size(); ++j) {
            std::size_t sub = prev[j - 1] + (pattern[i - 1] == text[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return *std::min_element(prev.begin(), prev.end());
}

bool keyword_relevant(std::string_view section_text, const std::vector<std::string>& keywords) {
    for (const auto& kw : keywords) {
        if (kw.empty()) continue;
        if (section_text.find(kw) != std::string_view::npos) return true;
        if (kw.size() > kFuzzyKeywordLength && substring_edit_distance(section_text, kw) <= 1) return true;
    }
    return false;
}

double recall_at_k(const Matrix<float>& lhs, const Matrix<float>& rhs, std::size_t k, bool cosine) {
    if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) throw DimensionMismatch("pair sides differ in shape");
    if (k == 0) throw InvalidArgument("recall at k needs k >= 1");
    const auto n = lhs.rows();
    if (n == 0) throw InvalidArgument("recall over no pairs");
    Matrix<double> all(2 * n, lhs.cols());
    all.topRows(n) = lhs.cast<double>();
    all.bottomRows(n) = rhs.cast<double>();
    if (cosine) {
        for (Eigen::Index i = 0; i < all.rows(); ++i) {
            double norm = all.row(i).norm();
            if (norm > 0) all.row(i) /= norm;
        }
    }
    Matrix<double> scores = all * all.transpose();
    std::size_t hits = 0;
    std::vector<Eigen::Index> order;
    for (Eigen::Index q = 0; q < 2 * n; ++q) {
        Eigen::Index partner = q < n ? q + n : q - n;
        double target = scores(q, partner);
        // Rank of the partner: items scoring higher, or equal with lower index.
        std::size_t ahead = 0;
        for (Eigen::Index j = 0; j < 2 * n; ++j) {
            if (j == q || j == partner) continue;
            if (scores(q, j) > target || (scores(q, j) == target && j < partner)) ++ahead;
        }
        hits += ahead < k;
    }
    return static_cast<double>(hits) / static_cast<double>(2 * n);
}

double loo_1nn_accuracy(const Matrix<double>& points, const std::vector<int>& labels) {
    const auto n = points.rows();
    if (n < 2 || static_cast<std::size_t>(n) != labels.size())
        throw InvalidArgument("1-NN accuracy needs at least two labeled points");
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index arg = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = (points.row(i) - points.row(j)).squaredNorm();
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        correct += labels[static_cast<std::size_t>(arg)] == labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace eqsearch
