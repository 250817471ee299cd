#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/objectives.hpp"

using namespace eqsearch;

namespace {

// Independent oracle: histograms from the kernel definition, then the
// double sum over r' <= r.
double brute_histogram_loss(const std::vector<double>& sp, const std::vector<double>& sn, int R) {
    std::vector<double> hp(static_cast<std::size_t>(R) + 1, 0.0), hn(hp);
    for (int r = 1; r <= R; ++r) {
        for (double s : sp) hp[static_cast<std::size_t>(r)] += triangular_weight(std::clamp(s, -1.0, 1.0), r, R);
        for (double s : sn) hn[static_cast<std::size_t>(r)] += triangular_weight(std::clamp(s, -1.0, 1.0), r, R);
    }
    double total = 0;
    for (int r = 1; r <= R; ++r)
        for (int q = 1; q <= r; ++q) total += hn[static_cast<std::size_t>(r)] * hp[static_cast<std::size_t>(q)];
    const double m = static_cast<double>(sp.size());
    return total / (m * m);
}

HeadDistributions uniform_heads() {
    return {std::vector<double>(32, 1.0 / 32), std::vector<double>(33, 1.0 / 33), std::vector<double>(193, 1.0 / 193)};
}

}  // namespace

TEST(TripletLoss, Examples) {
    EXPECT_EQ(triplet_loss(1, -1, 1), 0.0);
    EXPECT_EQ(triplet_loss(0, 0, 1), 1.0);
    EXPECT_NEAR(triplet_loss(0.5, 0.2, 1), 0.7, 1e-15);
    auto g = triplet_loss_with_grad(0.5, 0.2);
    EXPECT_NEAR(g.value, 0.7, 1e-15);
    EXPECT_EQ(g.d_first, -1.0);
    EXPECT_EQ(g.d_second, 1.0);
    EXPECT_EQ(triplet_loss_with_grad(1, -1).d_first, 0.0);
}

TEST(TriangularKernel, ApexAndBoundaries) {
    const int R = 64;
    const double delta = 2.0 / (R - 1);
    for (int r = 1; r <= R; ++r) EXPECT_NEAR(triangular_weight(-1.0 + (r - 1) * delta, r, R), 1.0, 1e-12);
    EXPECT_EQ(triangular_weight(-1.0, 1, R), 1.0);
    for (int r = 2; r <= R; ++r) EXPECT_EQ(triangular_weight(-1.0, r, R), 0.0);
    EXPECT_EQ(triangular_weight(1.0, R, R), 1.0);
    EXPECT_THROW(triangular_weight(0, 0, R), InvalidArgument);
    EXPECT_THROW(triangular_weight(0, R + 1, R), InvalidArgument);
}

TEST(TriangularKernel, PartitionOfUnityAndSupport) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int R : {2, 5, 64}) {
        const double delta = 2.0 / (R - 1);
        for (int t = 0; t < 500; ++t) {
            double s = u(rng), sum = 0;
            int nonzero = 0;
            for (int r = 1; r <= R; ++r) {
                double w = triangular_weight(s, r, R);
                EXPECT_GE(w, 0.0);
                sum += w;
                nonzero += w > 0;
                if (std::abs(s - (-1.0 + (r - 1) * delta)) >= delta) EXPECT_EQ(w, 0.0);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
            EXPECT_LE(nonzero, 2);
        }
    }
}

TEST(HistogramLoss, OrderedAndReversed) {
    std::vector<double> ones(5, 1.0), minus(5, -1.0);
    EXPECT_NEAR(histogram_loss(ones, minus).value, 0.0, 1e-15);
    EXPECT_NEAR(histogram_loss(minus, ones).value, 1.0, 1e-15);
}

TEST(HistogramLoss, MatchesBruteForce) {
    EXPECT_NEAR(histogram_loss(std::vector<double>{0.0}, std::vector<double>{0.0}).value,
                brute_histogram_loss({0.0}, {0.0}, 64), 1e-12);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.3, 1.3);
    for (int R : {2, 7, 64}) {
        for (int t = 0; t < 30; ++t) {
            std::size_t m = 1 + t % 9;
            std::vector<double> sp(m), sn(m);
            for (auto& s : sp) s = u(rng);
            for (auto& s : sn) s = u(rng);
            auto h = histogram_loss(sp, sn, R);
            EXPECT_NEAR(h.value, brute_histogram_loss(sp, sn, R), 1e-12);
            EXPECT_GE(h.value, 0.0);
            EXPECT_LE(h.value, 1.0 + 1e-12);
        }
    }
}

TEST(HistogramLoss, GradientMatchesFiniteDifference) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.95, 0.95);
    std::vector<double> sp(6), sn(6);
    for (auto& s : sp) s = u(rng);
    for (auto& s : sn) s = u(rng);
    auto h = histogram_loss(sp, sn, 16);
    const double eps = 1e-7;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        auto a = sp, b = sp;
        a[i] += eps;
        b[i] -= eps;
        EXPECT_NEAR((histogram_loss(a, sn, 16).value - histogram_loss(b, sn, 16).value) / (2 * eps), h.d_pos[i], 1e-6);
        a = sn, b = sn;
        a[i] += eps;
        b[i] -= eps;
        EXPECT_NEAR((histogram_loss(sp, a, 16).value - histogram_loss(sp, b, 16).value) / (2 * eps), h.d_neg[i], 1e-6);
    }
}

TEST(HistogramLoss, RejectsBadBatches) {
    EXPECT_THROW(histogram_loss(std::vector<double>{}, std::vector<double>{}), InvalidArgument);
    EXPECT_THROW(histogram_loss(std::vector<double>{0.1}, std::vector<double>{0.1, 0.2}), InvalidArgument);
}

TEST(MaskingLoss, UniformPredictions) {
    const double expected = (std::log(32.0) + std::log(33.0) + std::log(193.0)) / 3;
    EXPECT_NEAR(expected, 4.0750, 5e-5);
    std::vector<HeadDistributions> preds(3, uniform_heads());
    std::vector<MaskTarget> targets{{0, 32, 192}, {5, 1, 7}, {31, 0, 0}};
    EXPECT_NEAR(masking_loss(preds, targets), expected, 1e-12);
}

TEST(MaskingLoss, PerfectPredictionAndOrderInvariance) {
    HeadDistributions sure{std::vector<double>(32, 0.0), std::vector<double>(33, 0.0), std::vector<double>(193, 0.0)};
    sure.tag[3] = sure.attr[32] = sure.chr[10] = 1.0;
    EXPECT_NEAR(masking_loss({sure}, {{3, 32, 10}}), 0.0, 1e-15);

    auto mixed = uniform_heads();
    mixed.tag[0] = 0.5;
    std::vector<HeadDistributions> p{sure, mixed, uniform_heads()};
    std::vector<MaskTarget> t{{3, 32, 10}, {0, 2, 4}, {1, 1, 1}};
    double a = masking_loss(p, t);
    std::swap(p[0], p[2]);
    std::swap(t[0], t[2]);
    EXPECT_NEAR(masking_loss(p, t), a, 1e-15);
}

TEST(MaskingLoss, LogitsVersionAgrees) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 2);
    HeadLogits<double> logits{Matrix<double>::NullaryExpr(2, 32, [&] { return n(rng); }),
                              Matrix<double>::NullaryExpr(2, 33, [&] { return n(rng); }),
                              Matrix<double>::NullaryExpr(2, 193, [&] { return n(rng); })};
    std::vector<MaskTarget> targets{{4, 32, 100}, {0, 7, 192}};
    std::vector<HeadDistributions> preds;
    for (Eigen::Index i = 0; i < 2; ++i) {
        auto softmax = [&](const Matrix<double>& m) {
            auto e = (m.row(i).array() - m.row(i).maxCoeff()).exp().eval();
            std::vector<double> out(static_cast<std::size_t>(m.cols()));
            for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = e(j) / e.sum();
            return out;
        };
        preds.push_back({softmax(logits.tag), softmax(logits.attr), softmax(logits.chr)});
    }
    auto g = masking_loss_from_logits(logits, targets);
    EXPECT_NEAR(g.value, masking_loss(preds, targets), 1e-12);
    const double eps = 1e-6;
    auto bumped = logits;
    bumped.chr(1, 5) += eps;
    double up = masking_loss_from_logits(bumped, targets).value;
    bumped.chr(1, 5) -= 2 * eps;
    double down = masking_loss_from_logits(bumped, targets).value;
    EXPECT_NEAR((up - down) / (2 * eps), g.d_logits.chr(1, 5), 1e-7);
}

TEST(InfoNce, OrthonormalPairs) {
    Matrix<double> l = Matrix<double>::Zero(2, kEmbeddingDim);
    l(0, 0) = l(1, 1) = 1.0;
    auto r = infonce_loss(l, l, 1.0);
    EXPECT_NEAR(r.value, -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-12);
    EXPECT_NEAR(r.value, 0.3133, 5e-5);
}

TEST(InfoNce, EqualSimilaritiesGiveLogM) {
    for (int m : {2, 5, 17}) {
        Matrix<double> l = Matrix<double>::Constant(m, kEmbeddingDim, 0.1);
        EXPECT_NEAR(infonce_loss(l, l, 0.01).value, std::log(m), 1e-9);
    }
}

TEST(InfoNce, GradientMatchesFiniteDifference) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 0.3);
    Matrix<double> l = Matrix<double>::NullaryExpr(4, 8, [&] { return n(rng); });
    Matrix<double> r = Matrix<double>::NullaryExpr(4, 8, [&] { return n(rng); });
    for (bool exclude : {false, true}) {
        auto g = infonce_loss(l, r, 0.5, exclude);
        const double eps = 1e-6;
        for (auto [i, j] : {std::pair{0, 0}, std::pair{2, 5}, std::pair{3, 7}}) {
            auto a = l, b = l;
            a(i, j) += eps;
            b(i, j) -= eps;
            EXPECT_NEAR((infonce_loss(a, r, 0.5, exclude).value - infonce_loss(b, r, 0.5, exclude).value) / (2 * eps),
                        g.d_lhs(i, j), 1e-7);
            a = r, b = r;
            a(i, j) += eps;
            b(i, j) -= eps;
            EXPECT_NEAR((infonce_loss(l, a, 0.5, exclude).value - infonce_loss(l, b, 0.5, exclude).value) / (2 * eps),
                        g.d_rhs(i, j), 1e-7);
        }
    }
}
