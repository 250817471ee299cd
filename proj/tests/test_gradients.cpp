#include <gtest/gtest.h>

#include <random>

#include "eqsearch/objectives.hpp"
#include "eqsearch/trainer.hpp"
#include "test_support.hpp"

using namespace eqsearch;

namespace {

constexpr double kTolerance = 1e-4;

ModelParams<double> random_params(std::uint64_t seed, BnPlacement placement = BnPlacement::AfterL1L2) {
    return ModelParams<float>::initialize(seed, placement).cast<double>();
}

}  // namespace

TEST(Gradients, CompositeHistogramAndMasking) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        auto params = random_params(100 + trial);
        auto batch = eqtest::random_loss_batch(rng, 2, 5, true);
        LossOptions opt;
        auto r = eqtest::check_loss_batch(batch, params, opt, rng);
        EXPECT_LT(r.rel_error, kTolerance) << "trial " << trial;
        EXPECT_GT(r.checked, 60u);
        EXPECT_GT(r.analytic_norm, 0.0);
    }
}

TEST(Gradients, TripletLoss) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 4; ++trial) {
        auto params = random_params(200 + trial);
        auto batch = eqtest::random_loss_batch(rng, 2, 5, false);
        LossOptions opt;
        opt.loss = SimilarityLoss::Triplet;
        auto r = eqtest::check_loss_batch(batch, params, opt, rng);
        EXPECT_LT(r.rel_error, kTolerance);
        EXPECT_GT(r.analytic_norm, 0.0);
    }
}

TEST(Gradients, InfoNce) {
    std::mt19937_64 rng(13);
    for (bool exclude : {false, true}) {
        auto params = random_params(300 + exclude);
        std::vector<ExpressionGraph> lhs, rhs;
        for (int i = 0; i < 3; ++i) {
            lhs.push_back(eqtest::random_graph(rng, 5));
            rhs.push_back(eqtest::random_graph(rng, 5));
        }
        auto r = eqtest::check_infonce_batch(lhs, rhs, params, 0.1, exclude, rng);
        EXPECT_LT(r.rel_error, kTolerance);
        EXPECT_GT(r.analytic_norm, 0.0);
    }
}

TEST(Gradients, AlternativeBatchNormPlacement) {
    std::mt19937_64 rng(14);
    auto params = random_params(400, BnPlacement::BeforeL2L4);
    auto batch = eqtest::random_loss_batch(rng, 2, 5, true);
    auto r = eqtest::check_loss_batch(batch, params, LossOptions{}, rng);
    EXPECT_LT(r.rel_error, kTolerance);
}

TEST(Gradients, MaskingOnlyReachesHeads) {
    std::mt19937_64 rng(15);
    auto params = random_params(500);
    auto batch = eqtest::random_loss_batch(rng, 2, 5, true);
    LossOptions opt;
    opt.similarity = false;
    auto r = eqtest::check_loss_batch(batch, params, opt, rng);
    EXPECT_LT(r.rel_error, kTolerance);
}

TEST(Gradients, NoMaskingLeavesHeadsWithoutGradient) {
    std::mt19937_64 rng(16);
    auto params = random_params(600);
    auto batch = eqtest::random_loss_batch(rng, 2, 5, false);
    auto grads = ModelParams<double>::gradient_buffer();
    evaluate_loss<double>(batch, params, LossOptions{}, &grads);
    EXPECT_EQ(grads.Wtag.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grads.Wattr.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grads.Wchar.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(grads.W1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, FlatHingeGivesZeroGradient) {
    std::mt19937_64 rng(17);
    auto params = random_params(700);
    auto batch = eqtest::random_loss_batch(rng, 2, 5, false);
    LossOptions opt;
    opt.loss = SimilarityLoss::Triplet;
    opt.margin = -10;  // every triplet satisfied
    auto grads = ModelParams<double>::gradient_buffer();
    auto ev = evaluate_loss<double>(batch, params, opt, &grads);
    EXPECT_EQ(ev.similarity, 0.0);
    EXPECT_EQ(grads.W1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, AlphaWithRootOnlyPositions) {
    // Every node at position 0 (a star whose leaves are all first children is
    // impossible, so use single-node graphs): alpha still checked numerically.
    std::mt19937_64 rng(18);
    auto params = random_params(800);
    LossBatch batch;
    batch.triplets = 2;
    for (int i = 0; i < 6; ++i) batch.graphs.push_back(eqtest::random_graph(rng, 1));
    auto r = eqtest::check_loss_batch(batch, params, LossOptions{}, rng);
    EXPECT_LT(r.rel_error, kTolerance);
}
