#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "eqsearch/encoder.hpp"
#include "eqsearch/expression_graph.hpp"

namespace eqsearch {

inline constexpr int kDefaultBins = 64;
inline constexpr double kDefaultMargin = 1.0;
inline constexpr double kDefaultTemperature = 0.01;

struct LossValue {
    double value = 0;
    double d_first = 0;   // d loss / d s_ap
    double d_second = 0;  // d loss / d s_an
};

// max(0, margin - s_ap + s_an)
double triplet_loss(double s_ap, double s_an, double margin = kDefaultMargin);
LossValue triplet_loss_with_grad(double s_ap, double s_an, double margin = kDefaultMargin);

// Triangular kernel for bin r in 1..R over boundaries t_1 = -1 .. t_R = 1.
double triangular_weight(double s, int r, int R = kDefaultBins);

struct HistogramLoss {
    double value = 0;
    std::vector<double> d_pos, d_neg;
};

// (1/m^2) sum_r h-_r * sum_{r' <= r} h+_{r'} with similarities clamped to
// [-1, 1]. Throws EmptyBatch semantics via InvalidArgument when m = 0 or the
// two sides differ in length.
HistogramLoss histogram_loss(std::span<const double> s_pos, std::span<const double> s_neg, int R = kDefaultBins);

// Cross-entropy averaged over the three heads, then over masked nodes.
// A target tag of -1 (tag outside the vocabulary) skips the tag term.
double masking_loss(const std::vector<HeadDistributions>& predictions, const std::vector<MaskTarget>& targets);

struct MaskingLossGrad {
    double value = 0;
    HeadLogits<double> d_logits;
};

MaskingLossGrad masking_loss_from_logits(const HeadLogits<double>& logits, const std::vector<MaskTarget>& targets);

struct InfoNceLoss {
    double value = 0;
    Matrix<double> d_lhs, d_rhs;
};

// -(1/m) sum_i log softmax_j(<l_i, r_j> / tau)[i]. With exclude_diagonal the
// denominator runs over j != i only.
InfoNceLoss infonce_loss(const Matrix<double>& lhs, const Matrix<double>& rhs, double tau = kDefaultTemperature,
                         bool exclude_diagonal = false);

}  // namespace eqsearch
