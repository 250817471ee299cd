#include "eqsearch/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eqsearch/error.hpp"

namespace eqsearch {

double triplet_loss(double s_ap, double s_an, double margin) {
    return std::max(0.0, margin - s_ap + s_an);
}

LossValue triplet_loss_with_grad(double s_ap, double s_an, double margin) {
    double v = margin - s_ap + s_an;
    if (v <= 0) return {};
    return {v, -1.0, 1.0};
}

double triangular_weight(double s, int r, int R) {
    if (R < 2 || r < 1 || r > R) throw InvalidArgument("bin index outside 1..R");
    // Distance to the apex in units of the bin width.
    double u = (s + 1.0) * (R - 1) / 2.0;
    return std::max(0.0, 1.0 - std::abs(u - (r - 1)));
}

namespace {

struct BinSplit {
    int lower;        // 0-based bin holding weight w_lower
    double w_lower;   // weight of bin `lower`, bin lower+1 gets 1 - w_lower
};

BinSplit split(double s, int R, double delta) {
    double u = (s + 1.0) / delta;
    int k = std::clamp(static_cast<int>(std::floor(u)), 0, R - 2);
    double frac = u - k;
    return {k, 1.0 - frac};
}

}  // namespace

HistogramLoss histogram_loss(std::span<const double> s_pos, std::span<const double> s_neg, int R) {
    if (s_pos.empty() || s_pos.size() != s_neg.size())
        throw InvalidArgument("histogram loss needs equally many positive and negative similarities (m >= 1)");
    if (R < 2) throw InvalidArgument("histogram loss needs R >= 2");
    const std::size_t m = s_pos.size();
    const double delta = 2.0 / (R - 1);
    const auto bins = static_cast<std::size_t>(R);

    std::vector<BinSplit> pos(m), neg(m);
    std::vector<double> h_pos(bins, 0.0), h_neg(bins, 0.0);
    auto fill = [&](std::span<const double> s, std::vector<BinSplit>& out, std::vector<double>& h) {
        for (std::size_t i = 0; i < m; ++i) {
            out[i] = split(std::clamp(s[i], -1.0, 1.0), R, delta);
            h[static_cast<std::size_t>(out[i].lower)] += out[i].w_lower;
            h[static_cast<std::size_t>(out[i].lower) + 1] += 1.0 - out[i].w_lower;
        }
    };
    fill(s_pos, pos, h_pos);
    fill(s_neg, neg, h_neg);

    std::vector<double> cum_pos(bins), tail_neg(bins);
    double acc = 0;
    for (std::size_t r = 0; r < bins; ++r) cum_pos[r] = (acc += h_pos[r]);
    acc = 0;
    for (std::size_t r = bins; r-- > 0;) tail_neg[r] = (acc += h_neg[r]);

    const double norm = 1.0 / (static_cast<double>(m) * static_cast<double>(m));
    HistogramLoss out;
    for (std::size_t r = 0; r < bins; ++r) out.value += h_neg[r] * cum_pos[r];
    out.value *= norm;

    // Moving s up by ds shifts weight ds/delta from bin k to bin k+1.
    out.d_pos.resize(m);
    out.d_neg.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto k = static_cast<std::size_t>(pos[i].lower);
        bool clamped = s_pos[i] > 1.0 || s_pos[i] < -1.0;
        out.d_pos[i] = clamped ? 0.0 : norm * (tail_neg[k + 1] - tail_neg[k]) / delta;
        k = static_cast<std::size_t>(neg[i].lower);
        clamped = s_neg[i] > 1.0 || s_neg[i] < -1.0;
        out.d_neg[i] = clamped ? 0.0 : norm * (cum_pos[k + 1] - cum_pos[k]) / delta;
    }
    return out;
}

double masking_loss(const std::vector<HeadDistributions>& predictions, const std::vector<MaskTarget>& targets) {
    if (predictions.size() != targets.size()) throw InvalidArgument("predictions and targets differ in length");
    if (predictions.empty()) throw InvalidArgument("masking loss needs at least one masked node");
    auto ce = [](const std::vector<double>& p, int target) {
        if (target < 0 || static_cast<std::size_t>(target) >= p.size()) throw InvalidArgument("target class out of range");
        return -std::log(std::max(p[static_cast<std::size_t>(target)], std::numeric_limits<double>::min()));
    };
    double total = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& t = targets[i];
        double tag = t.tag >= 0 ? ce(predictions[i].tag, t.tag) : 0.0;
        total += (tag + ce(predictions[i].attr, t.attr) + ce(predictions[i].chr, t.chr)) / 3.0;
    }
    return total / static_cast<double>(predictions.size());
}

namespace {

// Softmax cross-entropy per row; writes (p - onehot) * scale into d and
// returns the summed loss. Rows with target < 0 contribute nothing.
double softmax_ce(const Matrix<double>& logits, const std::vector<int>& target, double scale, Matrix<double>& d) {
    d = Matrix<double>::Zero(logits.rows(), logits.cols());
    double total = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int t = target[static_cast<std::size_t>(i)];
        if (t < 0) continue;
        if (t >= logits.cols()) throw InvalidArgument("target class out of range");
        double mx = logits.row(i).maxCoeff();
        auto e = (logits.row(i).array() - mx).exp().eval();
        double z = e.sum();
        total += std::log(z) + mx - logits(i, t);
        d.row(i) = (e / z * scale).matrix();
        d(i, t) -= scale;
    }
    return total;
}

}  // namespace

MaskingLossGrad masking_loss_from_logits(const HeadLogits<double>& logits, const std::vector<MaskTarget>& targets) {
    const auto m = static_cast<Eigen::Index>(targets.size());
    if (m == 0) throw InvalidArgument("masking loss needs at least one masked node");
    if (logits.tag.rows() != m || logits.attr.rows() != m || logits.chr.rows() != m)
        throw InvalidArgument("logits and targets differ in length");
    std::vector<int> tag, attr, chr;
    for (const auto& t : targets) {
        tag.push_back(t.tag);
        attr.push_back(t.attr);
        chr.push_back(t.chr);
    }
    const double scale = 1.0 / (3.0 * static_cast<double>(m));
    MaskingLossGrad out;
    out.value = scale * (softmax_ce(logits.tag, tag, 1.0, out.d_logits.tag) +
                         softmax_ce(logits.attr, attr, 1.0, out.d_logits.attr) +
                         softmax_ce(logits.chr, chr, 1.0, out.d_logits.chr));
    out.d_logits.tag *= scale;
    out.d_logits.attr *= scale;
    out.d_logits.chr *= scale;
    return out;
}

InfoNceLoss infonce_loss(const Matrix<double>& lhs, const Matrix<double>& rhs, double tau, bool exclude_diagonal) {
    const auto m = lhs.rows();
    if (m < 2) throw InvalidArgument("InfoNCE needs at least two pairs");
    if (rhs.rows() != m || rhs.cols() != lhs.cols()) throw DimensionMismatch("InfoNCE sides differ in shape");
    if (!(tau > 0)) throw InvalidArgument("temperature must be positive");

    Matrix<double> S = lhs * rhs.transpose() / tau;
    Matrix<double> dS = Matrix<double>::Zero(m, m);
    InfoNceLoss out;
    for (Eigen::Index i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m; ++j)
            if (!(exclude_diagonal && j == i)) mx = std::max(mx, S(i, j));
        double z = 0;
        for (Eigen::Index j = 0; j < m; ++j)
            if (!(exclude_diagonal && j == i)) z += std::exp(S(i, j) - mx);
        out.value += std::log(z) + mx - S(i, i);
        for (Eigen::Index j = 0; j < m; ++j)
            if (!(exclude_diagonal && j == i)) dS(i, j) = std::exp(S(i, j) - mx) / z;
        dS(i, i) -= 1.0;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    out.value *= inv_m;
    dS *= inv_m / tau;
    out.d_lhs = dS * rhs;
    out.d_rhs = dS.transpose() * lhs;
    return out;
}

}  // namespace eqsearch
