#pragma once

// Helpers shared by the unit tests and the acceptance binary: random graphs,
// small corpora and a central finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "eqsearch/corpus.hpp"
#include "eqsearch/encoder.hpp"
#include "eqsearch/expression_graph.hpp"
#include "eqsearch/model_params.hpp"
#include "eqsearch/trainer.hpp"

namespace eqtest {

using namespace eqsearch;

// Random tree with `nodes` nodes; each node has a tag and, with probability
// 1/2 each, an attribute and a character.
inline ExpressionGraph random_graph(std::mt19937_64& rng, int nodes) {
    ExpressionGraph g;
    std::uniform_int_distribution<int> tag(0, kTagSlots - 1), attr(0, kAttrSlots - 1), chr(0, kCharSlots - 1);
    std::bernoulli_distribution coin(0.5);
    std::vector<int> children(static_cast<std::size_t>(nodes), 0);
    for (int i = 0; i < nodes; ++i) {
        NodeFeature f;
        f.tag = static_cast<std::int16_t>(tag(rng));
        if (coin(rng)) f.attr = static_cast<std::int16_t>(attr(rng));
        if (coin(rng)) f.chr = static_cast<std::int16_t>(chr(rng));
        int parent = i == 0 ? -1 : std::uniform_int_distribution<int>(0, i - 1)(rng);
        g.features.push_back(f);
        g.parents.push_back(parent);
        g.positions.push_back(parent < 0 ? 0 : children[static_cast<std::size_t>(parent)]++);
        g.kinds.push_back(f.tag % 2 ? "mi" : "mo");
    }
    return g;
}

// `triplets` anchors, positives and negatives of `nodes`-node graphs; with
// masking, a fraction of the anchor nodes is zeroed and recorded.
inline LossBatch random_loss_batch(std::mt19937_64& rng, std::size_t triplets, int nodes, bool masking) {
    LossBatch b;
    b.triplets = triplets;
    for (std::size_t i = 0; i < 3 * triplets; ++i) b.graphs.push_back(random_graph(rng, nodes));
    if (masking) {
        for (std::size_t i = 0; i < triplets; ++i) {
            auto m = mask_nodes(b.graphs[i], 0.4, rng);
            b.graphs[i] = m.graph;
            for (std::size_t k = 0; k < m.masked.size(); ++k)
                b.masked.push_back({static_cast<int>(i), m.masked[k], m.targets[k]});
        }
    }
    return b;
}

// Everything at which a loss is not differentiable: ReLU sign pattern,
// histogram bins and clamping of the similarities, hinge activity.
inline std::vector<int> kink_signature(const ForwardState<double>& fw, const std::vector<double>& s_pos,
                                       const std::vector<double>& s_neg, bool histogram, int bins, double margin) {
    std::vector<int> sig;
    for (const auto& pre : fw.pre)
        for (Eigen::Index i = 0; i < pre.size(); ++i) sig.push_back(pre.data()[i] > 0);
    const double width = 2.0 / (bins - 1);
    for (std::size_t i = 0; i < s_pos.size(); ++i) {
        if (histogram) {
            for (double s : {s_pos[i], s_neg[i]}) {
                sig.push_back(s < -1 ? -1 : (s > 1 ? 1 : 0));
                sig.push_back(static_cast<int>(std::floor((std::clamp(s, -1.0, 1.0) + 1.0) / width)));
            }
        } else {
            sig.push_back(margin - s_pos[i] + s_neg[i] > 0);
        }
    }
    return sig;
}

struct Evaluation {
    double value = 0;
    std::vector<int> signature;
};

struct GradCheck {
    double rel_error = 0;  // |analytic - numeric| / max(|analytic|, |numeric|) over sampled coordinates
    std::size_t checked = 0;
    std::size_t skipped = 0;  // stencils crossing a kink
    double analytic_norm = 0;
};

// Central differences at `per_tensor` random coordinates of every trainable
// tensor (alpha always). `eval` must not accumulate gradients.
inline GradCheck check_gradients(ModelParams<double> params, const ModelParams<double>& analytic,
                                 const std::function<Evaluation(const ModelParams<double>&)>& eval,
                                 std::mt19937_64& rng, int per_tensor = 6, double h = 1e-4) {
    const auto base = eval(params).signature;
    struct Coord {
        double* p;
        double a;
    };
    std::vector<Coord> coords;
    auto grads = analytic;
    std::vector<double*> grad_ptrs;
    grads.for_each_trainable([&](const char*, double* d, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) grad_ptrs.push_back(d + i);
    });
    std::size_t offset = 0;
    params.for_each_trainable([&](const char*, double* d, Eigen::Index n) {
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        int count = n == 1 ? 1 : per_tensor;
        for (int c = 0; c < count; ++c) {
            Eigen::Index i = pick(rng);
            coords.push_back({d + i, *grad_ptrs[offset + static_cast<std::size_t>(i)]});
        }
        offset += static_cast<std::size_t>(n);
    });
    GradCheck out;
    double diff = 0, na = 0, nf = 0;
    for (auto& c : coords) {
        const double orig = *c.p;
        *c.p = orig + h;
        auto plus = eval(params);
        *c.p = orig - h;
        auto minus = eval(params);
        *c.p = orig;
        if (plus.signature != base || minus.signature != base) {
            ++out.skipped;
            continue;
        }
        const double fd = (plus.value - minus.value) / (2 * h);
        diff += (fd - c.a) * (fd - c.a);
        na += c.a * c.a;
        nf += fd * fd;
        ++out.checked;
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nf));
    out.rel_error = scale > 0 ? std::sqrt(diff) / scale : 0.0;
    out.analytic_norm = std::sqrt(na);
    return out;
}

// Composite (similarity + masking) loss check on one batch.
inline GradCheck check_loss_batch(const LossBatch& batch, const ModelParams<double>& params,
                                  const LossOptions& options, std::mt19937_64& rng, int per_tensor = 6) {
    auto grads = ModelParams<double>::gradient_buffer();
    evaluate_loss<double>(batch, params, options, &grads);
    const bool hist = options.loss == SimilarityLoss::Histogram;
    auto eval = [&](const ModelParams<double>& p) {
        auto ev = evaluate_loss<double>(batch, p, options, nullptr);
        return Evaluation{ev.total, kink_signature(ev.forward, ev.s_pos, ev.s_neg, hist, options.bins, options.margin)};
    };
    return check_gradients(params, grads, eval, rng, per_tensor);
}

inline GradCheck check_infonce_batch(const std::vector<ExpressionGraph>& lhs, const std::vector<ExpressionGraph>& rhs,
                                     const ModelParams<double>& params, double tau, bool exclude_diagonal,
                                     std::mt19937_64& rng, int per_tensor = 6) {
    auto grads = ModelParams<double>::gradient_buffer();
    evaluate_contrastive_loss<double>(lhs, rhs, params, tau, exclude_diagonal, &grads);
    auto eval = [&](const ModelParams<double>& p) {
        auto ev = evaluate_contrastive_loss<double>(lhs, rhs, p, tau, exclude_diagonal, nullptr);
        return Evaluation{ev.value, kink_signature(ev.forward, {}, {}, false, 2, 0)};
    };
    return check_gradients(params, grads, eval, rng, per_tensor);
}

// Corpus of `papers` papers with `sections` sections of `per_section`
// equations each; paper p cites paper p+1. Equations are tiny distinct
// expressions.
inline Corpus grid_corpus(std::size_t papers, std::size_t sections, std::size_t per_section) {
    std::vector<PaperRecord> ps;
    std::vector<EquationRecord> es;
    for (std::size_t p = 0; p < papers; ++p) {
        PaperRecord pr;
        pr.paper_id = "p" + std::to_string(p);
        pr.subject = "s";
        for (std::size_t s = 0; s < sections; ++s) {
            std::vector<std::string> ids;
            for (std::size_t e = 0; e < per_section; ++e) {
                EquationRecord er;
                er.eq_id = pr.paper_id + "." + std::to_string(s) + "." + std::to_string(e);
                er.paper_id = pr.paper_id;
                er.section_index = static_cast<int>(s);
                er.latex = "x_" + std::to_string(es.size());
                er.mathml = "<math><msub><mi>x</mi><mn>" + std::to_string(es.size()) + "</mn></msub></math>";
                ids.push_back(er.eq_id);
                es.push_back(er);
            }
            pr.sections.push_back(ids);
            pr.section_texts.push_back("section " + std::to_string(s));
        }
        if (p + 1 < papers) pr.citations.push_back("p" + std::to_string(p + 1));
        ps.push_back(pr);
    }
    return Corpus(ps, es);
}

}  // namespace eqtest
