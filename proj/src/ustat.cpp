#include "eqsearch/ustat.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "eqsearch/error.hpp"
#include "eqsearch/objectives.hpp"

namespace eqsearch {

double v_ranking(bool pattern, double s12, double s13) {
    return pattern && s12 > s13 ? 1.0 : 0.0;
}

double v_hist(bool pattern, double s12, double s13, int R) {
    if (!pattern) return 0.0;
    double pos[1] = {s12};
    double neg[1] = {s13};
    return histogram_loss(pos, neg, R).value;
}

namespace {

double kernel_value(UKernel kernel, bool pattern, double s12, double s13, int R) {
    return kernel == UKernel::Ranking ? v_ranking(pattern, s12, s13) : v_hist(pattern, s12, s13, R);
}

double triple_value(const Matrix<double>& e, const RelatedFn& related, UKernel kernel, int R, std::size_t i,
                    std::size_t j, std::size_t k) {
    bool pattern = related(i, j) && !related(i, k);
    if (!pattern) return 0.0;
    auto ri = static_cast<Eigen::Index>(i);
    return kernel_value(kernel, true, e.row(ri).dot(e.row(static_cast<Eigen::Index>(j))),
                        e.row(ri).dot(e.row(static_cast<Eigen::Index>(k))), R);
}

}  // namespace

double complete_ustat(const Matrix<double>& embeddings, const RelatedFn& related, UKernel kernel, int R) {
    const auto n = static_cast<std::size_t>(embeddings.rows());
    if (n > kCompleteUstatLimit) throw InvalidArgument("complete U-statistic limited to 60 items");
    if (n < 3) throw InvalidArgument("complete U-statistic needs at least three items");
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i || k == j) continue;
                total += triple_value(embeddings, related, kernel, R, i, j, k);
            }
        }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(n - 2));
}

double incomplete_ustat(const std::vector<Triple>& triples, const Matrix<double>& embeddings,
                        const RelatedFn& related, UKernel kernel, int R) {
    if (triples.empty()) throw InvalidArgument("incomplete U-statistic over no triples");
    double total = 0;
    for (const auto& t : triples) {
        if (static_cast<Eigen::Index>(std::max({t[0], t[1], t[2]})) >= embeddings.rows())
            throw DimensionMismatch("triple refers to a missing embedding");
        total += triple_value(embeddings, related, kernel, R, t[0], t[1], t[2]);
    }
    return total / static_cast<double>(triples.size());
}

std::size_t DependencyGraph::max_degree() const {
    std::size_t d = 0;
    for (const auto& a : adjacency) d = std::max(d, a.size());
    return d;
}

namespace {

std::vector<std::size_t> distinct(const Triple& t) {
    std::vector<std::size_t> v(t.begin(), t.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<std::size_t> degree_order(const std::vector<std::size_t>& degree) {
    std::vector<std::size_t> order(degree.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return degree[a] > degree[b]; });
    return order;
}

}  // namespace

DependencyGraph build_dependency_graph(const std::vector<Triple>& papers) {
    std::map<std::size_t, std::vector<std::size_t>> touching;
    for (std::size_t t = 0; t < papers.size(); ++t)
        for (std::size_t p : distinct(papers[t])) touching[p].push_back(t);
    DependencyGraph g;
    g.adjacency.resize(papers.size());
    for (std::size_t t = 0; t < papers.size(); ++t) {
        std::set<std::size_t> nb;
        for (std::size_t p : distinct(papers[t]))
            for (std::size_t u : touching[p])
                if (u != t) nb.insert(u);
        g.adjacency[t].assign(nb.begin(), nb.end());
    }
    return g;
}

Coloring greedy_coloring(const DependencyGraph& graph) {
    const std::size_t n = graph.size();
    std::vector<std::size_t> degree(n);
    for (std::size_t v = 0; v < n; ++v) degree[v] = graph.adjacency[v].size();
    constexpr std::size_t kUncolored = static_cast<std::size_t>(-1);
    Coloring c;
    c.colors.assign(n, kUncolored);
    std::vector<char> used;
    for (std::size_t v : degree_order(degree)) {
        used.assign(graph.adjacency[v].size() + 1, 0);
        for (std::size_t u : graph.adjacency[v])
            if (c.colors[u] != kUncolored && c.colors[u] < used.size()) used[c.colors[u]] = 1;
        std::size_t color = 0;
        while (used[color]) ++color;
        c.colors[v] = color;
        c.chromatic_bound = std::max(c.chromatic_bound, color + 1);
    }
    return c;
}

Coloring greedy_coloring(const std::vector<Triple>& papers) {
    const std::size_t n = papers.size();
    std::vector<std::vector<std::size_t>> sets(n);
    std::map<std::size_t, std::size_t> single;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair;
    std::map<Triple, std::size_t> triple;
    for (std::size_t t = 0; t < n; ++t) {
        sets[t] = distinct(papers[t]);
        const auto& s = sets[t];
        for (std::size_t a = 0; a < s.size(); ++a) {
            ++single[s[a]];
            for (std::size_t b = a + 1; b < s.size(); ++b) {
                ++pair[{s[a], s[b]}];
                for (std::size_t c = b + 1; c < s.size(); ++c) ++triple[{s[a], s[b], s[c]}];
            }
        }
    }
    // Degree by inclusion-exclusion over the triplets touching each paper.
    std::vector<std::size_t> degree(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& s = sets[t];
        long long reach = 0;
        for (std::size_t a = 0; a < s.size(); ++a) {
            reach += static_cast<long long>(single[s[a]]);
            for (std::size_t b = a + 1; b < s.size(); ++b) {
                reach -= static_cast<long long>(pair[{s[a], s[b]}]);
                for (std::size_t c = b + 1; c < s.size(); ++c)
                    reach += static_cast<long long>(triple[{s[a], s[b], s[c]}]);
            }
        }
        degree[t] = static_cast<std::size_t>(reach - 1);
    }

    std::map<std::size_t, std::set<std::size_t>> paper_colors;
    Coloring c;
    c.colors.assign(n, 0);
    for (std::size_t v : degree_order(degree)) {
        std::size_t color = 0;
        auto taken = [&](std::size_t col) {
            for (std::size_t p : sets[v]) {
                auto it = paper_colors.find(p);
                if (it != paper_colors.end() && it->second.count(col)) return true;
            }
            return false;
        };
        while (taken(color)) ++color;
        c.colors[v] = color;
        for (std::size_t p : sets[v]) paper_colors[p].insert(color);
        c.chromatic_bound = std::max(c.chromatic_bound, color + 1);
    }
    return c;
}

double janson_margin_complete(std::size_t n_papers, double delta) {
    if (!(delta > 0 && delta < 1)) throw InvalidArgument("delta must lie in (0, 1)");
    if (n_papers == 0) throw InvalidArgument("need at least one paper");
    return 3.0 * std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(n_papers)));
}

double janson_margin_incomplete(std::size_t chi, std::size_t n_triples, double delta) {
    if (!(delta > 0 && delta < 1)) throw InvalidArgument("delta must lie in (0, 1)");
    if (n_triples == 0) throw InvalidArgument("need at least one triple");
    return std::sqrt(std::log(1.0 / delta) * static_cast<double>(chi) / (2.0 * static_cast<double>(n_triples)));
}

}  // namespace eqsearch
