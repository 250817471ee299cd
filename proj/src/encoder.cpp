#include "eqsearch/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eqsearch/error.hpp"

namespace eqsearch {

std::vector<double> positional_embedding(int p, int d) {
    if (p < 0) throw InvalidArgument("position must be non-negative");
    std::vector<double> e(static_cast<std::size_t>(d));
    for (int i = 0; 2 * i < d; ++i) {
        double angle = static_cast<double>(p) / std::pow(10000.0, 2.0 * i / d);
        e[static_cast<std::size_t>(2 * i)] = std::sin(angle);
        if (2 * i + 1 < d) e[static_cast<std::size_t>(2 * i + 1)] = std::cos(angle);
    }
    return e;
}

namespace {

constexpr int kCachedPositions = 1024;

const std::vector<std::vector<double>>& position_table() {
    static const std::vector<std::vector<double>> table = [] {
        std::vector<std::vector<double>> t;
        t.reserve(kCachedPositions);
        for (int p = 0; p < kCachedPositions; ++p) t.push_back(positional_embedding(p, kHiddenDim));
        return t;
    }();
    return table;
}

template <class T>
void fill_position_row(Matrix<T>& P, Eigen::Index row, int p) {
    if (p < kCachedPositions) {
        const auto& e = position_table()[static_cast<std::size_t>(p)];
        for (int c = 0; c < kHiddenDim; ++c) P(row, c) = static_cast<T>(e[static_cast<std::size_t>(c)]);
    } else {
        auto e = positional_embedding(p, kHiddenDim);
        for (int c = 0; c < kHiddenDim; ++c) P(row, c) = static_cast<T>(e[static_cast<std::size_t>(c)]);
    }
}

// Orders row indices by row contents; sums taken in this order are
// independent of node numbering.
template <class T>
void sort_rows_by_content(const Matrix<T>& z, std::vector<Eigen::Index>& rows) {
    const auto cols = z.cols();
    std::sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
        const T* ra = z.data() + a * cols;
        const T* rb = z.data() + b * cols;
        return std::lexicographical_compare(ra, ra + cols, rb, rb + cols);
    });
}

template <class T>
Matrix<T> aggregate(const PackedBatch& b, const Matrix<T>& z) {
    Matrix<T> out(z.rows(), z.cols());
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < b.nodes(); ++i) {
        rows.assign(1, static_cast<Eigen::Index>(i));
        for (int k = b.neighbor_start[i]; k < b.neighbor_start[i + 1]; ++k)
            rows.push_back(b.neighbors[static_cast<std::size_t>(k)]);
        sort_rows_by_content(z, rows);
        auto dst = out.row(static_cast<Eigen::Index>(i));
        dst = z.row(rows[0]);
        for (std::size_t r = 1; r < rows.size(); ++r) dst += z.row(rows[r]);
    }
    return out;
}

// x * w^T with the row count padded to a whole number of GEMM row blocks,
// so every row goes through the same kernel.
inline constexpr Eigen::Index kRowBlock = 48;

template <class T>
Matrix<T> row_stable_product(const Matrix<T>& x, const Matrix<T>& w) {
    const Eigen::Index rows = x.rows();
    if (rows % kRowBlock == 0) return x * w.transpose();
    Matrix<T> padded = Matrix<T>::Zero((rows / kRowBlock + 1) * kRowBlock, x.cols());
    padded.topRows(rows) = x;
    Matrix<T> y = padded * w.transpose();
    return y.topRows(rows);
}

template <class T>
Vector<T> sum_rows_canonical(const Matrix<T>& z, Eigen::Index lo, Eigen::Index count) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(count));
    std::iota(rows.begin(), rows.end(), lo);
    sort_rows_by_content(z, rows);
    Vector<T> sum = Vector<T>::Zero(z.cols());
    for (auto r : rows) sum += z.row(r).transpose();
    return sum;
}

template <class T>
void add_row_bias(Matrix<T>& m, const Vector<T>& b) {
    m.rowwise() += b.transpose();
}

template <class T>
const BatchNormParams<T>& bn_params(const ModelParams<T>& p, int k) {
    return k == 0 ? p.bn1 : p.bn2;
}

template <class T>
BatchNormParams<T>& bn_params(ModelParams<T>& p, int k) {
    return k == 0 ? p.bn1 : p.bn2;
}

template <class T>
Matrix<T> batch_norm_forward(const Matrix<T>& x, const BatchNormParams<T>& bn, Mode mode, BatchNormCache<T>& cache) {
    const auto n = static_cast<T>(x.rows());
    if (mode == Mode::Train) {
        cache.batch_mean = x.colwise().sum().transpose() / n;
        Matrix<T> centered = x.rowwise() - cache.batch_mean.transpose();
        cache.batch_var = centered.array().square().colwise().sum().transpose() / n;
        cache.inv_std = (cache.batch_var.array() + bn.epsilon).rsqrt();
        cache.xhat = centered.array().rowwise() * cache.inv_std.transpose().array();
    } else {
        cache.inv_std = (bn.running_var.array() + bn.epsilon).rsqrt();
        cache.xhat = (x.rowwise() - bn.running_mean.transpose()).array().rowwise() * cache.inv_std.transpose().array();
    }
    Matrix<T> y = cache.xhat.array().rowwise() * bn.gamma.transpose().array();
    add_row_bias(y, bn.beta);
    return y;
}

template <class T>
Matrix<T> batch_norm_backward(const Matrix<T>& dy, const BatchNormParams<T>& bn, Mode mode,
                              const BatchNormCache<T>& cache, BatchNormParams<T>& grad) {
    grad.gamma += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
    grad.beta += dy.colwise().sum().transpose();
    Matrix<T> dxhat = dy.array().rowwise() * bn.gamma.transpose().array();
    if (mode == Mode::Eval) return dxhat.array().rowwise() * cache.inv_std.transpose().array();
    const auto n = static_cast<T>(dy.rows());
    Vector<T> sum_dxhat = dxhat.colwise().sum().transpose();
    Vector<T> sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum().transpose();
    Matrix<T> dx = (dxhat * n).rowwise() - sum_dxhat.transpose();
    dx.array() -= cache.xhat.array().rowwise() * sum_dxhat_xhat.transpose().array();
    dx.array().rowwise() *= (cache.inv_std / n).transpose().array();
    return dx;
}

// Index of the batch norm applied after conv layer k, or -1.
template <class T>
int bn_following(const ForwardState<T>& s, int k) {
    for (int b = 0; b < 2; ++b)
        if (s.bn_after(b) == k) return b;
    return -1;
}

template <class T>
const Matrix<T>& layer_input(const ForwardState<T>& s, int k) {
    int b = bn_following(s, k - 1);
    return b >= 0 ? s.normed[static_cast<std::size_t>(b)] : s.out[static_cast<std::size_t>(k - 1)];
}

template <class T>
const Matrix<T>& conv_weight(const ModelParams<T>& p, int k) {
    return k == 1 ? p.W2 : (k == 2 ? p.W3 : p.W4);
}
template <class T>
Matrix<T>& conv_weight(ModelParams<T>& p, int k) {
    return k == 1 ? p.W2 : (k == 2 ? p.W3 : p.W4);
}
template <class T>
const Vector<T>& conv_bias(const ModelParams<T>& p, int k) {
    return k == 1 ? p.b2 : (k == 2 ? p.b3 : p.b4);
}
template <class T>
Vector<T>& conv_bias(ModelParams<T>& p, int k) {
    return k == 1 ? p.b2 : (k == 2 ? p.b3 : p.b4);
}

void check_feature(const NodeFeature& f) {
    if (f.tag >= kTagSlots || f.attr >= kAttrSlots || f.chr >= kCharSlots)
        throw DimensionMismatch("node feature index outside the 256-dimensional layout");
}

}  // namespace

PackedBatch pack_graphs(const std::vector<const ExpressionGraph*>& graphs) {
    if (graphs.empty()) throw InvalidArgument("empty graph batch");
    PackedBatch b;
    b.offsets.push_back(0);
    std::vector<std::vector<int>> adj;
    for (const ExpressionGraph* g : graphs) {
        if (g->size() == 0) throw InvalidArgument("graph without nodes");
        if (g->positions.size() != g->size() || g->parents.size() != g->size())
            throw DimensionMismatch("graph arrays disagree in length");
        int base = b.offsets.back();
        for (std::size_t i = 0; i < g->size(); ++i) {
            check_feature(g->features[i]);
            b.features.push_back(g->features[i]);
            b.positions.push_back(g->positions[i]);
        }
        adj.resize(b.features.size());
        for (std::size_t i = 0; i < g->size(); ++i) {
            int parent = g->parents[i];
            if (parent < 0) continue;
            int child = base + static_cast<int>(i);
            adj[static_cast<std::size_t>(base + parent)].push_back(child);
            adj[static_cast<std::size_t>(child)].push_back(base + parent);
        }
        b.offsets.push_back(static_cast<int>(b.features.size()));
    }
    b.neighbor_start.push_back(0);
    for (const auto& list : adj) {
        b.neighbors.insert(b.neighbors.end(), list.begin(), list.end());
        b.neighbor_start.push_back(static_cast<int>(b.neighbors.size()));
    }
    return b;
}

PackedBatch pack_graphs(const std::vector<ExpressionGraph>& graphs) {
    std::vector<const ExpressionGraph*> ptrs;
    ptrs.reserve(graphs.size());
    for (const auto& g : graphs) ptrs.push_back(&g);
    return pack_graphs(ptrs);
}

template <class T>
ForwardState<T> forward(const PackedBatch& batch, const ModelParams<T>& params, Mode mode) {
    if (batch.graphs() == 0) throw InvalidArgument("empty graph batch");
    ForwardState<T> s;
    s.mode = mode;
    s.placement = params.bn_placement;
    const auto n = static_cast<Eigen::Index>(batch.nodes());

    s.P.resize(n, kHiddenDim);
    for (Eigen::Index i = 0; i < n; ++i) fill_position_row(s.P, i, batch.positions[static_cast<std::size_t>(i)]);

    Matrix<T> w1t = params.W1.transpose();
    Matrix<T> z = params.alpha * s.P;
    add_row_bias(z, params.b1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& f = batch.features[static_cast<std::size_t>(i)];
        if (f.tag >= 0) z.row(i) += w1t.row(f.tag);
        if (f.attr >= 0) z.row(i) += w1t.row(kAttrOffset + f.attr);
        if (f.chr >= 0) z.row(i) += w1t.row(kCharOffset + f.chr);
    }

    for (int k = 0; k < 4; ++k) {
        auto ku = static_cast<std::size_t>(k);
        if (k > 0) {
            z = row_stable_product(layer_input(s, k), conv_weight(params, k));
            add_row_bias(z, conv_bias(params, k));
        }
        s.pre[ku] = aggregate(batch, z);
        s.out[ku] = s.pre[ku].cwiseMax(T(0));
        int b = bn_following(s, k);
        if (b >= 0) {
            auto bu = static_cast<std::size_t>(b);
            s.normed[bu] = batch_norm_forward(s.out[ku], bn_params(params, b), mode, s.bn[bu]);
        }
    }

    const auto graphs = static_cast<Eigen::Index>(batch.graphs());
    s.mean_phi.resize(graphs, kHiddenDim);
    for (Eigen::Index g = 0; g < graphs; ++g) {
        int lo = batch.offsets[static_cast<std::size_t>(g)];
        int hi = batch.offsets[static_cast<std::size_t>(g) + 1];
        s.mean_phi.row(g) = sum_rows_canonical(s.out[3], lo, hi - lo).transpose() / static_cast<T>(hi - lo);
    }
    s.pooled = s.mean_phi * params.Wproj.transpose();
    add_row_bias(s.pooled, params.bproj);
    return s;
}

template <class T>
void update_running_stats(ModelParams<T>& params, const ForwardState<T>& state) {
    if (state.mode != Mode::Train) return;
    for (int b = 0; b < 2; ++b) {
        auto& bn = bn_params(params, b);
        const auto& c = state.bn[static_cast<std::size_t>(b)];
        bn.running_mean = (1 - bn.momentum) * bn.running_mean + bn.momentum * c.batch_mean;
        bn.running_var = (1 - bn.momentum) * bn.running_var + bn.momentum * c.batch_var;
    }
}

template <class T>
void backward(const PackedBatch& batch, const ModelParams<T>& params, const ForwardState<T>& s,
              const Matrix<T>& d_pooled, const Matrix<T>* d_phi, ModelParams<T>& grads) {
    const auto graphs = static_cast<Eigen::Index>(batch.graphs());
    if (d_pooled.rows() != graphs || d_pooled.cols() != kEmbeddingDim)
        throw DimensionMismatch("pooled gradient has the wrong shape");

    grads.Wproj += d_pooled.transpose() * s.mean_phi;
    grads.bproj += d_pooled.colwise().sum().transpose();
    Matrix<T> d_mean = d_pooled * params.Wproj;

    Matrix<T> g = d_phi ? *d_phi : Matrix<T>::Zero(s.out[3].rows(), kHiddenDim);
    for (Eigen::Index gi = 0; gi < graphs; ++gi) {
        int lo = batch.offsets[static_cast<std::size_t>(gi)];
        int hi = batch.offsets[static_cast<std::size_t>(gi) + 1];
        auto scaled = (d_mean.row(gi) / static_cast<T>(hi - lo)).eval();
        for (int i = lo; i < hi; ++i) g.row(i) += scaled;
    }

    for (int k = 3; k >= 0; --k) {
        auto ku = static_cast<std::size_t>(k);
        int b = bn_following(s, k);
        if (b >= 0)
            g = batch_norm_backward(g, bn_params(params, b), s.mode, s.bn[static_cast<std::size_t>(b)],
                                    bn_params(grads, b));
        Matrix<T> d_pre = (s.pre[ku].array() > T(0)).select(g, T(0));
        Matrix<T> dz = aggregate(batch, d_pre);
        if (k > 0) {
            const Matrix<T>& in = layer_input(s, k);
            conv_weight(grads, k) += dz.transpose() * in;
            conv_bias(grads, k) += dz.colwise().sum().transpose();
            g = dz * conv_weight(params, k);
        } else {
            grads.b1 += dz.colwise().sum().transpose();
            grads.alpha += (dz.array() * s.P.array()).sum();
            Matrix<T> dw1t = Matrix<T>::Zero(kFeatureDim, kHiddenDim);
            for (Eigen::Index i = 0; i < dz.rows(); ++i) {
                const auto& f = batch.features[static_cast<std::size_t>(i)];
                if (f.tag >= 0) dw1t.row(f.tag) += dz.row(i);
                if (f.attr >= 0) dw1t.row(kAttrOffset + f.attr) += dz.row(i);
                if (f.chr >= 0) dw1t.row(kCharOffset + f.chr) += dz.row(i);
            }
            grads.W1 += dw1t.transpose();
        }
    }
}

template <class T>
NormalizeState<T> normalize_embeddings(const Matrix<T>& pooled, const ModelParams<T>& params, Mode mode) {
    NormalizeState<T> s;
    s.mode = mode;
    s.norms = pooled.rowwise().norm();
    if (mode == Mode::Train) {
        if (pooled.rows() < 2) throw DegenerateBatch("soft normalization needs at least two embeddings");
        const auto n = static_cast<T>(pooled.rows());
        s.mean = s.norms.sum() / n;
        s.stddev = std::sqrt((s.norms.array() - s.mean).square().sum() / n);
    } else {
        s.mean = params.norm.running_norm_mean;
        s.stddev = params.norm.running_norm_std;
    }
    T denom = s.mean + s.stddev;
    if (!(denom >= T(1e-12))) throw DegenerateBatch("mean plus std of embedding norms is zero");
    s.scale = T(1) / denom;
    s.output = pooled * s.scale;
    return s;
}

template <class T>
void update_norm_stats(ModelParams<T>& params, const NormalizeState<T>& state) {
    if (state.mode != Mode::Train) return;
    auto& ns = params.norm;
    ns.running_norm_mean = (1 - ns.momentum) * ns.running_norm_mean + ns.momentum * state.mean;
    ns.running_norm_std = (1 - ns.momentum) * ns.running_norm_std + ns.momentum * state.stddev;
}

template <class T>
Matrix<T> normalize_embeddings_backward(const Matrix<T>& pooled, const NormalizeState<T>& state,
                                        const Matrix<T>& d_output) {
    Matrix<T> dv = d_output * state.scale;
    if (state.mode == Mode::Eval) return dv;
    const auto n = static_cast<T>(pooled.rows());
    T coeff = -(d_output.array() * pooled.array()).sum() * state.scale * state.scale;
    for (Eigen::Index b = 0; b < pooled.rows(); ++b) {
        T nb = state.norms(b);
        if (nb <= T(0)) continue;
        T ds_dn = T(1) / n;
        if (state.stddev > T(0)) ds_dn += (nb - state.mean) / (n * state.stddev);
        dv.row(b) += (coeff * ds_dn / nb) * pooled.row(b);
    }
    return dv;
}

template <class T>
Matrix<T> unit_normalize(const Matrix<T>& x) {
    Matrix<T> y = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        T n = x.row(i).norm();
        if (n > T(0)) y.row(i) /= n;
    }
    return y;
}

template <class T>
Matrix<T> unit_normalize_backward(const Matrix<T>& x, const Matrix<T>& d_output) {
    Matrix<T> dx = Matrix<T>::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        T n = x.row(i).norm();
        if (n <= T(0)) continue;
        auto y = (x.row(i) / n).eval();
        T dot = y.dot(d_output.row(i));
        dx.row(i) = (d_output.row(i) - dot * y) / n;
    }
    return dx;
}

template <class T>
HeadLogits<T> head_logits(const Matrix<T>& phi_rows, const ModelParams<T>& params) {
    HeadLogits<T> h;
    h.tag = phi_rows * params.Wtag.transpose();
    add_row_bias(h.tag, params.btag);
    h.attr = phi_rows * params.Wattr.transpose();
    add_row_bias(h.attr, params.battr);
    h.chr = phi_rows * params.Wchar.transpose();
    add_row_bias(h.chr, params.bchar);
    return h;
}

template <class T>
Matrix<T> head_backward(const Matrix<T>& phi_rows, const HeadLogits<T>& d, const ModelParams<T>& params,
                        ModelParams<T>& grads) {
    grads.Wtag += d.tag.transpose() * phi_rows;
    grads.btag += d.tag.colwise().sum().transpose();
    grads.Wattr += d.attr.transpose() * phi_rows;
    grads.battr += d.attr.colwise().sum().transpose();
    grads.Wchar += d.chr.transpose() * phi_rows;
    grads.bchar += d.chr.colwise().sum().transpose();
    return d.tag * params.Wtag + d.attr * params.Wattr + d.chr * params.Wchar;
}

namespace {

template <class T>
std::vector<double> softmax_row(const Matrix<T>& logits) {
    std::vector<double> p(static_cast<std::size_t>(logits.cols()));
    double mx = static_cast<double>(logits.maxCoeff());
    double total = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        p[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(logits(0, c)) - mx);
        total += p[static_cast<std::size_t>(c)];
    }
    for (auto& v : p) v /= total;
    return p;
}

template <class T>
HeadDistributions predict_masked_impl(const Vector<T>& phi_row, const ModelParams<T>& params) {
    if (phi_row.size() != kHiddenDim) throw DimensionMismatch("phi row must have 512 entries");
    Matrix<T> row = phi_row.transpose();
    auto logits = head_logits(row, params);
    return {softmax_row(logits.tag), softmax_row(logits.attr), softmax_row(logits.chr)};
}

}  // namespace

HeadDistributions predict_masked(const Vector<double>& phi_row, const ModelParams<double>& params) {
    return predict_masked_impl(phi_row, params);
}

HeadDistributions predict_masked(const Vector<float>& phi_row, const ModelParams<float>& params) {
    return predict_masked_impl(phi_row, params);
}

template <class T>
Vector<T> embed_graph(const ExpressionGraph& graph, const ModelParams<T>& params, bool unit_norm) {
    PackedBatch b = pack_graphs(std::vector<const ExpressionGraph*>{&graph});
    auto state = forward(b, params, Mode::Eval);
    auto normed = normalize_embeddings(state.pooled, params, Mode::Eval);
    Vector<T> v = normed.output.row(0).transpose();
    if (unit_norm) {
        T n = v.norm();
        if (n > T(0)) v /= n;
    }
    return v;
}

template <class T>
Matrix<T> embed_graphs(const std::vector<ExpressionGraph>& graphs, const ModelParams<T>& params, bool unit_norm) {
    Matrix<T> out(static_cast<Eigen::Index>(graphs.size()), kEmbeddingDim);
    for (std::size_t i = 0; i < graphs.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = embed_graph(graphs[i], params, unit_norm).transpose();
    return out;
}

#define EQSEARCH_INSTANTIATE(T)                                                                                     \
    template ForwardState<T> forward(const PackedBatch&, const ModelParams<T>&, Mode);                            \
    template void update_running_stats(ModelParams<T>&, const ForwardState<T>&);                                  \
    template void backward(const PackedBatch&, const ModelParams<T>&, const ForwardState<T>&, const Matrix<T>&,   \
                           const Matrix<T>*, ModelParams<T>&);                                                    \
    template NormalizeState<T> normalize_embeddings(const Matrix<T>&, const ModelParams<T>&, Mode);               \
    template void update_norm_stats(ModelParams<T>&, const NormalizeState<T>&);                                   \
    template Matrix<T> normalize_embeddings_backward(const Matrix<T>&, const NormalizeState<T>&, const Matrix<T>&); \
    template Matrix<T> unit_normalize(const Matrix<T>&);                                                          \
    template Matrix<T> unit_normalize_backward(const Matrix<T>&, const Matrix<T>&);                               \
    template HeadLogits<T> head_logits(const Matrix<T>&, const ModelParams<T>&);                                  \
    template Matrix<T> head_backward(const Matrix<T>&, const HeadLogits<T>&, const ModelParams<T>&,               \
                                     ModelParams<T>&);                                                            \
    template Vector<T> embed_graph(const ExpressionGraph&, const ModelParams<T>&, bool);                          \
    template Matrix<T> embed_graphs(const std::vector<ExpressionGraph>&, const ModelParams<T>&, bool);

EQSEARCH_INSTANTIATE(float)
EQSEARCH_INSTANTIATE(double)

#undef EQSEARCH_INSTANTIATE

}  // namespace eqsearch
