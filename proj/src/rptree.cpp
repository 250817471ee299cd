#include "eqsearch/rptree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"

namespace eqsearch {

namespace {

constexpr char kIndexMagic[8] = {'E', 'Q', 'R', 'P', 'T', 'R', 'E', '1'};
constexpr int kSplitAttempts = 8;

template <class U>
void put(std::ostream& out, U v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& in) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw InvalidArgument("truncated index file");
    return v;
}

template <class U>
void put_array(std::ostream& out, const std::vector<U>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(U)));
}

template <class U>
void get_array(std::istream& in, std::vector<U>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(U)));
    if (!in) throw InvalidArgument("truncated index file");
}

}  // namespace

RpTreeIndex RpTreeIndex::build(const EmbeddingStore& store, const RpTreeConfig& config) {
    if (config.trees < 1 || config.leaf_size < 1) throw InvalidArgument("index needs trees >= 1 and leaf_size >= 1");
    RpTreeIndex idx;
    idx.config_ = config;
    idx.n_ = store.size();
    idx.unit_ = store.metric() == Similarity::Cosine;
    idx.augmented_ = !idx.unit_;
    const auto d = store.dim();
    idx.dim_ = static_cast<int>(d + (idx.augmented_ ? 1 : 0));

    Matrix<float> points = Matrix<float>::Zero(static_cast<Eigen::Index>(idx.n_), idx.dim_);
    const auto& v = store.vectors();
    if (idx.augmented_) {
        double max_sq = 0;
        for (Eigen::Index i = 0; i < v.rows(); ++i) max_sq = std::max(max_sq, v.row(i).cast<double>().squaredNorm());
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            points.row(i).head(d) = v.row(i);
            points(i, d) = static_cast<float>(std::sqrt(std::max(0.0, max_sq - v.row(i).cast<double>().squaredNorm())));
        }
    } else {
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            double n = v.row(i).cast<double>().norm();
            if (n > 0) points.row(i) = (v.row(i).cast<double>() / n).cast<float>();
        }
    }

    std::uint64_t state = config.seed;
    for (int t = 0; t < config.trees; ++t) {
        auto base = static_cast<std::uint32_t>(idx.items_.size());
        for (std::size_t i = 0; i < idx.n_; ++i) idx.items_.push_back(static_cast<std::uint32_t>(i));
        idx.roots_.push_back(static_cast<std::int32_t>(idx.nodes_.size()));
        idx.build_tree(points, idx.items_, base, base + static_cast<std::uint32_t>(idx.n_), state);
    }
    return idx;
}

void RpTreeIndex::build_tree(const Matrix<float>& points, std::vector<std::uint32_t>& items, std::uint32_t lo,
                             std::uint32_t hi, std::uint64_t& state) {
    auto self = static_cast<std::size_t>(nodes_.size());
    nodes_.push_back({});
    normals_.resize(normals_.size() + static_cast<std::size_t>(dim_), 0.0f);
    if (hi - lo <= static_cast<std::uint32_t>(config_.leaf_size)) {
        nodes_[self].begin = lo;
        nodes_[self].end = hi;
        return;
    }

    std::mt19937_64 rng(state);
    state = rng();
    std::uniform_int_distribution<std::uint32_t> pick(lo, hi - 1);
    Eigen::Map<Vector<float>> normal(normals_.data() + self * static_cast<std::size_t>(dim_), dim_);
    std::uint32_t mid = lo;
    bool split = false;
    for (int attempt = 0; attempt < kSplitAttempts && !split; ++attempt) {
        std::uint32_t a = items[pick(rng)];
        std::uint32_t b = items[pick(rng)];
        Vector<float> diff = (points.row(a) - points.row(b)).transpose();
        float len = diff.norm();
        if (!(len > 0)) continue;
        normal = diff / len;
        float offset = normal.dot(((points.row(a) + points.row(b)) * 0.5f).transpose());
        auto it = std::partition(items.begin() + lo, items.begin() + hi, [&](std::uint32_t i) {
            return points.row(i).dot(normal.transpose()) - offset <= 0.0f;
        });
        mid = static_cast<std::uint32_t>(it - items.begin());
        split = mid != lo && mid != hi;
        if (split) nodes_[self].offset = offset;
    }
    if (!split) {
        // Coincident points: split the range in half with a zero hyperplane.
        normal.setZero();
        std::shuffle(items.begin() + lo, items.begin() + hi, rng);
        mid = lo + (hi - lo) / 2;
        nodes_[self].offset = 0.0f;
    }
    auto left = static_cast<std::int32_t>(nodes_.size());
    build_tree(points, items, lo, mid, state);
    auto right = static_cast<std::int32_t>(nodes_.size());
    build_tree(points, items, mid, hi, state);
    nodes_[self].left = left;
    nodes_[self].right = right;
}

Vector<float> RpTreeIndex::transform_query(const Vector<float>& q) const {
    Vector<float> out = Vector<float>::Zero(dim_);
    if (augmented_) {
        out.head(q.size()) = q;
    } else {
        double n = q.cast<double>().norm();
        if (n > 0) out = (q.cast<double>() / n).cast<float>();
    }
    return out;
}

std::vector<SearchHit> RpTreeIndex::query(const EmbeddingStore& store, const Vector<float>& q, std::size_t k,
                                          std::size_t search_budget) const {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    if (store.size() != n_) throw DimensionMismatch("index was built over a store of a different size");
    if (q.size() + (augmented_ ? 1 : 0) != dim_) throw DimensionMismatch("query dimension does not match the index");
    std::size_t budget = search_budget ? search_budget : 16 * k * static_cast<std::size_t>(config_.leaf_size);
    Vector<float> qt = transform_query(q);

    std::priority_queue<std::pair<float, std::int32_t>> pq;
    for (std::int32_t r : roots_) pq.emplace(std::numeric_limits<float>::infinity(), r);
    std::vector<char> seen(n_, 0);
    std::vector<std::size_t> candidates;
    while (!pq.empty() && candidates.size() < budget) {
        auto [priority, id] = pq.top();
        pq.pop();
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                std::uint32_t item = items_[i];
                if (!seen[item]) {
                    seen[item] = 1;
                    candidates.push_back(item);
                }
            }
            continue;
        }
        Eigen::Map<const Vector<float>> normal(normals_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(dim_),
                                               dim_);
        float margin = normal.dot(qt) - node.offset;
        pq.emplace(std::min(priority, margin), node.right);
        pq.emplace(std::min(priority, -margin), node.left);
    }
    return store.rank_rows(q, std::move(candidates), k);
}

std::vector<std::size_t> RpTreeIndex::leaf_items(std::size_t tree) const {
    std::vector<std::size_t> out;
    std::vector<std::int32_t> stack{roots_.at(tree)};
    while (!stack.empty()) {
        const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (node.left < 0) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) out.push_back(items_[i]);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return out;
}

void RpTreeIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    nlohmann::json header = {{"trees", config_.trees}, {"leaf_size", config_.leaf_size}, {"seed", config_.seed},
                             {"n", n_},                {"dim", dim_},                    {"augmented", augmented_},
                             {"unit", unit_},          {"nodes", nodes_.size()},         {"items", items_.size()}};
    std::string text = header.dump();
    out.write(kIndexMagic, sizeof kIndexMagic);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& node : nodes_) {
        put(out, node.left);
        put(out, node.right);
        put(out, node.begin);
        put(out, node.end);
        put(out, node.offset);
    }
    put_array(out, normals_);
    put_array(out, items_);
    put_array(out, roots_);
    if (!out) throw InvalidArgument("failed writing " + path.string());
}

RpTreeIndex RpTreeIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    char magic[sizeof kIndexMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kIndexMagic, sizeof kIndexMagic) != 0)
        throw InvalidArgument(path.string() + " is not an RP-tree index");
    auto len = get<std::uint64_t>(in);
    if (len > (1u << 20)) throw InvalidArgument("corrupt index header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw InvalidArgument("truncated index file");
    RpTreeIndex idx;
    std::size_t n_nodes = 0, n_items = 0;
    try {
        auto h = nlohmann::json::parse(text);
        idx.config_.trees = h.at("trees").get<int>();
        idx.config_.leaf_size = h.at("leaf_size").get<int>();
        idx.config_.seed = h.at("seed").get<std::uint64_t>();
        idx.n_ = h.at("n").get<std::size_t>();
        idx.dim_ = h.at("dim").get<int>();
        idx.augmented_ = h.at("augmented").get<bool>();
        idx.unit_ = h.at("unit").get<bool>();
        n_nodes = h.at("nodes").get<std::size_t>();
        n_items = h.at("items").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad index header: ") + e.what());
    }
    idx.nodes_.resize(n_nodes);
    for (auto& node : idx.nodes_) {
        node.left = get<std::int32_t>(in);
        node.right = get<std::int32_t>(in);
        node.begin = get<std::uint32_t>(in);
        node.end = get<std::uint32_t>(in);
        node.offset = get<float>(in);
    }
    get_array(in, idx.normals_, n_nodes * static_cast<std::size_t>(idx.dim_));
    get_array(in, idx.items_, n_items);
    get_array(in, idx.roots_, static_cast<std::size_t>(idx.config_.trees));
    for (const auto& node : idx.nodes_) {
        bool bad_child = node.left >= static_cast<std::int32_t>(n_nodes) || node.right >= static_cast<std::int32_t>(n_nodes);
        if (bad_child || node.end > n_items || node.begin > node.end) throw InvalidArgument("corrupt index nodes");
    }
    for (auto item : idx.items_)
        if (item >= idx.n_) throw InvalidArgument("corrupt index items");
    return idx;
}

}  // namespace eqsearch
