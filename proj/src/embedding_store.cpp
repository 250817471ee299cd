#include "eqsearch/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "eqsearch/encoder.hpp"
#include "eqsearch/error.hpp"

namespace eqsearch {

static_assert(std::endian::native == std::endian::little, "store I/O assumes a little-endian host");

EmbeddingStore::EmbeddingStore(std::vector<std::string> ids, Matrix<float> vectors, std::string model_hash,
                               Similarity metric)
    : ids_(std::move(ids)), vectors_(std::move(vectors)), model_hash_(std::move(model_hash)), metric_(metric) {
    if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows())
        throw InvalidArgument("store has " + std::to_string(ids_.size()) + " ids but " +
                              std::to_string(vectors_.rows()) + " rows");
    if (!vectors_.allFinite()) throw InvalidArgument("store vectors must be finite");
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (!rows_.emplace(ids_[i], i).second) throw InvalidArgument("duplicate id '" + ids_[i] + "' in store");
    inv_norms_.resize(ids_.size(), 1.0);
    if (metric_ == Similarity::Cosine) {
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            double n = vectors_.row(static_cast<Eigen::Index>(i)).cast<double>().norm();
            inv_norms_[i] = n > 0 ? 1.0 / n : 0.0;
        }
    }
}

std::optional<std::size_t> EmbeddingStore::row_of(const std::string& eq_id) const {
    auto it = rows_.find(eq_id);
    if (it == rows_.end()) return std::nullopt;
    return it->second;
}

double EmbeddingStore::score(std::size_t row, const Vector<float>& q) const {
    const float* v = vectors_.data() + static_cast<Eigen::Index>(row) * vectors_.cols();
    double s = 0;
    for (Eigen::Index c = 0; c < vectors_.cols(); ++c) s += static_cast<double>(v[c]) * static_cast<double>(q[c]);
    return s * inv_norms_[row];
}

namespace {

struct Ranked {
    double score;
    std::size_t row;
};

std::vector<SearchHit> top_k(std::vector<Ranked>& items, std::size_t k, const std::vector<std::string>& ids) {
    k = std::min(k, items.size());
    auto better = [&ids](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        return ids[a.row] < ids[b.row];
    };
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), better);
    std::vector<SearchHit> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back({ids[items[i].row], items[i].row, items[i].score});
    return out;
}

}  // namespace

std::vector<SearchHit> EmbeddingStore::query_exact(const Vector<float>& q, std::size_t k,
                                                   std::optional<std::size_t> exclude_row) const {
    if (k == 0) throw InvalidArgument("k must be at least 1");
    if (q.size() != dim()) throw DimensionMismatch("query has dimension " + std::to_string(q.size()) + ", store " +
                                                   std::to_string(dim()));
    Vector<float> qq = q;
    if (metric_ == Similarity::Cosine) {
        double n = q.cast<double>().norm();
        if (n > 0) qq = (q.cast<double>() / n).cast<float>();
    }
    std::vector<Ranked> items;
    items.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (exclude_row && *exclude_row == i) continue;
        items.push_back({score(i, qq), i});
    }
    return top_k(items, k, ids_);
}

std::vector<SearchHit> EmbeddingStore::rank_rows(const Vector<float>& q, std::vector<std::size_t> rows,
                                                 std::size_t k) const {
    if (q.size() != dim()) throw DimensionMismatch("query dimension does not match the store");
    Vector<float> qq = q;
    if (metric_ == Similarity::Cosine) {
        double n = q.cast<double>().norm();
        if (n > 0) qq = (q.cast<double>() / n).cast<float>();
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    std::vector<Ranked> items;
    items.reserve(rows.size());
    for (std::size_t r : rows) items.push_back({score(r, qq), r});
    return top_k(items, k, ids_);
}

EmbeddingStore embed_corpus(const Corpus& corpus, const Checkpoint& checkpoint, const Vocabulary* expected) {
    if (expected && expected->hash() != checkpoint.vocab.hash())
        throw VocabularyMismatch("vocabulary " + expected->hash() + " does not match checkpoint vocabulary " +
                                 checkpoint.vocab.hash());
    std::vector<std::string> ids;
    Matrix<float> vectors(static_cast<Eigen::Index>(corpus.size()), kEmbeddingDim);
    const bool unit = checkpoint.similarity == Similarity::Cosine;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& eq = corpus.equations()[i];
        ids.push_back(eq.eq_id);
        auto g = encode(eq.mathml, checkpoint.vocab);
        vectors.row(static_cast<Eigen::Index>(i)) = embed_graph(g, checkpoint.params, unit).transpose();
    }
    return EmbeddingStore(std::move(ids), std::move(vectors), model_hash(checkpoint), checkpoint.similarity);
}

Vector<float> bow_embed(const ExpressionGraph& graph) {
    Vector<float> v = Vector<float>::Zero(kFeatureDim);
    for (const auto& f : graph.features) {
        if (f.tag >= 0) v[f.tag] += 1.0f;
        if (f.attr >= 0) v[kAttrOffset + f.attr] += 1.0f;
        if (f.chr >= 0) v[kCharOffset + f.chr] += 1.0f;
    }
    return v;
}

std::string bow_model_hash(const Vocabulary& vocab) {
    return "bow-" + vocab.hash();
}

EmbeddingStore bow_store(const Corpus& corpus, const Vocabulary& vocab) {
    std::vector<std::string> ids;
    Matrix<float> vectors(static_cast<Eigen::Index>(corpus.size()), kFeatureDim);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& eq = corpus.equations()[i];
        ids.push_back(eq.eq_id);
        vectors.row(static_cast<Eigen::Index>(i)) = bow_embed(encode(eq.mathml, vocab)).transpose();
    }
    return EmbeddingStore(std::move(ids), std::move(vectors), bow_model_hash(vocab), Similarity::Cosine);
}

namespace {

constexpr char kStoreMagic[8] = {'E', 'Q', 'S', 'T', 'O', 'R', 'E', '1'};

template <class U>
void put(std::ostream& out, U v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& in) {
    U v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw InvalidArgument("truncated store file");
    return v;
}

}  // namespace

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    nlohmann::json header = {{"n", store.size()},
                             {"dim", store.dim()},
                             {"model_hash", store.model_hash()},
                             {"metric", similarity_name(store.metric())}};
    std::string text = header.dump();
    out.write(kStoreMagic, sizeof kStoreMagic);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(store.vectors().data()),
              static_cast<std::streamsize>(store.vectors().size() * static_cast<Eigen::Index>(sizeof(float))));
    for (const auto& id : store.ids()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!out) throw InvalidArgument("failed writing " + path.string());
}

EmbeddingStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    char magic[sizeof kStoreMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kStoreMagic, sizeof kStoreMagic) != 0)
        throw InvalidArgument(path.string() + " is not an embedding store");
    auto len = get<std::uint64_t>(in);
    if (len > (1u << 20)) throw InvalidArgument("corrupt store header");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw InvalidArgument("truncated store file");
    std::size_t n = 0;
    Eigen::Index dim = 0;
    std::string hash;
    Similarity metric;
    try {
        auto h = nlohmann::json::parse(text);
        n = h.at("n").get<std::size_t>();
        dim = h.at("dim").get<Eigen::Index>();
        hash = h.at("model_hash").get<std::string>();
        metric = parse_similarity(h.at("metric").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad store header: ") + e.what());
    }
    Matrix<float> vectors(static_cast<Eigen::Index>(n), dim);
    in.read(reinterpret_cast<char*>(vectors.data()),
            static_cast<std::streamsize>(vectors.size() * static_cast<Eigen::Index>(sizeof(float))));
    if (!in) throw InvalidArgument("truncated store rows");
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto l = get<std::uint32_t>(in);
        std::string id(l, '\0');
        in.read(id.data(), l);
        if (!in) throw InvalidArgument("truncated store id table");
        ids.push_back(std::move(id));
    }
    return EmbeddingStore(std::move(ids), std::move(vectors), std::move(hash), metric);
}

}  // namespace eqsearch
