#include "eqsearch/search_engine.hpp"

#include <fstream>

#include "eqsearch/encoder.hpp"
#include "eqsearch/error.hpp"
#include "eqsearch/expression_graph.hpp"
#include "eqsearch/latex_compiler.hpp"
#include "eqsearch/metrics.hpp"

namespace eqsearch {

nlohmann::json to_json(const SearchResult& r) {
    return {{"eq_id", r.eq_id},   {"paper_id", r.paper_id}, {"section_index", r.section_index},
            {"score", r.score},   {"latex", r.latex},       {"mathml", r.mathml}};
}

nlohmann::json to_json(const EquationRecord& r) {
    return {{"eq_id", r.eq_id}, {"paper_id", r.paper_id}, {"section_index", r.section_index},
            {"latex", r.latex}, {"mathml", r.mathml}};
}

bool is_mathml_query(std::string_view query) {
    auto pos = query.find_first_not_of(" \t\r\n");
    return pos != std::string_view::npos && query[pos] == '<';
}

SearchEngine::SearchEngine(Corpus corpus, Checkpoint checkpoint, EmbeddingStore store, std::optional<RpTreeIndex> index)
    : corpus_(std::move(corpus)), checkpoint_(std::move(checkpoint)), store_(std::move(store)), index_(std::move(index)) {
    if (store_.model_hash() != model_hash(checkpoint_))
        throw InvalidArgument("store model hash " + store_.model_hash() + " does not match checkpoint " +
                              model_hash(checkpoint_));
    if (store_.dim() != kEmbeddingDim) throw DimensionMismatch("store dimension is not the embedding dimension");
    for (const auto& id : store_.ids())
        if (!corpus_.find_equation(id)) throw InvalidArgument("store id '" + id + "' is not in the corpus");
    if (index_) {
        auto idx = std::move(*index_);
        index_.reset();
        attach_index(std::move(idx));
    }
}

void SearchEngine::attach_index(RpTreeIndex index) {
    if (index.size() != store_.size())
        throw InvalidArgument("index covers " + std::to_string(index.size()) + " rows, store has " +
                              std::to_string(store_.size()));
    index_ = std::move(index);
}

Vector<float> SearchEngine::embed_query(std::string_view query) const {
    std::string mathml = is_mathml_query(query) ? std::string(query) : compile_latex_subset(query);
    auto graph = encode(mathml, checkpoint_.vocab);
    return embed_graph(graph, checkpoint_.params, checkpoint_.similarity == Similarity::Cosine);
}

std::vector<SearchResult> SearchEngine::search_vector(const Vector<float>& q, std::size_t k) const {
    if (k < 1 || k > kMaxResults) throw InvalidArgument("k must be in [1, 1000], got " + std::to_string(k));
    auto hits = index_ ? index_->query(store_, q, k) : store_.query_exact(q, k);
    std::vector<SearchResult> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
        const auto* eq = corpus_.find_equation(h.eq_id);
        out.push_back({eq->eq_id, eq->paper_id, eq->section_index, h.score, eq->latex, eq->mathml});
    }
    return out;
}

std::vector<SearchResult> SearchEngine::search(std::string_view query, std::size_t k) const {
    if (k < 1 || k > kMaxResults) throw InvalidArgument("k must be in [1, 1000], got " + std::to_string(k));
    return search_vector(embed_query(query), k);
}

SearchEngine load_search_engine(const std::filesystem::path& corpus_dir, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& store, const std::optional<std::filesystem::path>& index) {
    std::optional<RpTreeIndex> idx;
    if (index) idx = RpTreeIndex::load(*index);
    return SearchEngine(load_corpus(corpus_dir), load_checkpoint(checkpoint), load_store(store), std::move(idx));
}

std::vector<KeywordQuery> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::vector<KeywordQuery> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            KeywordQuery q;
            q.query = j.at("query").get<std::string>();
            q.keywords = j.at("keywords").get<std::vector<std::string>>();
            out.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<bool> judge_results(const Corpus& corpus, const std::vector<SearchResult>& results,
                                const std::vector<std::string>& keywords) {
    std::vector<bool> rel;
    rel.reserve(results.size());
    for (const auto& r : results) {
        const auto* paper = corpus.find_paper(r.paper_id);
        auto s = static_cast<std::size_t>(r.section_index);
        bool ok = paper && s < paper->section_texts.size() && keyword_relevant(paper->section_texts[s], keywords);
        rel.push_back(ok);
    }
    return rel;
}

QueryReport evaluate_queries(const SearchEngine& engine, const std::vector<KeywordQuery>& queries) {
    if (queries.empty()) throw InvalidArgument("no queries to evaluate");
    QueryReport report;
    for (const auto& q : queries) {
        auto results = engine.search(q.query, std::min(kUmapHorizon, std::max<std::size_t>(1, engine.size())));
        auto rel = judge_results(engine.corpus(), results, q.keywords);
        QueryScores s;
        s.query = q.query;
        s.p10 = precision_at_k(rel, 10);
        s.p100 = precision_at_k(rel, 100);
        s.p1000 = precision_at_k(rel, 1000);
        s.umap = umap(rel);
        for (bool b : rel) s.relevant += b;
        report.p10 += s.p10;
        report.p100 += s.p100;
        report.p1000 += s.p1000;
        report.umap += s.umap;
        report.per_query.push_back(std::move(s));
    }
    auto n = static_cast<double>(queries.size());
    report.p10 /= n;
    report.p100 /= n;
    report.p1000 /= n;
    report.umap /= n;
    return report;
}

nlohmann::json QueryReport::to_json() const {
    nlohmann::json pq = nlohmann::json::array();
    for (const auto& s : per_query)
        pq.push_back({{"query", s.query}, {"p10", s.p10}, {"p100", s.p100}, {"p1000", s.p1000}, {"umap", s.umap},
                      {"relevant", s.relevant}});
    return {{"p10", p10}, {"p100", p100}, {"p1000", p1000}, {"umap", umap}, {"per_query", pq}};
}

}  // namespace eqsearch
