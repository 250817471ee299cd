#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqsearch/checkpoint.hpp"
#include "eqsearch/corpus.hpp"
#include "eqsearch/embedding_store.hpp"
#include "eqsearch/rptree.hpp"

namespace eqsearch {

inline constexpr std::size_t kMaxResults = 1000;

struct SearchResult {
    std::string eq_id;
    std::string paper_id;
    int section_index = 0;
    double score = 0;
    std::string latex;
    std::string mathml;
};

nlohmann::json to_json(const SearchResult& result);
nlohmann::json to_json(const EquationRecord& record);

// Queries starting with '<' (after whitespace) are treated as MathML.
bool is_mathml_query(std::string_view query);

// Query-time pipeline over immutable artifacts: compile (LaTeX) -> encode ->
// eval-mode embed -> index or exact query. Safe for concurrent reads.
class SearchEngine {
public:
    // Throws InvalidArgument when the store was embedded with another model,
    // a stored id is missing from the corpus or the index size differs.
    SearchEngine(Corpus corpus, Checkpoint checkpoint, EmbeddingStore store,
                 std::optional<RpTreeIndex> index = std::nullopt);

    // SyntaxError / MalformedXml for unparseable queries.
    Vector<float> embed_query(std::string_view query) const;

    // k in [1, 1000], otherwise InvalidArgument.
    std::vector<SearchResult> search(std::string_view query, std::size_t k) const;
    std::vector<SearchResult> search_vector(const Vector<float>& q, std::size_t k) const;

    const EquationRecord* equation(const std::string& eq_id) const { return corpus_.find_equation(eq_id); }
    std::size_t size() const noexcept { return store_.size(); }
    const Corpus& corpus() const noexcept { return corpus_; }
    const EmbeddingStore& store() const noexcept { return store_; }
    bool has_index() const noexcept { return index_.has_value(); }
    // Throws InvalidArgument when the index size differs from the store.
    void attach_index(RpTreeIndex index);

private:
    Corpus corpus_;
    Checkpoint checkpoint_;
    EmbeddingStore store_;
    std::optional<RpTreeIndex> index_;
};

// Stores smaller than this are scanned exhaustively unless an index is
// requested explicitly.
inline constexpr std::size_t kExactScanLimit = 100000;

// Loads corpus, checkpoint, store and optional index from disk.
SearchEngine load_search_engine(const std::filesystem::path& corpus_dir, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& store,
                                const std::optional<std::filesystem::path>& index = std::nullopt);

struct KeywordQuery {
    std::string query;
    std::vector<std::string> keywords;
};

// JSON Lines {"query": latex, "keywords": [...]}.
std::vector<KeywordQuery> load_queries(const std::filesystem::path& path);

struct QueryScores {
    std::string query;
    double p10 = 0, p100 = 0, p1000 = 0, umap = 0;
    std::size_t relevant = 0;  // relevant results among the top 1000
};

struct QueryReport {
    double p10 = 0, p100 = 0, p1000 = 0, umap = 0;  // means over queries
    std::vector<QueryScores> per_query;
    nlohmann::json to_json() const;
};

// A result is relevant when its section text matches the query's keywords.
std::vector<bool> judge_results(const Corpus& corpus, const std::vector<SearchResult>& results,
                                const std::vector<std::string>& keywords);

QueryReport evaluate_queries(const SearchEngine& engine, const std::vector<KeywordQuery>& queries);

}  // namespace eqsearch
