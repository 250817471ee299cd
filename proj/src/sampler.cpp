#include "eqsearch/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"

namespace eqsearch {

const char* method_name(PositiveMethod m) {
    switch (m) {
        case PositiveMethod::SameSection: return "SAME_SECTION";
        case PositiveMethod::SamePaper: return "SAME_PAPER";
        case PositiveMethod::Citation: return "CITATION";
    }
    return "?";
}

PositiveMethod parse_method(const std::string& name) {
    if (name == "SAME_SECTION") return PositiveMethod::SameSection;
    if (name == "SAME_PAPER") return PositiveMethod::SamePaper;
    if (name == "CITATION") return PositiveMethod::Citation;
    throw InvalidArgument("unknown triplet method '" + name + "'");
}

TripletSampler::TripletSampler(const Corpus& corpus) : corpus_(&corpus) {
    const auto& papers = corpus.papers();
    const auto& eqs = corpus.equations();
    eq_paper_.resize(eqs.size());
    paper_eqs_.resize(papers.size());
    section_peers_.resize(eqs.size());

    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> sections;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        std::size_t p = corpus.paper_index(eqs[i].paper_id);
        eq_paper_[i] = p;
        paper_eqs_[p].push_back(i);
        sections[{p, eqs[i].section_index}].push_back(i);
    }
    for (const auto& [key, members] : sections)
        for (std::size_t i : members) section_peers_[i] = members;

    cited_.resize(papers.size());
    for (const auto& [from, to] : corpus.citation_edges()) {
        std::size_t a = corpus.paper_index(from);
        std::size_t b = corpus.paper_index(to);
        if (a == b) continue;
        cited_[a].push_back(b);
        cited_[b].push_back(a);
    }
    cited_eq_count_.resize(papers.size());
    for (std::size_t p = 0; p < papers.size(); ++p) {
        auto& list = cited_[p];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        for (std::size_t q : list) cited_eq_count_[p] += paper_eqs_[q].size();
    }
    if (eqs.empty()) throw EmptyCorpus();
}

TripletSample TripletSampler::sample(std::mt19937_64& rng, std::optional<PositiveMethod> forced) const {
    const std::size_t n_papers = paper_eqs_.size();
    auto uniform = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

    for (int attempt = 0; attempt < kMaxSampleRestarts; ++attempt) {
        std::size_t pa = uniform(n_papers);
        const auto& own = paper_eqs_[pa];
        if (own.empty()) continue;
        std::size_t a = own[uniform(own.size())];
        auto method = forced ? *forced : static_cast<PositiveMethod>(uniform(3));

        std::optional<std::size_t> pos;
        switch (method) {
            case PositiveMethod::SameSection:
            case PositiveMethod::SamePaper: {
                const auto& pool = method == PositiveMethod::SameSection ? section_peers_[a] : own;
                if (pool.size() < 2) break;
                std::size_t k = uniform(pool.size() - 1);
                auto self = static_cast<std::size_t>(std::find(pool.begin(), pool.end(), a) - pool.begin());
                pos = pool[k >= self ? k + 1 : k];
                break;
            }
            case PositiveMethod::Citation: {
                std::size_t total = cited_eq_count_[pa];
                if (total == 0) break;
                std::size_t k = uniform(total);
                for (std::size_t q : cited_[pa]) {
                    if (k < paper_eqs_[q].size()) {
                        pos = paper_eqs_[q][k];
                        break;
                    }
                    k -= paper_eqs_[q].size();
                }
                break;
            }
        }
        if (!pos) continue;

        std::size_t neg_paper;
        do neg_paper = uniform(n_papers);
        while (paper_eqs_[neg_paper].empty());
        const auto& neg_pool = paper_eqs_[neg_paper];
        return {a, *pos, neg_pool[uniform(neg_pool.size())], method};
    }
    throw ExhaustedRetries("no valid positive found after " + std::to_string(kMaxSampleRestarts) + " restarts");
}

bool TripletSampler::satisfies(PositiveMethod method, std::size_t anchor, std::size_t positive) const {
    if (anchor == positive) return false;
    const auto& eqs = corpus_->equations();
    switch (method) {
        case PositiveMethod::SameSection:
            return eq_paper_[anchor] == eq_paper_[positive] &&
                   eqs[anchor].section_index == eqs[positive].section_index;
        case PositiveMethod::SamePaper: return eq_paper_[anchor] == eq_paper_[positive];
        case PositiveMethod::Citation: {
            const auto& list = cited_[eq_paper_[anchor]];
            return std::binary_search(list.begin(), list.end(), eq_paper_[positive]);
        }
    }
    return false;
}

bool TripletSampler::related(std::size_t a, std::size_t b) const {
    return satisfies(PositiveMethod::SamePaper, a, b) || satisfies(PositiveMethod::Citation, a, b);
}

std::vector<TripletSample> materialize_triplets(const TripletSampler& sampler, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<TripletSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.sample(rng));
    return out;
}

void save_triplets(const Corpus& corpus, const std::vector<TripletSample>& triplets, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    const auto& eqs = corpus.equations();
    for (const auto& t : triplets) {
        nlohmann::json rec = {{"anchor", eqs[t.anchor].eq_id},
                              {"positive", eqs[t.positive].eq_id},
                              {"negative", eqs[t.negative].eq_id},
                              {"method", method_name(t.method)}};
        out << rec.dump() << '\n';
    }
}

std::vector<TripletSample> load_triplets(const Corpus& corpus, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::vector<TripletSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({corpus.equation_index(j.at("anchor").get<std::string>()),
                           corpus.equation_index(j.at("positive").get<std::string>()),
                           corpus.equation_index(j.at("negative").get<std::string>()),
                           parse_method(j.at("method").get<std::string>())});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace eqsearch
