#include "eqsearch/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"

namespace eqsearch {

using nlohmann::json;

Corpus::Corpus(std::vector<PaperRecord> papers, std::vector<EquationRecord> equations)
    : papers_(std::move(papers)), equations_(std::move(equations)) {
    for (std::size_t i = 0; i < equations_.size(); ++i) {
        if (!eq_index_.emplace(equations_[i].eq_id, i).second)
            throw InvalidArgument("duplicate eq_id '" + equations_[i].eq_id + "'");
    }
    std::size_t referenced = 0;
    for (std::size_t p = 0; p < papers_.size(); ++p) {
        const auto& paper = papers_[p];
        if (!paper_index_.emplace(paper.paper_id, p).second)
            throw InvalidArgument("duplicate paper_id '" + paper.paper_id + "'");
        for (std::size_t s = 0; s < paper.sections.size(); ++s) {
            for (const auto& id : paper.sections[s]) {
                auto it = eq_index_.find(id);
                if (it == eq_index_.end())
                    throw InvalidArgument("paper '" + paper.paper_id + "' references unknown equation '" + id + "'");
                const auto& eq = equations_[it->second];
                if (eq.paper_id != paper.paper_id || eq.section_index != static_cast<int>(s))
                    throw InvalidArgument("equation '" + id + "' is filed under the wrong paper or section");
                ++referenced;
            }
        }
    }
    if (referenced != equations_.size())
        throw InvalidArgument("per-paper equation counts do not add up to the number of equations");
}

const EquationRecord* Corpus::find_equation(const std::string& eq_id) const {
    auto it = eq_index_.find(eq_id);
    return it == eq_index_.end() ? nullptr : &equations_[it->second];
}

std::size_t Corpus::equation_index(const std::string& eq_id) const {
    auto it = eq_index_.find(eq_id);
    if (it == eq_index_.end()) throw InvalidArgument("unknown equation '" + eq_id + "'");
    return it->second;
}

const PaperRecord* Corpus::find_paper(const std::string& paper_id) const {
    auto it = paper_index_.find(paper_id);
    return it == paper_index_.end() ? nullptr : &papers_[it->second];
}

std::size_t Corpus::paper_index(const std::string& paper_id) const {
    auto it = paper_index_.find(paper_id);
    if (it == paper_index_.end()) throw InvalidArgument("unknown paper '" + paper_id + "'");
    return it->second;
}

std::vector<std::pair<std::string, std::string>> Corpus::citation_edges() const {
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& paper : papers_) {
        for (const auto& cited : paper.citations) {
            if (cited != paper.paper_id && paper_index_.count(cited)) edges.emplace_back(paper.paper_id, cited);
        }
    }
    return edges;
}

Corpus Corpus::subset(const std::vector<std::string>& paper_ids) const {
    std::unordered_set<std::string> keep(paper_ids.begin(), paper_ids.end());
    std::vector<PaperRecord> papers;
    std::vector<EquationRecord> equations;
    for (const auto& paper : papers_) {
        if (!keep.count(paper.paper_id)) continue;
        papers.push_back(paper);
        for (const auto& section : paper.sections)
            for (const auto& id : section) equations.push_back(equations_[eq_index_.at(id)]);
    }
    return Corpus(std::move(papers), std::move(equations));
}

std::pair<Corpus, Corpus> split_papers(const Corpus& corpus, double train_fraction, unsigned long long seed) {
    std::vector<std::string> ids;
    for (const auto& p : corpus.papers()) ids.push_back(p.paper_id);
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
    cut = std::min(cut, ids.size());
    std::vector<std::string> first(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::string> second(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
    return {corpus.subset(first), corpus.subset(second)};
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& corpus_dir) {
    std::filesystem::create_directories(corpus_dir);
    std::ofstream papers(corpus_dir / "papers.jsonl");
    for (const auto& p : corpus.papers()) {
        json rec = {{"paper_id", p.paper_id}, {"subject", p.subject}, {"sections", p.sections}, {"citations", p.citations}};
        if (!p.section_texts.empty()) rec["section_texts"] = p.section_texts;
        papers << rec.dump() << '\n';
    }
    std::ofstream equations(corpus_dir / "equations.jsonl");
    for (const auto& e : corpus.equations()) {
        json rec = {{"eq_id", e.eq_id},
                    {"paper_id", e.paper_id},
                    {"section", e.section_index},
                    {"latex", e.latex},
                    {"mathml", e.mathml}};
        equations << rec.dump() << '\n';
    }
    if (!papers || !equations) throw Error("failed writing corpus to " + corpus_dir.string());
}

Corpus load_corpus(const std::filesystem::path& corpus_dir) {
    std::vector<PaperRecord> papers;
    std::vector<EquationRecord> equations;
    try {
        for (const auto& rec : read_jsonl(corpus_dir / "papers.jsonl")) {
            PaperRecord p;
            p.paper_id = rec.at("paper_id").get<std::string>();
            p.subject = rec.value("subject", "");
            p.sections = rec.at("sections").get<std::vector<std::vector<std::string>>>();
            p.citations = rec.value("citations", std::vector<std::string>{});
            p.section_texts = rec.value("section_texts", std::vector<std::string>{});
            papers.push_back(std::move(p));
        }
        for (const auto& rec : read_jsonl(corpus_dir / "equations.jsonl")) {
            EquationRecord e;
            e.eq_id = rec.at("eq_id").get<std::string>();
            e.paper_id = rec.at("paper_id").get<std::string>();
            e.section_index = rec.at("section").get<int>();
            e.latex = rec.value("latex", "");
            e.mathml = rec.at("mathml").get<std::string>();
            equations.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw InvalidArgument("bad corpus record: " + std::string(e.what()));
    }
    return Corpus(std::move(papers), std::move(equations));
}

}  // namespace eqsearch
