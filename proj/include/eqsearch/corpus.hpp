#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace eqsearch {

struct EquationRecord {
    std::string eq_id;
    std::string paper_id;
    int section_index = 0;
    std::string latex;
    std::string mathml;
};

struct PaperRecord {
    std::string paper_id;
    std::string subject;
    // sections[s] lists the eq_ids of section s in document order.
    std::vector<std::vector<std::string>> sections;
    // Outgoing references as found in the bibliography (arXiv ids). They may
    // point outside the corpus.
    std::vector<std::string> citations;
    // Lowercased plain text per section, used by keyword relevance judgement.
    // Optional; empty when the corpus was built without text.
    std::vector<std::string> section_texts;
};

// Papers, their equations and the citation graph. Equations are stored in a
// vector; `equation_index` maps eq_id to position. Immutable once built.
class Corpus {
public:
    Corpus() = default;

    // Throws InvalidArgument on duplicate ids or sections that reference
    // unknown equations.
    Corpus(std::vector<PaperRecord> papers, std::vector<EquationRecord> equations);

    const std::vector<PaperRecord>& papers() const noexcept { return papers_; }
    const std::vector<EquationRecord>& equations() const noexcept { return equations_; }
    std::size_t size() const noexcept { return equations_.size(); }
    bool empty() const noexcept { return equations_.empty(); }

    const EquationRecord* find_equation(const std::string& eq_id) const;
    std::size_t equation_index(const std::string& eq_id) const;  // throws InvalidArgument
    const PaperRecord* find_paper(const std::string& paper_id) const;
    std::size_t paper_index(const std::string& paper_id) const;  // throws InvalidArgument

    // Directed citation edges whose endpoints are both in the corpus.
    std::vector<std::pair<std::string, std::string>> citation_edges() const;

    // Restriction to the listed papers (citations to dropped papers become
    // external references).
    Corpus subset(const std::vector<std::string>& paper_ids) const;

private:
    std::vector<PaperRecord> papers_;
    std::vector<EquationRecord> equations_;
    std::unordered_map<std::string, std::size_t> eq_index_;
    std::unordered_map<std::string, std::size_t> paper_index_;
};

// Paper-level split; `train_fraction` of the papers (rounded) go to `first`.
std::pair<Corpus, Corpus> split_papers(const Corpus& corpus, double train_fraction, unsigned long long seed);

// corpus_dir/papers.jsonl and corpus_dir/equations.jsonl.
void save_corpus(const Corpus& corpus, const std::filesystem::path& corpus_dir);
Corpus load_corpus(const std::filesystem::path& corpus_dir);

}  // namespace eqsearch
