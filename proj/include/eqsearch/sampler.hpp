#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eqsearch/corpus.hpp"

namespace eqsearch {

enum class PositiveMethod { SameSection, SamePaper, Citation };

const char* method_name(PositiveMethod m);  // "SAME_SECTION", "SAME_PAPER", "CITATION"
PositiveMethod parse_method(const std::string& name);

// Equation indices into the corpus the sampler was built on.
struct TripletSample {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    PositiveMethod method = PositiveMethod::SamePaper;
};

inline constexpr int kMaxSampleRestarts = 100;

class TripletSampler {
public:
    // Throws EmptyCorpus when no paper holds an equation.
    explicit TripletSampler(const Corpus& corpus);

    // Anchor paper uniform, anchor equation uniform within it, method uniform
    // (or `forced`), positive uniform among the method's candidates; restarts
    // on an empty candidate set. Negative: uniform paper, uniform equation.
    // Throws ExhaustedRetries after kMaxSampleRestarts restarts.
    TripletSample sample(std::mt19937_64& rng, std::optional<PositiveMethod> forced = std::nullopt) const;

    // Whether `positive` satisfies `method` relative to `anchor`.
    bool satisfies(PositiveMethod method, std::size_t anchor, std::size_t positive) const;
    // Same paper or papers joined by a citation edge (either direction).
    bool related(std::size_t a, std::size_t b) const;

    std::size_t paper_of(std::size_t equation) const { return eq_paper_[equation]; }
    const Corpus& corpus() const noexcept { return *corpus_; }

private:
    const Corpus* corpus_;
    std::vector<std::size_t> eq_paper_;
    std::vector<std::vector<std::size_t>> paper_eqs_;
    std::vector<std::vector<std::size_t>> section_peers_;  // per equation: equations of its section
    std::vector<std::vector<std::size_t>> cited_;          // per paper: linked papers, undirected
    std::vector<std::size_t> cited_eq_count_;              // per paper: equations over linked papers
};

std::vector<TripletSample> materialize_triplets(const TripletSampler& sampler, std::size_t count, std::uint64_t seed);

// JSON Lines {anchor, positive, negative, method} with eq_ids.
void save_triplets(const Corpus& corpus, const std::vector<TripletSample>& triplets, const std::filesystem::path& path);
std::vector<TripletSample> load_triplets(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace eqsearch
