#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eqsearch/corpus.hpp"

namespace eqsearch {

// Template corpus: every paper belongs to one topic, draws its equations
// from a few structural variants of that topic's template with freshly
// renamed identifiers, and cites papers of the same topic.
struct SyntheticConfig {
    std::size_t papers = 200;
    int min_sections = 2;
    int max_sections = 3;
    int min_equations = 8;
    int max_equations = 12;
    int variants_per_paper = 3;
    double noise = 0.03;  // chance an equation comes from another topic
    int min_citations = 1;
    int max_citations = 3;
    std::uint64_t seed = 0;
};

std::size_t synthetic_topic_count();
const std::vector<std::string>& synthetic_topic_names();
// Keywords that appear in the section texts of a topic.
const std::vector<std::string>& synthetic_topic_keywords(std::size_t topic);

Corpus synthetic_corpus(const SyntheticConfig& config = {});

// One random equation of `topic` (LaTeX), identifiers renamed.
std::string synthetic_equation(std::size_t topic, std::uint64_t seed);

}  // namespace eqsearch
