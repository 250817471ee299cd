#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eqsearch/corpus.hpp"
#include "eqsearch/xml.hpp"

namespace eqsearch {

enum class Relation { EQ, LT, LEQ, GT, GEQ };

struct RelationPair {
    std::string lhs_mathml;
    std::string rhs_mathml;
    Relation relation = Relation::EQ;
    std::string source_eq_id;
};

using RelationSet = std::set<Relation>;

RelationSet equalities();    // {=}
RelationSet inequalities();  // {<, ≤}
RelationSet all_relations(); // {=, <, >, ≤, ≥}

// "eq" | "ineq" | "all"; throws InvalidArgument.
RelationSet relation_preset(const std::string& name);

const char* relation_name(Relation r);      // "EQ", "LT", ...
Relation parse_relation(const std::string& name);
std::optional<Relation> relation_of_symbol(const std::string& mo_text);

// Length filter: each side must have at least this many leaf tokens
// (mi/mn/mo) and the longer side at most kMaxSideRatio times the shorter.
inline constexpr int kMinSideTokens = 2;
inline constexpr double kMaxSideRatio = 3.0;

// Split of the top-level token stream of a <math> tree. Bracket depth is
// tracked over mo delimiters; only depth-0 relation symbols count.
struct RelationSplit {
    std::vector<XmlNode> lhs;
    XmlNode relation_token;
    std::vector<XmlNode> rhs;
    Relation relation = Relation::EQ;
};

// nullopt unless exactly one depth-0 symbol from `relations` is present and
// no other relation symbol of the full set appears at depth 0.
std::optional<RelationSplit> split_at_relation(const XmlNode& math, const RelationSet& relations);

std::size_t leaf_token_count(const std::vector<XmlNode>& nodes);

std::vector<RelationPair> extract_relation_pairs(const Corpus& corpus, const RelationSet& relations);

void save_pairs(const std::vector<RelationPair>& pairs, const std::filesystem::path& path);
std::vector<RelationPair> load_pairs(const std::filesystem::path& path);

}  // namespace eqsearch
