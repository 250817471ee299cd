#include "eqsearch/relation_pairs.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"

namespace eqsearch {

RelationSet equalities() { return {Relation::EQ}; }
RelationSet inequalities() { return {Relation::LT, Relation::LEQ}; }
RelationSet all_relations() { return {Relation::EQ, Relation::LT, Relation::GT, Relation::LEQ, Relation::GEQ}; }

RelationSet relation_preset(const std::string& name) {
    if (name == "eq") return equalities();
    if (name == "ineq") return inequalities();
    if (name == "all") return all_relations();
    throw InvalidArgument("unknown relation preset '" + name + "' (expected eq|ineq|all)");
}

const char* relation_name(Relation r) {
    switch (r) {
        case Relation::EQ: return "EQ";
        case Relation::LT: return "LT";
        case Relation::LEQ: return "LEQ";
        case Relation::GT: return "GT";
        case Relation::GEQ: return "GEQ";
    }
    return "EQ";
}

Relation parse_relation(const std::string& name) {
    for (Relation r : all_relations())
        if (name == relation_name(r)) return r;
    throw InvalidArgument("unknown relation '" + name + "'");
}

std::optional<Relation> relation_of_symbol(const std::string& mo_text) {
    if (mo_text == "=") return Relation::EQ;
    if (mo_text == "<") return Relation::LT;
    if (mo_text == ">") return Relation::GT;
    if (mo_text == "≤") return Relation::LEQ;
    if (mo_text == "≥") return Relation::GEQ;
    return std::nullopt;
}

std::size_t leaf_token_count(const std::vector<XmlNode>& nodes) {
    std::size_t count = 0;
    for (const auto& n : nodes) {
        if (n.tag == "mi" || n.tag == "mn" || n.tag == "mo") ++count;
        count += leaf_token_count(n.children);
    }
    return count;
}

std::optional<RelationSplit> split_at_relation(const XmlNode& math, const RelationSet& relations) {
    int depth = 0;
    std::optional<std::size_t> at;
    for (std::size_t i = 0; i < math.children.size(); ++i) {
        const XmlNode& tok = math.children[i];
        if (tok.tag != "mo") continue;
        const std::string& t = tok.text;
        if (t == "(" || t == "[" || t == "{" || t == "⟨") {
            ++depth;
        } else if (t == ")" || t == "]" || t == "}" || t == "⟩") {
            depth = std::max(0, depth - 1);
        } else if (depth == 0) {
            if (auto rel = relation_of_symbol(t)) {
                if (!relations.count(*rel) || at) return std::nullopt;
                at = i;
            }
        }
    }
    if (!at) return std::nullopt;
    RelationSplit split;
    split.lhs.assign(math.children.begin(), math.children.begin() + static_cast<std::ptrdiff_t>(*at));
    split.relation_token = math.children[*at];
    split.rhs.assign(math.children.begin() + static_cast<std::ptrdiff_t>(*at) + 1, math.children.end());
    split.relation = *relation_of_symbol(split.relation_token.text);
    return split;
}

namespace {

std::string wrap_math(const std::vector<XmlNode>& nodes) {
    XmlNode math;
    math.tag = "math";
    math.children = nodes;
    return serialize_xml(math);
}

}  // namespace

std::vector<RelationPair> extract_relation_pairs(const Corpus& corpus, const RelationSet& relations) {
    std::vector<RelationPair> pairs;
    for (const auto& eq : corpus.equations()) {
        XmlNode math;
        try {
            math = parse_xml(eq.mathml);
        } catch (const MalformedXml&) {
            continue;
        }
        auto split = split_at_relation(math, relations);
        if (!split) continue;
        auto left = static_cast<double>(leaf_token_count(split->lhs));
        auto right = static_cast<double>(leaf_token_count(split->rhs));
        if (left < kMinSideTokens || right < kMinSideTokens) continue;
        if (std::max(left, right) > kMaxSideRatio * std::min(left, right)) continue;
        pairs.push_back({wrap_math(split->lhs), wrap_math(split->rhs), split->relation, eq.eq_id});
    }
    return pairs;
}

void save_pairs(const std::vector<RelationPair>& pairs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    for (const auto& p : pairs) {
        nlohmann::json rec = {{"lhs", p.lhs_mathml},
                              {"rhs", p.rhs_mathml},
                              {"relation", relation_name(p.relation)},
                              {"source", p.source_eq_id}};
        out << rec.dump() << '\n';
    }
}

std::vector<RelationPair> load_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::vector<RelationPair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto rec = nlohmann::json::parse(line);
            pairs.push_back({rec.at("lhs").get<std::string>(), rec.at("rhs").get<std::string>(),
                             parse_relation(rec.value("relation", "EQ")), rec.value("source", "")});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("bad pair record in " + path.string() + ": " + e.what());
        }
    }
    return pairs;
}

}  // namespace eqsearch
