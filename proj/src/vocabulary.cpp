#include "eqsearch/vocabulary.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eqsearch/error.hpp"
#include "eqsearch/xml.hpp"

namespace eqsearch {

Vocabulary::Vocabulary(std::vector<std::string> tags, std::vector<std::string> attrs, std::vector<std::string> chars)
    : tags_(std::move(tags)), attrs_(std::move(attrs)), chars_(std::move(chars)) {
    if (tags_.size() > static_cast<std::size_t>(kTagSlots)) throw InvalidArgument("more than 32 tags in vocabulary");
    if (attrs_.empty() || attrs_.back() != kUnknownToken || attrs_.size() > static_cast<std::size_t>(kAttrSlots))
        throw InvalidArgument("attribute list must hold at most 31 entries followed by UNK");
    if (chars_.empty() || chars_.back() != kUnknownToken || chars_.size() > static_cast<std::size_t>(kCharSlots))
        throw InvalidArgument("character list must hold at most 191 entries followed by UNK");
    index();
}

void Vocabulary::index() {
    auto fill = [](const std::vector<std::string>& list, std::unordered_map<std::string, int>& ids) {
        ids.clear();
        for (std::size_t i = 0; i < list.size(); ++i)
            if (!ids.emplace(list[i], static_cast<int>(i)).second)
                throw InvalidArgument("duplicate vocabulary entry '" + list[i] + "'");
    };
    fill(tags_, tag_ids_);
    fill(attrs_, attr_ids_);
    fill(chars_, char_ids_);
}

int Vocabulary::tag_index(const std::string& tag) const {
    auto it = tag_ids_.find(tag);
    return it == tag_ids_.end() ? -1 : it->second;
}

int Vocabulary::attr_index(const std::string& attr) const {
    auto it = attr_ids_.find(attr);
    return it == attr_ids_.end() || attr == kUnknownToken ? attr_unknown() : it->second;
}

int Vocabulary::char_index(const std::string& ch) const {
    auto it = char_ids_.find(ch);
    return it == char_ids_.end() || ch == kUnknownToken ? char_unknown() : it->second;
}

std::string Vocabulary::to_json() const {
    nlohmann::json j = {{"tags", tags_}, {"attrs", attrs_}, {"chars", chars_}};
    return j.dump();
}

Vocabulary Vocabulary::from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        return Vocabulary(j.at("tags").get<std::vector<std::string>>(), j.at("attrs").get<std::vector<std::string>>(),
                          j.at("chars").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad vocabulary JSON: ") + e.what());
    }
}

std::string Vocabulary::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_json()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

struct Counts {
    std::map<std::string, std::size_t> tags, attrs, chars;
};

void count(const XmlNode& node, Counts& counts) {
    ++counts.tags[node.tag];
    for (const auto& [name, value] : node.attributes) ++counts.attrs[name + "=" + value];
    for (const auto& ch : utf8_chars(node.text)) ++counts.chars[ch];
    for (const auto& child : node.children) count(child, counts);
}

// Descending frequency, ties by lexical order (std::map iteration order
// plus a stable sort).
std::vector<std::string> top(const std::map<std::string, std::size_t>& counts, std::size_t limit) {
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (const auto& [key, n] : items) {
        if (out.size() == limit) break;
        if (key == kUnknownToken) continue;
        out.push_back(key);
    }
    return out;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::string>& mathml_documents) {
    if (mathml_documents.empty()) throw EmptyCorpus();
    Counts counts;
    for (const auto& doc : mathml_documents) count(parse_xml(doc), counts);
    auto tags = top(counts.tags, kTagSlots);
    auto attrs = top(counts.attrs, kAttrSlots - 1);
    auto chars = top(counts.chars, kCharSlots - 1);
    attrs.emplace_back(kUnknownToken);
    chars.emplace_back(kUnknownToken);
    return Vocabulary(std::move(tags), std::move(attrs), std::move(chars));
}

Vocabulary build_vocabulary(const Corpus& corpus) {
    std::vector<std::string> docs;
    docs.reserve(corpus.size());
    for (const auto& eq : corpus.equations()) docs.push_back(eq.mathml);
    return build_vocabulary(docs);
}

}  // namespace eqsearch
