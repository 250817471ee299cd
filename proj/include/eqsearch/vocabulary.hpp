#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eqsearch/corpus.hpp"

namespace eqsearch {

// One-hot layout of a node feature vector: 32 tag slots, 32 attribute slots
// (31 attributes + UNK), 192 character slots (191 characters + UNK).
inline constexpr int kTagSlots = 32;
inline constexpr int kAttrSlots = 32;
inline constexpr int kCharSlots = 192;
inline constexpr int kFeatureDim = kTagSlots + kAttrSlots + kCharSlots;  // 256
inline constexpr int kAttrOffset = kTagSlots;
inline constexpr int kCharOffset = kTagSlots + kAttrSlots;

// Class ids used by the masking heads for "feature block was empty".
inline constexpr int kNoAttributeClass = kAttrSlots;  // 32
inline constexpr int kNoCharacterClass = kCharSlots;  // 192

inline constexpr std::string_view kUnknownToken = "UNK";

class Vocabulary {
public:
    Vocabulary() = default;
    // attrs and chars must end with the UNK token; sizes are checked.
    Vocabulary(std::vector<std::string> tags, std::vector<std::string> attrs, std::vector<std::string> chars);

    const std::vector<std::string>& tags() const noexcept { return tags_; }
    const std::vector<std::string>& attrs() const noexcept { return attrs_; }
    const std::vector<std::string>& chars() const noexcept { return chars_; }

    // -1 for tags outside the vocabulary.
    int tag_index(const std::string& tag) const;
    // "name=value"; rare attributes map to the UNK slot.
    int attr_index(const std::string& attr) const;
    // One UTF-8 character; rare characters map to the UNK slot.
    int char_index(const std::string& ch) const;
    int attr_unknown() const noexcept { return static_cast<int>(attrs_.size()) - 1; }
    int char_unknown() const noexcept { return static_cast<int>(chars_.size()) - 1; }

    // Stable 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
    std::string hash() const;

    std::string to_json() const;
    static Vocabulary from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const {
        return tags_ == other.tags_ && attrs_ == other.attrs_ && chars_ == other.chars_;
    }

private:
    void index();

    std::vector<std::string> tags_, attrs_, chars_;
    std::unordered_map<std::string, int> tag_ids_, attr_ids_, char_ids_;
};

// Frequency-ranked vocabulary (ties broken lexically). Throws EmptyCorpus.
Vocabulary build_vocabulary(const Corpus& corpus);
Vocabulary build_vocabulary(const std::vector<std::string>& mathml_documents);

}  // namespace eqsearch
