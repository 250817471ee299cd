#include "eqsearch/xml.hpp"

#include <cctype>
#include <cstdint>

#include "eqsearch/error.hpp"

namespace eqsearch {
namespace {

bool is_name_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-' || c == '.' || c == ':' || u >= 0x80;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

class Parser {
public:
    explicit Parser(std::string_view doc) : doc_(doc) {}

    XmlNode parse_document() {
        skip_misc();
        if (pos_ >= doc_.size() || doc_[pos_] != '<') fail("expected root element");
        XmlNode root = parse_element();
        skip_misc();
        if (pos_ != doc_.size()) fail("trailing content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw MalformedXml(pos_, what); }

    bool starts_with(std::string_view s) const { return doc_.substr(pos_, s.size()) == s; }

    void skip_spaces() {
        while (pos_ < doc_.size() && is_space(doc_[pos_])) ++pos_;
    }

    void skip_until(std::string_view terminator) {
        auto end = doc_.find(terminator, pos_);
        if (end == std::string_view::npos) fail("unterminated markup");
        pos_ = end + terminator.size();
    }

    // Whitespace, comments, <?...?> and <!DOCTYPE ...>.
    void skip_misc() {
        for (;;) {
            skip_spaces();
            if (starts_with("<!--")) {
                skip_until("-->");
            } else if (starts_with("<?")) {
                skip_until("?>");
            } else if (starts_with("<!DOCTYPE") || starts_with("<!doctype")) {
                skip_until(">");
            } else {
                return;
            }
        }
    }

    std::string parse_name() {
        std::size_t start = pos_;
        while (pos_ < doc_.size() && is_name_char(doc_[pos_])) ++pos_;
        if (pos_ == start) fail("expected name");
        return std::string(doc_.substr(start, pos_ - start));
    }

    void decode_entity(std::string& out) {
        // pos_ at '&'
        auto semi = doc_.find(';', pos_);
        if (semi == std::string_view::npos || semi - pos_ > 12) fail("unterminated entity");
        std::string_view name = doc_.substr(pos_ + 1, semi - pos_ - 1);
        if (name == "lt") out += '<';
        else if (name == "gt") out += '>';
        else if (name == "amp") out += '&';
        else if (name == "quot") out += '"';
        else if (name == "apos") out += '\'';
        else if (!name.empty() && name[0] == '#') {
            std::uint32_t cp = 0;
            bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
            std::string_view digits = name.substr(hex ? 2 : 1);
            if (digits.empty()) fail("empty character reference");
            for (char c : digits) {
                int v;
                if (c >= '0' && c <= '9') v = c - '0';
                else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
                else fail("bad character reference");
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
                if (cp > 0x10FFFF) fail("character reference out of range");
            }
            append_utf8(out, cp);
        } else {
            fail("unknown entity &" + std::string(name) + ";");
        }
        pos_ = semi + 1;
    }

    std::string parse_attribute_value() {
        if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\'')) fail("expected quoted attribute value");
        char quote = doc_[pos_++];
        std::string value;
        while (pos_ < doc_.size() && doc_[pos_] != quote) {
            if (doc_[pos_] == '&') decode_entity(value);
            else if (doc_[pos_] == '<') fail("'<' in attribute value");
            else value += doc_[pos_++];
        }
        if (pos_ >= doc_.size()) fail("unterminated attribute value");
        ++pos_;
        return value;
    }

    XmlNode parse_element() {
        ++pos_;  // '<'
        XmlNode node;
        node.tag = parse_name();
        for (;;) {
            skip_spaces();
            if (pos_ >= doc_.size()) fail("unterminated start tag");
            if (starts_with("/>")) {
                pos_ += 2;
                return node;
            }
            if (doc_[pos_] == '>') {
                ++pos_;
                break;
            }
            std::string name = parse_name();
            skip_spaces();
            if (pos_ >= doc_.size() || doc_[pos_] != '=') fail("expected '=' after attribute name");
            ++pos_;
            skip_spaces();
            node.attributes.emplace_back(std::move(name), parse_attribute_value());
        }

        std::string text;
        for (;;) {
            if (pos_ >= doc_.size()) fail("unterminated element <" + node.tag + ">");
            char c = doc_[pos_];
            if (c == '<') {
                if (starts_with("</")) {
                    pos_ += 2;
                    std::string closing = parse_name();
                    if (closing != node.tag) fail("mismatched closing tag </" + closing + "> for <" + node.tag + ">");
                    skip_spaces();
                    if (pos_ >= doc_.size() || doc_[pos_] != '>') fail("expected '>'");
                    ++pos_;
                    break;
                }
                if (starts_with("<!--")) {
                    skip_until("-->");
                } else if (starts_with("<![CDATA[")) {
                    pos_ += 9;
                    auto end = doc_.find("]]>", pos_);
                    if (end == std::string_view::npos) fail("unterminated CDATA");
                    text.append(doc_.substr(pos_, end - pos_));
                    pos_ = end + 3;
                } else if (starts_with("<?")) {
                    skip_until("?>");
                } else {
                    node.children.push_back(parse_element());
                }
            } else if (c == '&') {
                decode_entity(text);
            } else {
                text += c;
                ++pos_;
            }
        }
        node.text = trim(text);
        return node;
    }

    std::string_view doc_;
    std::size_t pos_ = 0;
};

void serialize_into(const XmlNode& node, std::string& out) {
    out += '<';
    out += node.tag;
    for (const auto& [name, value] : node.attributes) {
        out += ' ';
        out += name;
        out += "=\"";
        out += xml_escape(value);
        out += '"';
    }
    out += '>';
    out += xml_escape(node.text);
    for (const auto& child : node.children) serialize_into(child, out);
    out += "</";
    out += node.tag;
    out += '>';
}

}  // namespace

XmlNode parse_xml(std::string_view document) { return Parser(document).parse_document(); }

std::string serialize_xml(const XmlNode& node) {
    std::string out;
    serialize_into(node, out);
    return out;
}

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::vector<std::string> utf8_chars(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if (lead >= 0xF0) len = 4;
        else if (lead >= 0xE0) len = 3;
        else if (lead >= 0xC0) len = 2;
        if (i + len > text.size()) len = 1;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    return out;
}

}  // namespace eqsearch
