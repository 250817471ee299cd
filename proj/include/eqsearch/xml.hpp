#pragma once

// Minimal XML DOM for Presentation MathML: elements, attributes and text.
// Comments, processing instructions and DOCTYPE declarations are skipped;
// namespaces are kept verbatim in tag names.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace eqsearch {

struct XmlNode {
    std::string tag;
    std::vector<std::pair<std::string, std::string>> attributes;
    // Concatenated character data directly inside this element (entities
    // decoded, surrounding whitespace trimmed).
    std::string text;
    std::vector<XmlNode> children;
};

// Throws MalformedXml.
XmlNode parse_xml(std::string_view document);

// Canonical serialization: attributes in stored order, text escaped,
// no whitespace between elements.
std::string serialize_xml(const XmlNode& node);

std::string xml_escape(std::string_view text);

// UTF-8 codepoint split; invalid bytes are passed through one at a time.
std::vector<std::string> utf8_chars(std::string_view text);

}  // namespace eqsearch
