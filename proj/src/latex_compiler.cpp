#include "eqsearch/latex_compiler.hpp"

#include <cctype>
#include <optional>
#include <unordered_map>
#include <vector>

#include "eqsearch/error.hpp"

namespace eqsearch {
namespace {

enum class TokenKind { Char, Command, BeginGroup, EndGroup, Superscript, Subscript, End };

struct Token {
    TokenKind kind;
    std::string text;  // the character or the command name without backslash
    std::size_t pos;
};

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (c == '\\') {
            ++i;
            if (i >= s.size()) throw SyntaxError(start, "dangling backslash");
            if (std::isalpha(static_cast<unsigned char>(s[i]))) {
                while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
            } else {
                ++i;
            }
            out.push_back({TokenKind::Command, std::string(s.substr(start + 1, i - start - 1)), start});
            continue;
        }
        TokenKind kind = TokenKind::Char;
        if (c == '{') kind = TokenKind::BeginGroup;
        else if (c == '}') kind = TokenKind::EndGroup;
        else if (c == '^') kind = TokenKind::Superscript;
        else if (c == '_') kind = TokenKind::Subscript;
        // Keep UTF-8 sequences together so the error position is the lead byte.
        std::size_t len = 1;
        auto lead = static_cast<unsigned char>(c);
        if (lead >= 0xF0) len = 4;
        else if (lead >= 0xE0) len = 3;
        else if (lead >= 0xC0) len = 2;
        out.push_back({kind, std::string(s.substr(i, len)), start});
        i += len;
    }
    out.push_back({TokenKind::End, "", s.size()});
    return out;
}

XmlNode leaf(const char* tag, std::string text) {
    XmlNode n;
    n.tag = tag;
    n.text = std::move(text);
    return n;
}

const std::unordered_map<std::string, std::string>& greek() {
    static const std::unordered_map<std::string, std::string> table = {
        {"alpha", "α"},   {"beta", "β"},     {"gamma", "γ"},   {"delta", "δ"},     {"epsilon", "ϵ"},
        {"varepsilon", "ε"}, {"zeta", "ζ"},  {"eta", "η"},     {"theta", "θ"},     {"vartheta", "ϑ"},
        {"iota", "ι"},    {"kappa", "κ"},    {"lambda", "λ"},  {"mu", "μ"},        {"nu", "ν"},
        {"xi", "ξ"},      {"pi", "π"},       {"rho", "ρ"},     {"varrho", "ϱ"},    {"sigma", "σ"},
        {"tau", "τ"},     {"upsilon", "υ"},  {"phi", "ϕ"},     {"varphi", "φ"},    {"chi", "χ"},
        {"psi", "ψ"},     {"omega", "ω"},    {"Gamma", "Γ"},   {"Delta", "Δ"},     {"Theta", "Θ"},
        {"Lambda", "Λ"},  {"Xi", "Ξ"},       {"Pi", "Π"},      {"Sigma", "Σ"},     {"Upsilon", "Υ"},
        {"Phi", "Φ"},     {"Psi", "Ψ"},      {"Omega", "Ω"},   {"hbar", "ℏ"},      {"ell", "ℓ"},
        {"infty", "∞"},   {"partial", "∂"},  {"nabla", "∇"},
    };
    return table;
}

const std::unordered_map<std::string, std::string>& operators() {
    static const std::unordered_map<std::string, std::string> table = {
        {"leq", "≤"},   {"le", "≤"},      {"geq", "≥"},      {"ge", "≥"},     {"neq", "≠"},
        {"ne", "≠"},    {"approx", "≈"},  {"sim", "∼"},      {"equiv", "≡"},  {"in", "∈"},
        {"to", "→"},    {"rightarrow", "→"}, {"mid", "∣"},   {"cdot", "⋅"},   {"times", "×"},
        {"pm", "±"},    {"div", "÷"},     {"langle", "⟨"},   {"rangle", "⟩"}, {"{", "{"},
        {"}", "}"},     {"|", "‖"},       {"lvert", "|"},    {"rvert", "|"},  {"ldots", "…"},
        {"cdots", "⋯"},
    };
    return table;
}

const std::unordered_map<std::string, std::string>& big_operators() {
    static const std::unordered_map<std::string, std::string> table = {
        {"sum", "∑"}, {"prod", "∏"}, {"int", "∫"}, {"min", "min"}, {"max", "max"}, {"lim", "lim"},
    };
    return table;
}

const std::unordered_map<std::string, std::string>& font_variants() {
    static const std::unordered_map<std::string, std::string> table = {
        {"mathbb", "double-struck"}, {"mathcal", "script"}, {"mathbf", "bold"}, {"mathrm", "normal"},
    };
    return table;
}

bool is_named_function(const std::string& name) {
    static const char* names[] = {"log", "exp", "sin", "cos", "tan", "ln", "det"};
    for (const char* n : names)
        if (name == n) return true;
    return false;
}

bool is_spacing(const std::string& name) {
    return name == "," || name == ";" || name == ":" || name == "!" || name == "quad" || name == "qquad" ||
           name == " ";
}

bool is_size_prefix(const std::string& name) {
    return name == "left" || name == "right" || name == "big" || name == "Big" || name == "bigg" ||
           name == "Bigg" || name == "bigl" || name == "bigr" || name == "Bigl" || name == "Bigr";
}

XmlNode wrap_row(std::vector<XmlNode> nodes) {
    if (nodes.size() == 1) return std::move(nodes.front());
    XmlNode row;
    row.tag = "mrow";
    row.children = std::move(nodes);
    return row;
}

void apply_variant(XmlNode& node, const std::string& variant) {
    if (node.tag == "mi" || node.tag == "mn" || node.tag == "mo") {
        for (auto& [name, value] : node.attributes) {
            if (name == "mathvariant") {
                value = variant;
                return;
            }
        }
        node.attributes.emplace_back("mathvariant", variant);
        return;
    }
    for (auto& child : node.children) apply_variant(child, variant);
}

class Compiler {
public:
    explicit Compiler(std::string_view latex) : tokens_(tokenize(latex)) {}

    XmlNode run() {
        XmlNode math;
        math.tag = "math";
        math.children = parse_sequence(std::nullopt);
        return math;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    // Parses until end of input (top level) or the '}' matching an opening
    // brace at `open_pos`.
    std::vector<XmlNode> parse_sequence(std::optional<std::size_t> open_pos) {
        std::vector<XmlNode> out;
        for (;;) {
            const Token& t = peek();
            if (t.kind == TokenKind::End) {
                if (open_pos) throw UnbalancedGroup(*open_pos, "unclosed '{'");
                return out;
            }
            if (t.kind == TokenKind::EndGroup) {
                if (!open_pos) throw UnbalancedGroup(t.pos, "unmatched '}'");
                ++pos_;
                return out;
            }
            if (auto atom = parse_atom()) out.push_back(std::move(*atom));
        }
    }

    std::optional<XmlNode> parse_atom() {
        const Token& start = peek();
        bool big_op = start.kind == TokenKind::Command && big_operators().count(start.text) &&
                      start.text != "int";
        std::optional<XmlNode> base = parse_base();

        std::optional<XmlNode> sub, sup;
        for (;;) {
            const Token& t = peek();
            if (t.kind != TokenKind::Superscript && t.kind != TokenKind::Subscript) break;
            if (!base) throw SyntaxError(t.pos, "script without base");
            ++pos_;
            auto& slot = t.kind == TokenKind::Superscript ? sup : sub;
            if (slot) throw SyntaxError(t.pos, t.kind == TokenKind::Superscript ? "double superscript" : "double subscript");
            slot = parse_argument(t.pos);
        }
        if (!base) return std::nullopt;
        if (!sub && !sup) return base;

        XmlNode node;
        if (sub && sup) {
            node.tag = big_op ? "munderover" : "msubsup";
            node.children = {std::move(*base), std::move(*sub), std::move(*sup)};
        } else if (sub) {
            node.tag = "msub";
            node.children = {std::move(*base), std::move(*sub)};
        } else {
            node.tag = "msup";
            node.children = {std::move(*base), std::move(*sup)};
        }
        return node;
    }

    // A braced group or a single token, as used by \frac, \sqrt and scripts.
    XmlNode parse_argument(std::size_t owner_pos) {
        const Token& t = peek();
        if (t.kind == TokenKind::End) throw SyntaxError(t.pos, "missing argument");
        if (t.kind == TokenKind::BeginGroup) {
            ++pos_;
            std::vector<XmlNode> inner = parse_sequence(t.pos);
            if (inner.empty()) {
                XmlNode row;
                row.tag = "mrow";
                return row;
            }
            return wrap_row(std::move(inner));
        }
        if (t.kind == TokenKind::EndGroup || t.kind == TokenKind::Superscript || t.kind == TokenKind::Subscript)
            throw SyntaxError(t.pos, "missing argument");
        if (t.kind == TokenKind::Char && std::isdigit(static_cast<unsigned char>(t.text[0]))) {
            ++pos_;
            return leaf("mn", t.text);  // TeX takes a single digit here
        }
        auto node = parse_base();
        if (!node) throw SyntaxError(owner_pos, "missing argument");
        return std::move(*node);
    }

    std::optional<XmlNode> parse_base() {
        const Token t = next();
        switch (t.kind) {
            case TokenKind::BeginGroup: {
                std::vector<XmlNode> inner = parse_sequence(t.pos);
                if (inner.empty()) {
                    XmlNode row;
                    row.tag = "mrow";
                    return row;
                }
                return wrap_row(std::move(inner));
            }
            case TokenKind::EndGroup:
                throw UnbalancedGroup(t.pos, "unmatched '}'");
            case TokenKind::Superscript:
            case TokenKind::Subscript:
                throw SyntaxError(t.pos, "script without base");
            case TokenKind::End:
                throw SyntaxError(t.pos, "unexpected end of input");
            case TokenKind::Char:
                return parse_char(t);
            case TokenKind::Command:
                return parse_command(t);
        }
        return std::nullopt;
    }

    XmlNode parse_char(const Token& t) {
        char c = t.text[0];
        if (std::isalpha(static_cast<unsigned char>(c))) return leaf("mi", t.text);
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string digits = t.text;
            while (peek().kind == TokenKind::Char && peek().pos == t.pos + digits.size()) {
                char d = peek().text[0];
                bool decimal_point = d == '.' && pos_ + 1 < tokens_.size() && tokens_[pos_ + 1].kind == TokenKind::Char &&
                                     tokens_[pos_ + 1].pos == peek().pos + 1 &&
                                     std::isdigit(static_cast<unsigned char>(tokens_[pos_ + 1].text[0]));
                if (!std::isdigit(static_cast<unsigned char>(d)) && !decimal_point) break;
                digits += d;
                ++pos_;
            }
            return leaf("mn", digits);
        }
        static const std::string ops = "+-=<>/,;:!'|()[]*.";
        if (t.text.size() == 1 && ops.find(c) != std::string::npos) return leaf("mo", t.text);
        throw SyntaxError(t.pos, "unsupported character '" + t.text + "'");
    }

    std::optional<XmlNode> parse_command(const Token& t) {
        const std::string& name = t.text;
        if (is_spacing(name)) return std::nullopt;
        if (auto it = greek().find(name); it != greek().end()) return leaf("mi", it->second);
        if (auto it = operators().find(name); it != operators().end()) return leaf("mo", it->second);
        if (auto it = big_operators().find(name); it != big_operators().end()) return leaf("mo", it->second);
        if (is_named_function(name)) return leaf("mi", name);
        if (name == "frac") {
            XmlNode frac;
            frac.tag = "mfrac";
            frac.children.push_back(parse_argument(t.pos));
            frac.children.push_back(parse_argument(t.pos));
            return frac;
        }
        if (name == "sqrt") {
            if (peek().kind == TokenKind::Char && peek().text == "[")
                throw SyntaxError(peek().pos, "root index is not supported");
            XmlNode arg = parse_argument(t.pos);
            XmlNode root;
            root.tag = "msqrt";
            if (arg.tag == "mrow") root.children = std::move(arg.children);
            else root.children.push_back(std::move(arg));
            return root;
        }
        if (auto it = font_variants().find(name); it != font_variants().end()) {
            XmlNode arg = parse_argument(t.pos);
            apply_variant(arg, it->second);
            return arg;
        }
        if (is_size_prefix(name)) {
            const Token& d = peek();
            if (d.kind == TokenKind::Char && d.text == ".") {
                ++pos_;
                return std::nullopt;  // \left. is an invisible delimiter
            }
            bool delimiter = (d.kind == TokenKind::Char && std::string("()[]|/").find(d.text) != std::string::npos) ||
                             (d.kind == TokenKind::Command && operators().count(d.text));
            if (!delimiter) throw SyntaxError(d.pos, "expected delimiter after \\" + name);
            return parse_base();
        }
        throw SyntaxError(t.pos, "unsupported command \\" + name);
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

XmlNode compile_latex_tree(std::string_view latex) { return Compiler(latex).run(); }

std::string compile_latex_subset(std::string_view latex) { return serialize_xml(compile_latex_tree(latex)); }

}  // namespace eqsearch
