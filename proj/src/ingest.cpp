#include "eqsearch/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "eqsearch/error.hpp"
#include "eqsearch/latex_compiler.hpp"

namespace eqsearch {
namespace {

constexpr int kMacroPasses = 3;

const std::vector<std::string>& display_environments() {
    static const std::vector<std::string> envs = {"equation", "equation*", "align",    "align*",
                                                  "displaymath", "gather",  "gather*", "multline",
                                                  "multline*"};
    return envs;
}

bool is_display_env(const std::string& env) {
    const auto& envs = display_environments();
    return std::find(envs.begin(), envs.end(), env) != envs.end();
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_comments(std::string_view src) {
    std::string out;
    out.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i] == '\\' && i + 1 < src.size()) {
            out += src[i];
            out += src[++i];
            continue;
        }
        if (src[i] == '%') {
            while (i < src.size() && src[i] != '\n') ++i;
            if (i < src.size()) out += '\n';
            continue;
        }
        out += src[i];
    }
    return out;
}

// Reads a command name starting at `i` (just past the backslash).
std::string read_command_name(std::string_view s, std::size_t i) {
    if (i >= s.size()) return {};
    if (!is_letter(s[i])) return std::string(1, s[i]);
    std::size_t j = i;
    while (j < s.size() && is_letter(s[j])) ++j;
    return std::string(s.substr(i, j - i));
}

void skip_spaces(std::string_view s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

// With s[i] == '{', returns the index one past the matching '}', or npos.
std::size_t match_brace(std::string_view s, std::size_t i) {
    int depth = 0;
    for (; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            continue;
        }
        if (s[i] == '{') ++depth;
        else if (s[i] == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

struct Macro {
    int params = 0;
    std::string body;
};

using MacroTable = std::map<std::string, Macro>;

// \newcommand / \renewcommand with zero or one parameter and \def with at
// most #1. Anything more elaborate is ignored.
MacroTable collect_macros(std::string_view s) {
    MacroTable macros;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') continue;
        std::string cmd = read_command_name(s, i + 1);
        std::size_t j = i + 1 + cmd.size();
        std::string name;
        int params = 0;
        if (cmd == "newcommand" || cmd == "renewcommand" || cmd == "providecommand") {
            if (j < s.size() && s[j] == '*') ++j;
            skip_spaces(s, j);
            if (j < s.size() && s[j] == '{') {
                std::size_t end = match_brace(s, j);
                if (end == std::string_view::npos) continue;
                std::string inner = trim(s.substr(j + 1, end - j - 2));
                if (inner.size() < 2 || inner[0] != '\\') continue;
                name = inner.substr(1);
                j = end;
            } else if (j < s.size() && s[j] == '\\') {
                name = read_command_name(s, j + 1);
                j += 1 + name.size();
            } else {
                continue;
            }
            skip_spaces(s, j);
            if (j < s.size() && s[j] == '[') {
                auto close = s.find(']', j);
                if (close == std::string_view::npos) continue;
                std::string count = trim(s.substr(j + 1, close - j - 1));
                if (count != "0" && count != "1") continue;
                params = count[0] - '0';
                j = close + 1;
                skip_spaces(s, j);
                if (j < s.size() && s[j] == '[') continue;  // optional default argument: unsupported
            }
        } else if (cmd == "def") {
            skip_spaces(s, j);
            if (j >= s.size() || s[j] != '\\') continue;
            name = read_command_name(s, j + 1);
            j += 1 + name.size();
            if (s.substr(j, 2) == "#1") {
                params = 1;
                j += 2;
            }
            if (j < s.size() && s[j] == '#') continue;
        } else {
            continue;
        }
        skip_spaces(s, j);
        if (name.empty() || j >= s.size() || s[j] != '{') continue;
        std::size_t end = match_brace(s, j);
        if (end == std::string_view::npos) continue;
        macros[name] = Macro{params, std::string(s.substr(j + 1, end - j - 2))};
        i = end - 1;
    }
    return macros;
}

// One substitution pass; returns true when something was replaced.
bool expand_once(std::string& text, const MacroTable& macros) {
    std::string out;
    bool changed = false;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '\\') {
            out += text[i++];
            continue;
        }
        std::string name = read_command_name(text, i + 1);
        auto it = is_letter(name.empty() ? ' ' : name[0]) ? macros.find(name) : macros.end();
        if (it == macros.end()) {
            out.append(text, i, 1 + name.size());
            i += 1 + name.size();
            continue;
        }
        std::size_t j = i + 1 + name.size();
        std::string replacement = it->second.body;
        if (it->second.params == 1) {
            std::size_t k = j;
            skip_spaces(text, k);
            std::string arg;
            if (k < text.size() && text[k] == '{') {
                std::size_t end = match_brace(text, k);
                if (end == std::string::npos) {
                    out.append(text, i, 1 + name.size());
                    i = j;
                    continue;
                }
                arg = text.substr(k + 1, end - k - 2);
                j = end;
            } else if (k < text.size() && text[k] == '\\') {
                std::string inner = read_command_name(text, k + 1);
                arg = "\\" + inner;
                j = k + 1 + inner.size();
            } else if (k < text.size()) {
                arg = text.substr(k, 1);
                j = k + 1;
            }
            std::string substituted;
            for (std::size_t p = 0; p < replacement.size(); ++p) {
                if (replacement[p] == '#' && p + 1 < replacement.size() && replacement[p + 1] == '1') {
                    substituted += arg;
                    ++p;
                } else {
                    substituted += replacement[p];
                }
            }
            replacement = std::move(substituted);
        }
        // Keep a following letter from merging into the expansion's last command.
        if (!replacement.empty() && j < text.size() && is_letter(text[j])) {
            std::size_t b = replacement.rfind('\\');
            if (b != std::string::npos && b + 1 < replacement.size() && is_letter(replacement[b + 1]) &&
                std::all_of(replacement.begin() + static_cast<std::ptrdiff_t>(b) + 1, replacement.end(), is_letter))
                replacement += ' ';
        }
        out += replacement;
        i = j;
        changed = true;
    }
    text = std::move(out);
    return changed;
}

std::string expand_macros(std::string text, const MacroTable& macros) {
    if (macros.empty()) return text;
    for (int pass = 0; pass < kMacroPasses; ++pass)
        if (!expand_once(text, macros)) break;
    return text;
}

// Finds the next unescaped `$` at or after i.
std::size_t find_dollar(std::string_view s, std::size_t i) {
    for (; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            continue;
        }
        if (s[i] == '$') return i;
    }
    return std::string_view::npos;
}

enum class Visit { Text, Math };

// Walks the comment-stripped source, reporting section changes, display
// math bodies and plain text runs.
template <class OnSection, class OnDisplay, class OnText>
void walk(std::string_view s, OnSection&& on_section, OnDisplay&& on_display, OnText&& on_text,
          IngestDiagnostics* diag) {
    std::size_t i = 0;
    std::size_t text_start = 0;
    auto flush_text = [&](std::size_t end) {
        if (end > text_start) on_text(s.substr(text_start, end - text_start));
    };
    while (i < s.size()) {
        char c = s[i];
        if (c == '\\') {
            std::string name = read_command_name(s, i + 1);
            std::size_t after = i + 1 + name.size();
            if (name == "section" || name == "subsection") {
                flush_text(i);
                on_section();
                i = after;
                text_start = i;
                continue;
            }
            if (name == "begin") {
                std::size_t j = after;
                skip_spaces(s, j);
                if (j < s.size() && s[j] == '{') {
                    auto close = s.find('}', j);
                    std::string env = close == std::string_view::npos ? "" : std::string(s.substr(j + 1, close - j - 1));
                    if (is_display_env(env)) {
                        std::string end_tag = "\\end{" + env + "}";
                        auto end = s.find(end_tag, close + 1);
                        flush_text(i);
                        if (end == std::string_view::npos) {
                            if (diag) ++diag->unmatched_environments;
                            i = close + 1;
                        } else {
                            on_display(s.substr(close + 1, end - close - 1));
                            i = end + end_tag.size();
                        }
                        text_start = i;
                        continue;
                    }
                }
                i = after;
                continue;
            }
            if (name == "[") {
                auto end = s.find("\\]", after);
                flush_text(i);
                if (end == std::string_view::npos) {
                    if (diag) ++diag->unmatched_environments;
                    i = after;
                } else {
                    on_display(s.substr(after, end - after));
                    i = end + 2;
                }
                text_start = i;
                continue;
            }
            if (name == "(") {
                auto end = s.find("\\)", after);
                flush_text(i);
                i = end == std::string_view::npos ? after : end + 2;
                text_start = i;
                continue;
            }
            i = after;
            continue;
        }
        if (c == '$') {
            flush_text(i);
            if (i + 1 < s.size() && s[i + 1] == '$') {
                auto end = s.find("$$", i + 2);
                if (end == std::string_view::npos) {
                    if (diag) ++diag->unmatched_environments;
                    i += 2;
                } else {
                    on_display(s.substr(i + 2, end - i - 2));
                    i = end + 2;
                }
            } else {
                auto end = find_dollar(s, i + 1);
                i = end == std::string_view::npos ? s.size() : end + 1;  // inline math is dropped
            }
            text_start = i;
            continue;
        }
        ++i;
    }
    flush_text(s.size());
}

std::string plain_text(std::string_view chunk) {
    std::string out;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
        char c = chunk[i];
        if (c == '\\') {
            std::string name = read_command_name(chunk, i + 1);
            i += name.size();
            out += ' ';
            continue;
        }
        if (c == '{' || c == '}' || c == '~') {
            out += ' ';
            continue;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    // Collapse whitespace runs.
    std::string collapsed;
    bool space = false;
    for (char c : out) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !collapsed.empty()) collapsed += ' ';
        space = false;
        collapsed += c;
    }
    return collapsed;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<EquationSnippet> extract_equations(std::string_view latex_source, IngestDiagnostics* diagnostics) {
    std::string source = strip_comments(latex_source);
    MacroTable macros = collect_macros(source);
    std::vector<EquationSnippet> out;
    int section = 0;
    walk(
        source, [&] { ++section; },
        [&](std::string_view body) {
            std::string expanded = trim(expand_macros(std::string(body), macros));
            if (!expanded.empty()) out.push_back({std::move(expanded), section});
        },
        [](std::string_view) {}, diagnostics);
    return out;
}

std::vector<std::string> extract_section_texts(std::string_view latex_source) {
    std::string source = strip_comments(latex_source);
    std::vector<std::string> texts(1);
    walk(
        source, [&] { texts.emplace_back(); }, [](std::string_view) {},
        [&](std::string_view chunk) {
            std::string t = plain_text(chunk);
            if (t.empty()) return;
            if (!texts.back().empty()) texts.back() += ' ';
            texts.back() += t;
        },
        nullptr);
    return texts;
}

std::vector<std::string> extract_citations(std::string_view bibliography_text) {
    std::string text(bibliography_text);
    std::vector<std::pair<std::size_t, std::string>> found;

    static const std::regex modern(R"((\d{4}\.\d{4,5})(v\d+)?)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), modern); it != std::sregex_iterator(); ++it) {
        auto pos = static_cast<std::size_t>(it->position(0));
        std::size_t end = pos + static_cast<std::size_t>(it->length(0));
        bool left_ok = pos == 0 || !(std::isdigit(static_cast<unsigned char>(text[pos - 1])) || text[pos - 1] == '.');
        bool right_ok = end >= text.size() || !std::isdigit(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) found.emplace_back(pos, (*it)[1].str());
    }
    static const std::regex legacy(R"(([a-z]+(-[a-z]+)?(\.[A-Z]{2})?)/(\d{7})(v\d+)?)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), legacy); it != std::sregex_iterator(); ++it) {
        auto pos = static_cast<std::size_t>(it->position(0));
        std::size_t end = pos + static_cast<std::size_t>(it->length(0));
        bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
        bool right_ok = end >= text.size() || !std::isdigit(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) found.emplace_back(pos, (*it)[1].str() + "/" + (*it)[4].str());
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (auto& [pos, id] : found)
        if (seen.insert(id).second) ids.push_back(std::move(id));
    return ids;
}

std::string normalize_display_body(std::string_view body) {
    std::string out;
    std::size_t i = 0;
    while (i < body.size()) {
        char c = body[i];
        if (c == '&') {
            out += ' ';
            ++i;
            continue;
        }
        if (c == '\\') {
            std::string name = read_command_name(body, i + 1);
            std::size_t after = i + 1 + name.size();
            if (name == "\\") {
                out += ' ';
                i = after;
                continue;
            }
            if (name == "nonumber" || name == "notag") {
                i = after;
                continue;
            }
            if (name == "label" || name == "tag") {
                std::size_t j = after;
                skip_spaces(body, j);
                if (j < body.size() && body[j] == '{') {
                    std::size_t end = match_brace(body, j);
                    i = end == std::string_view::npos ? body.size() : end;
                    continue;
                }
            }
            out.append(body.substr(i, after - i));
            i = after;
            continue;
        }
        out += c;
        ++i;
    }
    return trim(out);
}

Corpus ingest_directory(const std::filesystem::path& src_dir, IngestDiagnostics* diagnostics) {
    if (!std::filesystem::is_directory(src_dir)) throw InvalidArgument("not a directory: " + src_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(src_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".tex") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<PaperRecord> papers;
    std::vector<EquationRecord> equations;
    for (const auto& file : files) {
        if (diagnostics) ++diagnostics->files;
        std::string source = read_file(file);
        PaperRecord paper;
        paper.paper_id = file.stem().string();
        auto rel = std::filesystem::relative(file.parent_path(), src_dir);
        paper.subject = rel == "." ? "" : rel.generic_string();

        std::filesystem::path bbl = file;
        bbl.replace_extension(".bbl");
        if (std::filesystem::exists(bbl)) {
            paper.citations = extract_citations(read_file(bbl));
        } else if (auto b = source.find("\\begin{thebibliography}"); b != std::string::npos) {
            paper.citations = extract_citations(std::string_view(source).substr(b));
        } else {
            paper.citations = extract_citations(source);
        }

        paper.section_texts = extract_section_texts(source);
        paper.sections.resize(paper.section_texts.size());
        std::size_t counter = 0;
        for (auto& snippet : extract_equations(source, diagnostics)) {
            std::string body = normalize_display_body(snippet.latex);
            std::string mathml;
            try {
                mathml = compile_latex_subset(body);
            } catch (const SyntaxError&) {
                if (diagnostics) ++diagnostics->compile_failures;
                continue;
            }
            EquationRecord eq;
            eq.eq_id = paper.paper_id + "#" + std::to_string(counter++);
            eq.paper_id = paper.paper_id;
            eq.section_index = snippet.section_index;
            eq.latex = std::move(body);
            eq.mathml = std::move(mathml);
            auto s = static_cast<std::size_t>(eq.section_index);
            if (paper.sections.size() <= s) paper.sections.resize(s + 1);
            paper.sections[s].push_back(eq.eq_id);
            equations.push_back(std::move(eq));
        }
        if (paper.section_texts.size() < paper.sections.size()) paper.section_texts.resize(paper.sections.size());
        papers.push_back(std::move(paper));
    }
    return Corpus(std::move(papers), std::move(equations));
}

}  // namespace eqsearch
