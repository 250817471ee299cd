#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eqsearch/corpus.hpp"

namespace eqsearch {

struct EquationSnippet {
    std::string latex;
    int section_index = 0;

    bool operator==(const EquationSnippet&) const = default;
};

struct IngestDiagnostics {
    std::size_t unmatched_environments = 0;
    std::size_t compile_failures = 0;
    std::size_t files = 0;
};

// Display-math bodies (equation, equation*, align, align*, displaymath,
// gather, multline, $$..$$, \[..\]) with user macros expanded. Inline math
// is skipped. Sections are counted at every \section and \subsection;
// equations before the first heading are in section 0.
std::vector<EquationSnippet> extract_equations(std::string_view latex_source, IngestDiagnostics* diagnostics = nullptr);

// arXiv identifiers (modern NNNN.NNNNN and legacy archive/NNNNNNN), version
// suffixes stripped, deduplicated in order of first occurrence.
std::vector<std::string> extract_citations(std::string_view bibliography_text);

// Lowercased prose of every section (math removed), aligned with the
// section indices produced by extract_equations.
std::vector<std::string> extract_section_texts(std::string_view latex_source);

// Strips alignment markup (&, \\, \label, \nonumber, \tag) so the body fits
// the compiler's grammar.
std::string normalize_display_body(std::string_view body);

// Every *.tex file under `src_dir` becomes one paper whose id is the file
// stem. Citations come from a sibling .bbl file when present, otherwise from
// the thebibliography environment, otherwise from the whole source.
Corpus ingest_directory(const std::filesystem::path& src_dir, IngestDiagnostics* diagnostics = nullptr);

}  // namespace eqsearch
