#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/ingest.hpp"
#include "eqsearch/latex_compiler.hpp"
#include "eqsearch/relation_pairs.hpp"
#include "eqsearch/synthetic.hpp"
#include "eqsearch/xml.hpp"
#include "test_support.hpp"

using namespace eqsearch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("eqsearch_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

Corpus corpus_of(const std::vector<std::string>& latex) {
    PaperRecord paper{"p", "s", {{}}, {}, {}};
    std::vector<EquationRecord> eqs;
    for (std::size_t i = 0; i < latex.size(); ++i) {
        EquationRecord e{"p#" + std::to_string(i), "p", 0, latex[i], compile_latex_subset(latex[i])};
        paper.sections[0].push_back(e.eq_id);
        eqs.push_back(e);
    }
    return Corpus({paper}, eqs);
}

}  // namespace

TEST(ExtractEquations, SingleEnvironment) {
    auto eqs = extract_equations("\\begin{equation}a+b\\end{equation}");
    ASSERT_EQ(eqs.size(), 1u);
    EXPECT_EQ(eqs[0], (EquationSnippet{"a+b", 0}));
}

TEST(ExtractEquations, MacroSubstitution) {
    auto eqs = extract_equations("\\newcommand{\\vv}{w}\n\\[\\vv^2\\]");
    ASSERT_EQ(eqs.size(), 1u);
    EXPECT_EQ(eqs[0], (EquationSnippet{"w^2", 0}));
}

TEST(ExtractEquations, InlineMathIsSkipped) {
    EXPECT_TRUE(extract_equations("we have $x$ here").empty());
}

TEST(ExtractEquations, DisplayFormsAndSections) {
    std::string src =
        "intro $$a$$\n"
        "\\section{One}\n"
        "\\begin{align*} b &= c \\end{align*}\n"
        "% \\[ commented \\]\n"
        "\\subsection{Two}\n"
        "\\begin{gather}d\\end{gather} and \\(e\\) inline\n";
    auto eqs = extract_equations(src);
    ASSERT_EQ(eqs.size(), 3u);
    EXPECT_EQ(eqs[0], (EquationSnippet{"a", 0}));
    EXPECT_EQ(eqs[1].section_index, 1);
    EXPECT_EQ(eqs[2], (EquationSnippet{"d", 2}));
}

TEST(ExtractEquations, UnmatchedEnvironmentIsCounted) {
    IngestDiagnostics diag;
    auto eqs = extract_equations("\\begin{equation}a+b", &diag);
    EXPECT_TRUE(eqs.empty());
    EXPECT_EQ(diag.unmatched_environments, 1u);
}

TEST(ExtractCitations, Examples) {
    EXPECT_EQ(extract_citations("see arXiv:1706.03762 for details"), std::vector<std::string>{"1706.03762"});
    EXPECT_EQ(extract_citations("hep-ph/9905221 and 1409.0473v2"),
              (std::vector<std::string>{"hep-ph/9905221", "1409.0473"}));
    EXPECT_TRUE(extract_citations("").empty());
}

TEST(ExtractCitations, DeduplicatesAndRejectsEmbeddedNumbers) {
    EXPECT_EQ(extract_citations("1409.0473 1409.0473v3 math.AG/0101001"),
              (std::vector<std::string>{"1409.0473", "math.AG/0101001"}));
    EXPECT_TRUE(extract_citations("version 12.34567.8 or 31409.04731").empty());
}

TEST(SectionTexts, AlignWithEquationSections) {
    std::string src = "Preface.\n\\section{Bayes}\nThe Posterior $p$ is \\emph{nice}.\n\\[x\\]\n\\section{Two}\nEnd.";
    auto texts = extract_section_texts(src);
    ASSERT_EQ(texts.size(), 3u);
    EXPECT_NE(texts[0].find("preface"), std::string::npos);
    EXPECT_NE(texts[1].find("posterior"), std::string::npos);
    EXPECT_EQ(texts[1].find('$'), std::string::npos);
    EXPECT_NE(texts[2].find("end"), std::string::npos);
    EXPECT_EQ(extract_equations(src)[0].section_index, 1);
}

TEST(NormalizeDisplayBody, StripsAlignmentMarkup) {
    EXPECT_EQ(normalize_display_body("a &= b \\label{eq:1} \\nonumber \\\\"), "a  = b");
    EXPECT_NO_THROW(compile_latex_subset(normalize_display_body("x &= y \\tag{3}")));
}

TEST(IngestDirectory, BuildsPapersFromTexFiles) {
    auto dir = temp_dir("ingest");
    write(dir / "hep" / "a.tex",
          "\\section{S}\nText.\n\\begin{equation}a+b=b+a\\end{equation}\n"
          "\\begin{equation}\\frac{\\end{equation}\n"
          "\\begin{thebibliography}{9}\\bibitem{x} arXiv:1111.2222\\end{thebibliography}");
    write(dir / "b.tex", "\\[x^2\\]");
    write(dir / "b.bbl", "hep-th/9901001");
    IngestDiagnostics diag;
    auto corpus = ingest_directory(dir, &diag);
    EXPECT_EQ(diag.files, 2u);
    EXPECT_EQ(diag.compile_failures, 1u);
    ASSERT_EQ(corpus.papers().size(), 2u);
    const auto* a = corpus.find_paper("a");
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->subject, "hep");
    EXPECT_EQ(a->citations, std::vector<std::string>{"1111.2222"});
    EXPECT_EQ(corpus.find_paper("b")->citations, std::vector<std::string>{"hep-th/9901001"});
    ASSERT_NE(corpus.find_equation("a#0"), nullptr);
    EXPECT_EQ(corpus.find_equation("a#0")->section_index, 1);
    EXPECT_EQ(corpus.size(), 2u);
    for (const auto& e : corpus.equations()) EXPECT_EQ(parse_xml(e.mathml).tag, "math");
    fs::remove_all(dir);
}

TEST(IngestDirectory, MissingDirectoryThrows) {
    EXPECT_THROW(ingest_directory("/nonexistent/eqsearch"), InvalidArgument);
}

TEST(Corpus, SectionCountsSumToEquationCount) {
    SyntheticConfig cfg;
    cfg.papers = 20;
    auto corpus = synthetic_corpus(cfg);
    std::size_t total = 0;
    for (const auto& p : corpus.papers())
        for (const auto& s : p.sections) total += s.size();
    EXPECT_EQ(total, corpus.size());
    for (const auto& [from, to] : corpus.citation_edges()) EXPECT_NE(corpus.find_paper(to), nullptr) << from;
}

TEST(Corpus, RejectsDuplicatesAndDanglingSections) {
    EquationRecord e{"e", "p", 0, "x", "<math><mi>x</mi></math>"};
    EXPECT_THROW(Corpus({PaperRecord{"p", "", {{"e"}}, {}, {}}}, {e, e}), InvalidArgument);
    EXPECT_THROW(Corpus({PaperRecord{"p", "", {{"missing"}}, {}, {}}}, {e}), InvalidArgument);
}

TEST(Corpus, SaveLoadRoundTrip) {
    auto corpus = eqtest::grid_corpus(3, 2, 2);
    auto dir = temp_dir("corpus");
    save_corpus(corpus, dir);
    auto back = load_corpus(dir);
    ASSERT_EQ(back.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(back.equations()[i].eq_id, corpus.equations()[i].eq_id);
        EXPECT_EQ(back.equations()[i].mathml, corpus.equations()[i].mathml);
    }
    EXPECT_EQ(back.papers()[0].citations, corpus.papers()[0].citations);
    EXPECT_EQ(back.papers()[1].section_texts, corpus.papers()[1].section_texts);
    fs::remove_all(dir);
}

TEST(Corpus, SplitPapersPartitions) {
    auto corpus = eqtest::grid_corpus(10, 2, 3);
    auto [train, test] = split_papers(corpus, 0.8, 7);
    EXPECT_EQ(train.papers().size(), 8u);
    EXPECT_EQ(test.papers().size(), 2u);
    EXPECT_EQ(train.size() + test.size(), corpus.size());
    for (const auto& p : test.papers()) EXPECT_EQ(train.find_paper(p.paper_id), nullptr);
    auto again = split_papers(corpus, 0.8, 7);
    EXPECT_EQ(again.second.papers()[0].paper_id, test.papers()[0].paper_id);
}

TEST(RelationPairs, Examples) {
    auto pairs = extract_relation_pairs(corpus_of({"a+b = b+a", "E = mc^2", "a = b = c"}), equalities());
    ASSERT_EQ(pairs.size(), 1u);
    EXPECT_EQ(pairs[0].lhs_mathml, compile_latex_subset("a+b"));
    EXPECT_EQ(pairs[0].rhs_mathml, compile_latex_subset("b+a"));
    EXPECT_EQ(pairs[0].relation, Relation::EQ);
    EXPECT_EQ(pairs[0].source_eq_id, "p#0");
}

TEST(RelationPairs, BracketDepthAndPresets) {
    auto corpus = corpus_of({"f(a=b) + c", "a+b < c+d", "a+b \\leq c-d", "x + y + z + w + v + u + t = a"});
    EXPECT_TRUE(extract_relation_pairs(corpus, equalities()).empty());
    auto ineq = extract_relation_pairs(corpus, inequalities());
    ASSERT_EQ(ineq.size(), 2u);
    EXPECT_EQ(ineq[0].relation, Relation::LT);
    EXPECT_EQ(ineq[1].relation, Relation::LEQ);
    EXPECT_EQ(relation_preset("all"), all_relations());
    EXPECT_THROW(relation_preset("nope"), InvalidArgument);
}

TEST(RelationPairs, SidesReconcatenateToOriginal) {
    SyntheticConfig cfg;
    cfg.papers = 30;
    auto corpus = synthetic_corpus(cfg);
    std::size_t splits = 0;
    for (const auto& e : corpus.equations()) {
        auto math = parse_xml(e.mathml);
        auto split = split_at_relation(math, all_relations());
        if (!split) continue;
        ++splits;
        EXPECT_FALSE(split->lhs.empty());
        EXPECT_FALSE(split->rhs.empty());
        XmlNode joined;
        joined.tag = "math";
        joined.children = split->lhs;
        joined.children.push_back(split->relation_token);
        joined.children.insert(joined.children.end(), split->rhs.begin(), split->rhs.end());
        EXPECT_EQ(serialize_xml(joined), serialize_xml(math));
    }
    EXPECT_GT(splits, 50u);
    for (const auto& p : extract_relation_pairs(corpus, all_relations())) {
        auto l = parse_xml(p.lhs_mathml), r = parse_xml(p.rhs_mathml);
        auto nl = static_cast<double>(leaf_token_count(l.children)), nr = static_cast<double>(leaf_token_count(r.children));
        EXPECT_GE(std::min(nl, nr), kMinSideTokens);
        EXPECT_LE(std::max(nl, nr), kMaxSideRatio * std::min(nl, nr));
    }
}

TEST(RelationPairs, SaveLoadRoundTrip) {
    auto pairs = extract_relation_pairs(corpus_of({"a+b = b+a", "a+b \\geq c-d"}), all_relations());
    ASSERT_EQ(pairs.size(), 2u);
    auto path = temp_dir("pairs") / "pairs.jsonl";
    save_pairs(pairs, path);
    auto back = load_pairs(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].relation, Relation::GEQ);
    EXPECT_EQ(back[0].lhs_mathml, pairs[0].lhs_mathml);
    EXPECT_EQ(back[1].source_eq_id, pairs[1].source_eq_id);
    fs::remove_all(path.parent_path());
}
