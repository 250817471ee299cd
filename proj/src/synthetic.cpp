#include "eqsearch/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "eqsearch/error.hpp"
#include "eqsearch/latex_compiler.hpp"

namespace eqsearch {

namespace {

struct Topic {
    std::string name;
    std::vector<std::string> keywords;
    // @A..@Z placeholders are identifiers, #N a small integer.
    std::vector<std::string> variants;
};

const std::vector<Topic>& topics() {
    static const std::vector<Topic> t = {
        {"bayes",
         {"bayes rule", "posterior", "conditional probability"},
         {"P(@A|@B) = \\frac{P(@B|@A) P(@A)}{P(@B)}", "P(@A, @B) = P(@A|@B) P(@B)",
          "P(@A) = \\sum_{@B} P(@A|@B) P(@B)", "P(@B|@A) = \\frac{P(@A, @B)}{P(@A)}",
          "P(@A|@B, @C) = \\frac{P(@B|@A, @C) P(@A|@C)}{P(@B|@C)}"}},
        {"binomial",
         {"binomial coefficient", "binomial theorem", "combinatorics"},
         {"(@A + @B)^{#N} = \\sum_{@C=0}^{#N} \\frac{#N!}{@C!(#N-@C)!} @A^{@C} @B^{#N-@C}",
          "\\frac{@A!}{@B!(@A-@B)!} = \\frac{@A!}{(@A-@B)! @B!}",
          "P(@A=@B) = \\frac{@C!}{@B!(@C-@B)!} @D^{@B} (1-@D)^{@C-@B}",
          "\\sum_{@B=0}^{@A} \\frac{@A!}{@B!(@A-@B)!} = 2^{@A}", "(1+@A)^{@B} \\geq 1 + @B @A"}},
        {"norms",
         {"triangle inequality", "normed space", "metric"},
         {"|@A + @B| \\leq |@A| + |@B|", "\\|@A - @B\\| \\leq \\|@A - @C\\| + \\|@C - @B\\|",
          "\\|@A @B\\| \\leq \\|@A\\| \\|@B\\|", "|\\sum_{@C} @A_{@C}| \\leq \\sum_{@C} |@A_{@C}|",
          "\\|@A\\| = \\max_{@B} |@A_{@B}|"}},
        {"ising",
         {"ising model", "spin system", "partition function"},
         {"H = -J \\sum_{@A} @S_{@A} @S_{@A+1} - h \\sum_{@A} @S_{@A}", "Z = \\sum_{@S} \\exp(-\\beta H(@S))",
          "m = \\frac{1}{#N} \\sum_{@A=1}^{#N} @S_{@A}", "E = -J \\sum_{@A, @B} @S_{@A} @S_{@B}",
          "F = -\\frac{1}{\\beta} \\ln Z"}},
        {"softmax",
         {"softmax", "cross entropy", "classification"},
         {"@P_{@A} = \\frac{\\exp(@Z_{@A})}{\\sum_{@B} \\exp(@Z_{@B})}",
          "\\sigma(@Z)_{@A} = \\frac{e^{@Z_{@A}}}{\\sum_{@B=1}^{#N} e^{@Z_{@B}}}",
          "L = -\\sum_{@A} @Y_{@A} \\log @P_{@A}", "\\frac{\\partial L}{\\partial @Z_{@A}} = @P_{@A} - @Y_{@A}",
          "\\log \\sum_{@A} \\exp(@Z_{@A}) \\geq \\max_{@A} @Z_{@A}"}},
        {"integrals",
         {"integral", "calculus", "antiderivative"},
         {"\\int_{0}^{\\infty} e^{-@A @X} d@X = \\frac{1}{@A}",
          "\\int_{@A}^{@B} @X^{#N} d@X = \\frac{@B^{#N+1} - @A^{#N+1}}{#N+1}",
          "\\int_{-\\infty}^{\\infty} e^{-@X^{2}} d@X = \\sqrt{\\pi}",
          "\\int_{0}^{1} @F(@X) d@X \\leq \\max_{@X} @F(@X)", "\\int @F'(@X) d@X = @F(@X) + @C"}},
        {"trigonometry",
         {"trigonometric identity", "sine", "cosine"},
         {"\\sin^{2} @X + \\cos^{2} @X = 1", "\\sin(@X + @Y) = \\sin @X \\cos @Y + \\cos @X \\sin @Y",
          "\\cos(2 @X) = \\cos^{2} @X - \\sin^{2} @X", "\\tan @X = \\frac{\\sin @X}{\\cos @X}",
          "\\sin(2 @X) = 2 \\sin @X \\cos @X"}},
        {"roots",
         {"quadratic formula", "square root", "arithmetic mean"},
         {"@X = \\frac{-@B \\pm \\sqrt{@B^{2} - 4 @A @C}}{2 @A}", "\\sqrt{@A @B} \\leq \\frac{@A + @B}{2}",
          "|@A| = \\sqrt{@A^{2}}", "\\sqrt{@X} \\sqrt{@Y} = \\sqrt{@X @Y}",
          "\\sqrt{@A^{2} + @B^{2}} \\geq \\frac{@A + @B}{\\sqrt{2}}"}},
        {"logarithms",
         {"logarithm", "log identity", "exponent"},
         {"\\log(@A @B) = \\log @A + \\log @B", "\\log \\frac{@A}{@B} = \\log @A - \\log @B",
          "\\log @A^{@B} = @B \\log @A", "\\ln(1 + @X) \\leq @X", "\\log_{@B} @A = \\frac{\\ln @A}{\\ln @B}"}},
        {"quantum",
         {"quantum mechanics", "uncertainty principle", "planck constant"},
         {"E = \\hbar \\omega", "\\Delta @X \\Delta @P \\geq \\frac{\\hbar}{2}",
          "i \\hbar \\frac{\\partial \\psi}{\\partial t} = H \\psi", "E = \\frac{@P^{2}}{2 m} + V(@X)",
          "\\lambda = \\frac{h}{@P}", "[@X, @P] = i \\hbar"}},
    };
    return t;
}

// Letters that templates never use literally.
const std::string kIdentifierPool = "abcfgknpqrsuvwxyzABCGKMNQRSTUWXY";

std::string instantiate(const std::string& pattern, std::mt19937_64& rng) {
    std::map<char, char> names;
    std::string pool = kIdentifierPool;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t next = 0;
    int number = std::uniform_int_distribution<int>(2, 9)(rng);
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        char c = pattern[i];
        if (c == '@' && i + 1 < pattern.size()) {
            char key = pattern[++i];
            auto it = names.find(key);
            if (it == names.end()) it = names.emplace(key, pool[next++ % pool.size()]).first;
            out += it->second;
        } else if (c == '#' && i + 1 < pattern.size() && pattern[i + 1] == 'N') {
            ++i;
            out += std::to_string(number);
        } else {
            out += c;
        }
    }
    return out;
}

std::string paper_id(std::size_t p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth.%04zu", p);
    return buf;
}

}  // namespace

std::size_t synthetic_topic_count() {
    return topics().size();
}

const std::vector<std::string>& synthetic_topic_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& t : topics()) n.push_back(t.name);
        return n;
    }();
    return names;
}

const std::vector<std::string>& synthetic_topic_keywords(std::size_t topic) {
    return topics().at(topic).keywords;
}

std::string synthetic_equation(std::size_t topic, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& variants = topics().at(topic).variants;
    return instantiate(variants[std::uniform_int_distribution<std::size_t>(0, variants.size() - 1)(rng)], rng);
}

Corpus synthetic_corpus(const SyntheticConfig& config) {
    if (config.papers == 0) throw InvalidArgument("synthetic corpus needs at least one paper");
    if (config.min_sections < 1 || config.max_sections < config.min_sections || config.min_equations < 1 ||
        config.max_equations < config.min_equations || config.variants_per_paper < 1 || config.min_citations < 0 ||
        config.max_citations < config.min_citations)
        throw InvalidArgument("inconsistent synthetic corpus ranges");
    const auto& tp = topics();
    const std::size_t n_topics = tp.size();
    std::mt19937_64 rng(config.seed);
    auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::bernoulli_distribution noise(config.noise);

    std::vector<std::vector<std::size_t>> by_topic(n_topics);
    for (std::size_t p = 0; p < config.papers; ++p) by_topic[p % n_topics].push_back(p);

    std::vector<PaperRecord> papers;
    std::vector<EquationRecord> equations;
    for (std::size_t p = 0; p < config.papers; ++p) {
        const std::size_t topic = p % n_topics;
        const Topic& t = tp[topic];
        PaperRecord paper;
        paper.paper_id = paper_id(p);
        paper.subject = t.name;

        std::vector<std::size_t> style(t.variants.size());
        std::iota(style.begin(), style.end(), std::size_t{0});
        std::shuffle(style.begin(), style.end(), rng);
        style.resize(std::min(style.size(), static_cast<std::size_t>(config.variants_per_paper)));

        int n_sections = uniform_int(config.min_sections, config.max_sections);
        int n_eqs = uniform_int(config.min_equations, config.max_equations);
        paper.sections.resize(static_cast<std::size_t>(n_sections));
        for (int s = 0; s < n_sections; ++s) {
            std::string text = "section " + std::to_string(s + 1) + " of a study on " + t.name + ".";
            for (const auto& kw : t.keywords)
                if (std::bernoulli_distribution(0.7)(rng)) text += " we discuss the " + kw + ".";
            paper.section_texts.push_back(text);
        }
        for (int e = 0; e < n_eqs; ++e) {
            std::string latex;
            if (noise(rng)) {
                std::size_t other = (topic + 1 + std::uniform_int_distribution<std::size_t>(0, n_topics - 2)(rng)) % n_topics;
                const auto& v = tp[other].variants;
                latex = instantiate(v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)], rng);
            } else {
                latex = instantiate(t.variants[style[std::uniform_int_distribution<std::size_t>(0, style.size() - 1)(rng)]], rng);
            }
            // Sections are filled in document order, roughly evenly.
            int section = std::min(n_sections - 1, e * n_sections / n_eqs);
            EquationRecord eq;
            eq.eq_id = paper.paper_id + "#" + std::to_string(e);
            eq.paper_id = paper.paper_id;
            eq.section_index = section;
            eq.latex = latex;
            eq.mathml = compile_latex_subset(latex);
            paper.sections[static_cast<std::size_t>(section)].push_back(eq.eq_id);
            equations.push_back(std::move(eq));
        }
        const auto& peers = by_topic[topic];
        int n_cites = std::min<int>(uniform_int(config.min_citations, config.max_citations),
                                    static_cast<int>(peers.size()) - 1);
        std::vector<std::size_t> candidates;
        for (std::size_t q : peers)
            if (q != p) candidates.push_back(q);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        for (int c = 0; c < n_cites; ++c) paper.citations.push_back(paper_id(candidates[static_cast<std::size_t>(c)]));
        papers.push_back(std::move(paper));
    }
    return Corpus(std::move(papers), std::move(equations));
}

}  // namespace eqsearch
