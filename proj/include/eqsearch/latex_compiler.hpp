#pragma once

// Deterministic LaTeX-subset to Presentation MathML compiler.
//
// Supported input: latin letters, digits, greek letters, \frac, ^, _, \sqrt,
// big operators (\sum, \int, \prod, \min, \max, \lim), relations, binary
// operators, delimiters, font commands (\mathbb, \mathcal, \mathbf, \mathrm),
// named functions (\log, \exp, \sin, ...), \hbar and spacing commands.
// Output uses only the tags math, mrow, mi, mn, mo, mfrac, msup, msub,
// msubsup, msqrt and munderover.

#include <string>
#include <string_view>

#include "eqsearch/xml.hpp"

namespace eqsearch {

// Throws SyntaxError (unsupported token) or UnbalancedGroup (brace mismatch),
// both carrying the byte offset into `latex`.
XmlNode compile_latex_tree(std::string_view latex);

std::string compile_latex_subset(std::string_view latex);

}  // namespace eqsearch
