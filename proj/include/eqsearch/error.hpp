#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eqsearch {

// Base for every error raised by the library. The CLI maps these to exit
// code 1 (user error); anything else is treated as internal.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A token the LaTeX subset compiler does not understand.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, const std::string& what)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Brace mismatch in LaTeX input. Position points at the offending brace
// (or end of input for an unclosed group).
class UnbalancedGroup : public SyntaxError {
public:
    UnbalancedGroup(std::size_t position, const std::string& what) : SyntaxError(position, what) {}
};

class MalformedXml : public Error {
public:
    MalformedXml(std::size_t position, const std::string& what)
        : Error("malformed XML: " + what + " at offset " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("corpus contains no equations") {}
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class DegenerateBatch : public Error {
public:
    using Error::Error;
};

class VocabularyMismatch : public Error {
public:
    using Error::Error;
};

class ExhaustedRetries : public Error {
public:
    using Error::Error;
};

// Malformed JSON Lines records, bad CLI values, violated preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace eqsearch
