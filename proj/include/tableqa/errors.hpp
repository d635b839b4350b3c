#pragma once

#include <stdexcept>
#include <string>

namespace tqa {

// Error kinds map onto CLI exit codes: usage errors are handled by the
// argument parser, everything below is either a data error (exit 2) or
// an internal error (exit 3).
enum class ErrorKind {
    Parse,            // malformed input file / SQL text
    Validation,       // well-formed but violates an invariant
    NameResolution,   // unknown table / column / case id
    UnsupportedSyntax,// SQL outside the supported subset
    NameCollision,    // duplicate table name in a store
    NotFound,         // missing file, store, or case
    EmptyInput,       // empty document / table / index
    Io,               // filesystem failure
    Generation,       // SQL generation could not resolve a term
    Internal
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool is_data_error() const noexcept { return kind_ != ErrorKind::Internal; }

private:
    ErrorKind kind_;
};

inline Error parse_error(const std::string& msg) { return Error(ErrorKind::Parse, msg); }
inline Error validation_error(const std::string& msg) { return Error(ErrorKind::Validation, msg); }
inline Error name_resolution_error(const std::string& msg) { return Error(ErrorKind::NameResolution, msg); }
inline Error unsupported_syntax_error(const std::string& msg) { return Error(ErrorKind::UnsupportedSyntax, msg); }
inline Error name_collision_error(const std::string& msg) { return Error(ErrorKind::NameCollision, msg); }
inline Error not_found_error(const std::string& msg) { return Error(ErrorKind::NotFound, msg); }
inline Error empty_input_error(const std::string& msg) { return Error(ErrorKind::EmptyInput, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }
inline Error internal_error(const std::string& msg) { return Error(ErrorKind::Internal, msg); }

// NL2SQL generation failure; the unresolved term is what the flywheel
// collects into the failure-case file.
class GenerationFailure : public Error {
public:
    GenerationFailure(std::string term, const std::string& msg)
        : Error(ErrorKind::Generation, msg), term_(std::move(term)) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

} // namespace tqa
