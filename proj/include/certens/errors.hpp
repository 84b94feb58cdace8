#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace certens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sequence lengths that must agree do not.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its documented domain.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A brute-force routine refused an input that would blow up its cost.
class ResourceGuardError : public Error {
public:
    using Error::Error;
};

/// Input data could not be used (bad file contents, empty inputs, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed text at a known line of an input file.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed text that violates the record schema; carries the field path.
class SchemaError : public DataError {
public:
    SchemaError(std::size_t line, std::string field_path, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + field_path + ": " + what),
          line_(line), field_path_(std::move(field_path)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::size_t line_;
    std::string field_path_;
};

} // namespace certens
