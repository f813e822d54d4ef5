#pragma once

#include <stdexcept>
#include <string>

namespace lvfuse {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class VocabError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Stacks that cannot be fused (layer count or width differ).
class CompatibilityError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class NetworkError : public Error {
public:
    using Error::Error;
};

// Malformed input file. `field` names the offending header field or record
// key, `line` is 1-based for line-oriented formats (0 when not applicable).
class FormatError : public Error {
public:
    FormatError(std::string field, const std::string& what, std::size_t line = 0)
        : Error(compose(field, what, line)), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string compose(const std::string& field, const std::string& what, std::size_t line) {
        std::string msg;
        if (line > 0) msg += "line " + std::to_string(line) + ": ";
        if (!field.empty()) msg += field + ": ";
        return msg + what;
    }

    std::string field_;
    std::size_t line_;
};

}  // namespace lvfuse
