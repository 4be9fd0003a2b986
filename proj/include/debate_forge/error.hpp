#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace debate_forge {

// Base for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    enum class Kind {
        MalformedNumbering,
        MissingStancePrefix,
        EncodingError,
        SchemaError,
        InvalidTree,
    };

    ParseError(Kind kind, const std::string& what, std::size_t line = 0)
        : Error(what), kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    // 1-based input line, 0 when not applicable.
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

class ReferenceError : public Error {
public:
    enum class Kind { DanglingReference, ReferenceCycle };

    ReferenceError(Kind kind, std::string node_id, const std::string& what)
        : Error(what), kind_(kind), node_id_(std::move(node_id)) {}

    Kind kind() const noexcept { return kind_; }
    const std::string& node_id() const noexcept { return node_id_; }

private:
    Kind kind_;
    std::string node_id_;
};

class PatternSyntaxError : public Error {
public:
    PatternSyntaxError(std::size_t position, const std::string& what)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class CorpusError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    enum class Kind {
        Timeout,
        ProtocolError,
        BackendExit,
        Remote,
        EmptyIndex,
        EmptyCorpus,
        InvalidRequest,
        Unavailable,
    };

    BackendError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class DebateError : public Error {
public:
    enum class Kind { Precondition, DebateFull };

    DebateError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class EvalError : public Error {
public:
    enum class Kind { EmptySet, LengthMismatch, UnknownPacket, Format };

    EvalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace debate_forge
