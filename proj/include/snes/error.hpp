#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace snes {

enum class Errc : uint8_t {
    CapacityExceeded,
    TypeMismatch,
    RowTooWide,
    BufferOverflow,
    MalformedTree,
    SpecMismatch,
    ParamsTooLong,
    OperatorExceedsMtu,
    TooManyOperators,
    MessageExceedsMtu,
    Truncated,
    UnknownType,
    BadArity,
    SyntaxError,
    UnsupportedConstruct,
    Unanswerable,
    SchemaMismatch,
    UpstreamTimeout,
    IoError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::CapacityExceeded:    return "CapacityExceeded";
        case Errc::TypeMismatch:        return "TypeMismatch";
        case Errc::RowTooWide:          return "RowTooWide";
        case Errc::BufferOverflow:      return "BufferOverflow";
        case Errc::MalformedTree:       return "MalformedTree";
        case Errc::SpecMismatch:        return "SpecMismatch";
        case Errc::ParamsTooLong:       return "ParamsTooLong";
        case Errc::OperatorExceedsMtu:  return "OperatorExceedsMtu";
        case Errc::TooManyOperators:    return "TooManyOperators";
        case Errc::MessageExceedsMtu:   return "MessageExceedsMtu";
        case Errc::Truncated:           return "Truncated";
        case Errc::UnknownType:         return "UnknownType";
        case Errc::BadArity:            return "BadArity";
        case Errc::SyntaxError:         return "SyntaxError";
        case Errc::UnsupportedConstruct:return "UnsupportedConstruct";
        case Errc::Unanswerable:        return "Unanswerable";
        case Errc::SchemaMismatch:      return "SchemaMismatch";
        case Errc::UpstreamTimeout:     return "UpstreamTimeout";
        case Errc::IoError:             return "IoError";
    }
    return "Unknown";
}

/// Base for all typed errors raised by the library.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

/// Parse error carrying a source position (1-based).
class ParseError : public Error {
public:
    ParseError(Errc code, const std::string& msg, unsigned line, unsigned column)
        : Error(code, msg + " at " + std::to_string(line) + ":" + std::to_string(column)),
          line_(line), column_(column) {}

    unsigned line() const { return line_; }
    unsigned column() const { return column_; }

private:
    unsigned line_;
    unsigned column_;
};

} // namespace snes
