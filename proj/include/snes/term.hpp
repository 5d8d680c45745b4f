#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "snes/error.hpp"

namespace snes {

enum class TermKind : uint8_t { Iri, StringLit, IntLit, FloatLit };

/// An RDF term: IRI, string literal, 32-bit integer or 32-bit float literal.
class Term {
public:
    Term() = default;

    static Term iri(std::string lex) {
        if (lex.empty()) throw Error(Errc::SyntaxError, "empty IRI");
        Term t;
        t.kind_ = TermKind::Iri;
        t.lexical_ = std::move(lex);
        return t;
    }
    static Term str(std::string lex) {
        Term t;
        t.kind_ = TermKind::StringLit;
        t.lexical_ = std::move(lex);
        return t;
    }
    static Term integer(int32_t v) {
        Term t;
        t.kind_ = TermKind::IntLit;
        t.int_ = v;
        return t;
    }
    static Term real(float v) {
        Term t;
        t.kind_ = TermKind::FloatLit;
        t.float_ = v;
        return t;
    }

    TermKind kind() const { return kind_; }
    const std::string& lexical() const { return lexical_; }
    int32_t int_value() const { return int_; }
    float float_value() const { return float_; }

    bool is_iri() const { return kind_ == TermKind::Iri; }
    bool is_numeric() const { return kind_ == TermKind::IntLit || kind_ == TermKind::FloatLit; }
    double as_double() const { return kind_ == TermKind::IntLit ? double(int_) : double(float_); }

    /// Decimal text for numeric kinds, shortest round-tripping form. Floats
    /// always carry a point or exponent so they re-parse as floats.
    std::string value_text() const {
        char buf[48];
        if (kind_ == TermKind::IntLit) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, int_);
            return std::string(buf, p);
        }
        if (kind_ == TermKind::FloatLit) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, float_);
            std::string s(buf, p);
            if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
            return s;
        }
        return lexical_;
    }

    friend bool operator==(const Term& a, const Term& b) {
        if (a.kind_ != b.kind_) return false;
        switch (a.kind_) {
            case TermKind::Iri:
            case TermKind::StringLit: return a.lexical_ == b.lexical_;
            case TermKind::IntLit:    return a.int_ == b.int_;
            case TermKind::FloatLit:  return a.float_ == b.float_;
        }
        return false;
    }
    friend bool operator!=(const Term& a, const Term& b) { return !(a == b); }

private:
    TermKind kind_ = TermKind::Iri;
    std::string lexical_;
    int32_t int_ = 0;
    float float_ = 0.f;
};

/// Total order used for ORDER BY and deterministic tie-breaking:
/// numerics (by value) < string literals < IRIs; equal numerics break on kind.
inline int term_order(const Term& a, const Term& b) {
    auto cls = [](const Term& t) { return t.is_numeric() ? 0 : t.kind() == TermKind::StringLit ? 1 : 2; };
    int ca = cls(a), cb = cls(b);
    if (ca != cb) return ca < cb ? -1 : 1;
    if (ca == 0) {
        double x = a.as_double(), y = b.as_double();
        if (x < y) return -1;
        if (x > y) return 1;
        return a.kind() == b.kind() ? 0 : (a.kind() == TermKind::IntLit ? -1 : 1);
    }
    int c = a.lexical().compare(b.lexical());
    return c < 0 ? -1 : c > 0 ? 1 : 0;
}

enum class CmpOp : uint8_t { Lt = 0, Le = 1, Eq = 2, Ne = 3, Ge = 4, Gt = 5 };

inline const char* cmp_op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Ge: return ">=";
        case CmpOp::Gt: return ">";
    }
    return "?";
}

inline bool cmp_holds(int ord, CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return ord < 0;
        case CmpOp::Le: return ord <= 0;
        case CmpOp::Eq: return ord == 0;
        case CmpOp::Ne: return ord != 0;
        case CmpOp::Ge: return ord >= 0;
        case CmpOp::Gt: return ord > 0;
    }
    return false;
}

inline std::optional<double> parse_number(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

/// FILTER comparison semantics shared by the reference evaluator and the
/// base-station finalizer. Numerics compare by value with int->float
/// promotion; a string literal facing a numeric is coerced to a number
/// (the paper writes FILTER (?temp > '20')). Any other kind mixture makes
/// the comparison false, dropping the row.
inline bool compare_terms(const Term& a, CmpOp op, const Term& b) {
    auto numeric_of = [](const Term& t) -> std::optional<double> {
        if (t.is_numeric()) return t.as_double();
        if (t.kind() == TermKind::StringLit) return parse_number(t.lexical());
        return std::nullopt;
    };
    if (a.is_numeric() || b.is_numeric()) {
        auto x = numeric_of(a), y = numeric_of(b);
        if (!x || !y) return false;
        int ord = *x < *y ? -1 : *x > *y ? 1 : 0;
        return cmp_holds(ord, op);
    }
    if (a.kind() != b.kind()) return false;
    return cmp_holds(a.lexical().compare(b.lexical()) < 0 ? -1
                     : a.lexical() == b.lexical()         ? 0
                                                          : 1,
                     op);
}

/// A subject-predicate-object triple; subject and predicate must be IRIs.
struct Triple {
    Term subject;
    Term predicate;
    Term object;

    bool well_formed() const { return subject.is_iri() && predicate.is_iri(); }

    friend bool operator==(const Triple& a, const Triple& b) {
        return a.subject == b.subject && a.predicate == b.predicate && a.object == b.object;
    }
};

inline std::string escape_string_literal(std::string_view s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"':  out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:   out += c;
        }
    }
    return out;
}

/// Renders a term in the N-Triples-style line syntax used for datasets.
inline std::string term_text(const Term& t) {
    switch (t.kind()) {
        case TermKind::Iri:       return "<" + t.lexical() + ">";
        case TermKind::StringLit: return "\"" + escape_string_literal(t.lexical()) + "\"";
        default:                  return t.value_text();
    }
}

inline std::string triple_text(const Triple& t) {
    return term_text(t.subject) + " " + term_text(t.predicate) + " " + term_text(t.object) + " .";
}

namespace detail {

inline void skip_ws(std::string_view s, size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline Term parse_line_term(std::string_view s, size_t& i, unsigned line_no) {
    skip_ws(s, i);
    if (i >= s.size()) throw ParseError(Errc::SyntaxError, "unexpected end of line", line_no, unsigned(i + 1));
    char c = s[i];
    if (c == '<') {
        size_t end = s.find('>', i + 1);
        if (end == std::string_view::npos)
            throw ParseError(Errc::SyntaxError, "unterminated IRI", line_no, unsigned(i + 1));
        std::string lex(s.substr(i + 1, end - i - 1));
        i = end + 1;
        if (lex.empty()) throw ParseError(Errc::SyntaxError, "empty IRI", line_no, unsigned(i));
        return Term::iri(std::move(lex));
    }
    if (c == '"') {
        std::string lex;
        size_t j = i + 1;
        while (j < s.size() && s[j] != '"') {
            if (s[j] == '\\') {
                if (j + 1 >= s.size())
                    throw ParseError(Errc::SyntaxError, "dangling escape", line_no, unsigned(j + 1));
                char e = s[j + 1];
                switch (e) {
                    case 'n': lex += '\n'; break;
                    case 'r': lex += '\r'; break;
                    case 't': lex += '\t'; break;
                    case '"': lex += '"'; break;
                    case '\\': lex += '\\'; break;
                    default:
                        throw ParseError(Errc::SyntaxError, "unknown escape", line_no, unsigned(j + 1));
                }
                j += 2;
            } else {
                lex += s[j++];
            }
        }
        if (j >= s.size())
            throw ParseError(Errc::SyntaxError, "unterminated string literal", line_no, unsigned(i + 1));
        i = j + 1;
        return Term::str(std::move(lex));
    }
    // Bare number: integer, or float when it carries a point/exponent.
    size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    std::string_view tok = s.substr(start, i - start);
    bool floaty = tok.find('.') != std::string_view::npos || tok.find('e') != std::string_view::npos ||
                  tok.find('E') != std::string_view::npos;
    if (floaty) {
        float v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw ParseError(Errc::SyntaxError, "bad float literal", line_no, unsigned(start + 1));
        return Term::real(v);
    }
    int32_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw ParseError(Errc::SyntaxError, "bad numeric literal", line_no, unsigned(start + 1));
    return Term::integer(v);
}

} // namespace detail

/// Parses one dataset line: `<s> <p> <o|"lit"|number> .`
/// Blank lines and `#` comments yield nullopt.
inline std::optional<Triple> parse_triple_line(std::string_view line, unsigned line_no = 1) {
    size_t i = 0;
    detail::skip_ws(line, i);
    if (i >= line.size() || line[i] == '#') return std::nullopt;
    Triple t;
    t.subject = detail::parse_line_term(line, i, line_no);
    t.predicate = detail::parse_line_term(line, i, line_no);
    t.object = detail::parse_line_term(line, i, line_no);
    detail::skip_ws(line, i);
    if (i >= line.size() || line[i] != '.')
        throw ParseError(Errc::SyntaxError, "missing terminating '.'", line_no, unsigned(i + 1));
    ++i;
    detail::skip_ws(line, i);
    if (i != line.size() && line[i] != '#')
        throw ParseError(Errc::SyntaxError, "trailing garbage", line_no, unsigned(i + 1));
    if (!t.well_formed())
        throw ParseError(Errc::SyntaxError, "subject and predicate must be IRIs", line_no, 1);
    return t;
}

} // namespace snes

template <>
struct std::hash<snes::Term> {
    size_t operator()(const snes::Term& t) const {
        size_t h = std::hash<int>()(int(t.kind()));
        switch (t.kind()) {
            case snes::TermKind::Iri:
            case snes::TermKind::StringLit:
                h ^= std::hash<std::string>()(t.lexical()) * 1099511628211ULL;
                break;
            case snes::TermKind::IntLit: h ^= std::hash<int32_t>()(t.int_value()); break;
            case snes::TermKind::FloatLit: h ^= std::hash<float>()(t.float_value()); break;
        }
        return h;
    }
};
