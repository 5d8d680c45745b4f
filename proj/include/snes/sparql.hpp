#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "snes/operators.hpp"
#include "snes/term.hpp"

namespace snes {

struct Var {
    std::string name;  // without the '?'

    friend bool operator==(const Var&, const Var&) = default;
    friend bool operator<(const Var& a, const Var& b) { return a.name < b.name; }
};

using PatternTerm = std::variant<Var, Term>;

struct TriplePattern {
    PatternTerm subject, predicate, object;

    friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

struct AggExpr {
    AggFn fn = AggFn::Count;
    std::optional<Var> arg;  // nullopt = '*' (COUNT only)
    Var alias;

    friend bool operator==(const AggExpr&, const AggExpr&) = default;
};

using SelectItem = std::variant<Var, AggExpr>;
using FilterOperand = std::variant<Var, Term>;

struct FilterComparison {
    FilterOperand lhs;
    CmpOp op = CmpOp::Eq;
    FilterOperand rhs;

    friend bool operator==(const FilterComparison&, const FilterComparison&) = default;
};

struct OrderKey {
    Var var;
    bool descending = false;

    friend bool operator==(const OrderKey&, const OrderKey&) = default;
};

struct HavingCond {
    std::optional<AggExpr> agg;  // either an aggregate expression ...
    std::optional<Var> var;      // ... or a select alias
    CmpOp op = CmpOp::Eq;
    Term constant;

    // The aggregate's alias is synthetic here and excluded from equality.
    friend bool operator==(const HavingCond& a, const HavingCond& b) {
        using AggKey = std::optional<std::pair<AggFn, std::optional<Var>>>;
        AggKey ka = a.agg ? AggKey(std::make_pair(a.agg->fn, a.agg->arg)) : AggKey();
        AggKey kb = b.agg ? AggKey(std::make_pair(b.agg->fn, b.agg->arg)) : AggKey();
        return ka == kb && a.var == b.var && a.op == b.op && a.constant == b.constant;
    }
};

/// The parsed SPARQL subset. Prefix bindings are syntax sugar and excluded
/// from semantic equality; all names are stored fully expanded.
struct ParsedQuery {
    std::map<std::string, std::string> prefixes;
    bool distinct = false;
    std::vector<SelectItem> select;
    std::optional<std::string> from_iri;
    std::vector<TriplePattern> patterns;
    std::vector<FilterComparison> filters;
    std::vector<Var> group_by;
    std::optional<HavingCond> having;
    std::vector<OrderKey> order_by;
    std::optional<uint64_t> limit, offset;

    bool has_aggregates() const {
        for (const auto& s : select)
            if (std::holds_alternative<AggExpr>(s)) return true;
        return false;
    }

    std::vector<Var> pattern_vars() const {
        std::vector<Var> out;
        auto add = [&](const PatternTerm& t) {
            if (auto* v = std::get_if<Var>(&t))
                if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
        };
        for (const auto& p : patterns) {
            add(p.subject);
            add(p.predicate);
            add(p.object);
        }
        return out;
    }

    friend bool operator==(const ParsedQuery& a, const ParsedQuery& b) {
        return a.distinct == b.distinct && a.select == b.select && a.from_iri == b.from_iri &&
               a.patterns == b.patterns && a.filters == b.filters && a.group_by == b.group_by &&
               a.having == b.having && a.order_by == b.order_by && a.limit == b.limit &&
               a.offset == b.offset;
    }
};

// ---------------------------------------------------------------------------
// Tokenizer

namespace sparql_detail {

enum class Tok { Iri, Pname, Var, String, Integer, Decimal, Word, Punct, End };

struct Token {
    Tok type = Tok::End;
    std::string text;
    unsigned line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(Errc::SyntaxError, msg, tok_.line, tok_.col);
    }

private:
    void advance() {
        skip_ws();
        tok_ = Token{Tok::End, "", line_, col_};
        if (pos_ >= src_.size()) return;
        char c = src_[pos_];
        if (c == '?') return lex_var();
        if (c == '"' || c == '\'') return lex_string(c);
        if (c == '<') return lex_angle();
        if (std::isdigit(uint8_t(c)) || ((c == '+' || c == '-') && pos_ + 1 < src_.size() &&
                                         std::isdigit(uint8_t(src_[pos_ + 1]))))
            return lex_number();
        if (std::isalpha(uint8_t(c)) || c == '_' || c == ':') return lex_word();
        lex_punct();
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
            } else if (std::isspace(uint8_t(c))) {
                bump();
            } else {
                break;
            }
        }
        line_ = cur_line_;
        col_ = cur_col_;
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++cur_line_;
            cur_col_ = 1;
        } else {
            ++cur_col_;
        }
        ++pos_;
    }

    void lex_var() {
        bump();  // '?'
        std::string name;
        while (pos_ < src_.size() && (std::isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_')) {
            name += src_[pos_];
            bump();
        }
        if (name.empty()) throw ParseError(Errc::SyntaxError, "empty variable name", line_, col_);
        tok_ = {Tok::Var, name, line_, col_};
    }

    void lex_string(char quote) {
        bump();
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != quote) {
            if (src_[pos_] == '\\') {
                bump();
                if (pos_ >= src_.size()) break;
                switch (src_[pos_]) {
                    case 'n': out += '\n'; break;
                    case 'r': out += '\r'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\'': out += '\''; break;
                    case '\\': out += '\\'; break;
                    default:
                        throw ParseError(Errc::SyntaxError, "unknown escape", line_, col_);
                }
                bump();
            } else {
                out += src_[pos_];
                bump();
            }
        }
        if (pos_ >= src_.size()) throw ParseError(Errc::SyntaxError, "unterminated string", line_, col_);
        bump();  // closing quote
        tok_ = {Tok::String, out, line_, col_};
    }

    void lex_angle() {
        // '<' starts an IRI when a '>' follows before any whitespace.
        size_t j = pos_ + 1;
        bool iri = false;
        while (j < src_.size()) {
            char c = src_[j];
            if (c == '>') {
                iri = j > pos_ + 1;
                break;
            }
            if (std::isspace(uint8_t(c)) || c == '<' || c == '"') break;
            ++j;
        }
        if (!iri) return lex_punct();
        std::string lex;
        bump();  // '<'
        while (src_[pos_] != '>') {
            lex += src_[pos_];
            bump();
        }
        bump();  // '>'
        tok_ = {Tok::Iri, lex, line_, col_};
    }

    void lex_number() {
        std::string text;
        if (src_[pos_] == '+' || src_[pos_] == '-') {
            text += src_[pos_];
            bump();
        }
        bool decimal = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isdigit(uint8_t(c))) {
                text += c;
                bump();
            } else if (c == '.' && !decimal && pos_ + 1 < src_.size() &&
                       std::isdigit(uint8_t(src_[pos_ + 1]))) {
                decimal = true;
                text += c;
                bump();
            } else if ((c == 'e' || c == 'E') && decimal) {
                text += c;
                bump();
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                    text += src_[pos_];
                    bump();
                }
            } else {
                break;
            }
        }
        tok_ = {decimal ? Tok::Decimal : Tok::Integer, text, line_, col_};
    }

    void lex_word() {
        std::string text;
        while (pos_ < src_.size() && (std::isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_' ||
                                      src_[pos_] == '-')) {
            text += src_[pos_];
            bump();
        }
        if (pos_ < src_.size() && src_[pos_] == ':') {
            bump();
            std::string local;
            while (pos_ < src_.size() &&
                   (std::isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '-' ||
                    src_[pos_] == '.')) {
                local += src_[pos_];
                bump();
            }
            tok_ = {Tok::Pname, text + ":" + local, line_, col_};
            return;
        }
        if (text.empty()) throw ParseError(Errc::SyntaxError, "stray character", line_, col_);
        tok_ = {Tok::Word, text, line_, col_};
    }

    void lex_punct() {
        char c = src_[pos_];
        std::string text(1, c);
        bump();
        auto two = [&](char second) {
            if (pos_ < src_.size() && src_[pos_] == second) {
                text += second;
                bump();
                return true;
            }
            return false;
        };
        if (c == '<' || c == '>') two('=');
        if (c == '!' && !two('=')) throw ParseError(Errc::SyntaxError, "expected '!='", line_, col_);
        tok_ = {Tok::Punct, text, line_, col_};
    }

    std::string_view src_;
    size_t pos_ = 0;
    unsigned cur_line_ = 1, cur_col_ = 1;
    unsigned line_ = 1, col_ = 1;
    Token tok_;
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

} // namespace sparql_detail

// ---------------------------------------------------------------------------
// Parser

class SparqlParser {
public:
    explicit SparqlParser(std::string_view text) : lex_(text) {}

    ParsedQuery parse() {
        parse_prologue();
        parse_select();
        parse_where();
        parse_solution_modifiers();
        if (lex_.peek().type != sparql_detail::Tok::End) lex_.fail("trailing input after query");
        validate();
        return q_;
    }

private:
    using Tok = sparql_detail::Tok;

    static const std::set<std::string>& unsupported_keywords() {
        static const std::set<std::string> kws = {"OPTIONAL", "UNION",    "CONSTRUCT", "ASK",
                                                  "DESCRIBE", "INSERT",   "DELETE",    "MINUS",
                                                  "SERVICE",  "GRAPH",    "BIND",      "VALUES",
                                                  "EXISTS",   "SUBQUERY"};
        return kws;
    }

    bool peek_word(const char* w) const {
        return lex_.peek().type == Tok::Word && sparql_detail::upper(lex_.peek().text) == w;
    }

    bool accept_word(const char* w) {
        if (!peek_word(w)) return false;
        lex_.take();
        return true;
    }

    void expect_word(const char* w) {
        if (!accept_word(w)) lex_.fail(std::string("expected ") + w);
    }

    bool accept_punct(const char* p) {
        if (lex_.peek().type == Tok::Punct && lex_.peek().text == p) {
            lex_.take();
            return true;
        }
        return false;
    }

    void expect_punct(const char* p) {
        if (!accept_punct(p)) lex_.fail(std::string("expected '") + p + "'");
    }

    void reject_unsupported() const {
        if (lex_.peek().type == Tok::Word) {
            std::string u = sparql_detail::upper(lex_.peek().text);
            if (unsupported_keywords().count(u))
                throw ParseError(Errc::UnsupportedConstruct, u + " is outside the supported subset",
                                 lex_.peek().line, lex_.peek().col);
        }
    }

    void parse_prologue() {
        while (accept_word("PREFIX")) {
            if (lex_.peek().type != Tok::Pname) lex_.fail("expected prefix name");
            std::string pname = lex_.take().text;
            std::string prefix = pname.substr(0, pname.find(':'));
            if (lex_.peek().type != Tok::Iri) lex_.fail("expected IRI after prefix");
            q_.prefixes[prefix] = lex_.take().text;
        }
    }

    std::optional<AggFn> peek_agg_fn() const {
        if (lex_.peek().type != Tok::Word) return std::nullopt;
        std::string u = sparql_detail::upper(lex_.peek().text);
        if (u == "COUNT") return AggFn::Count;
        if (u == "SUM") return AggFn::Sum;
        if (u == "AVG") return AggFn::Avg;
        if (u == "MIN") return AggFn::Min;
        if (u == "MAX") return AggFn::Max;
        return std::nullopt;
    }

    AggExpr parse_agg(bool alias_required) {
        AggExpr a;
        a.fn = *peek_agg_fn();
        lex_.take();
        expect_punct("(");
        if (accept_punct("*")) {
            if (a.fn != AggFn::Count) lex_.fail("only COUNT accepts *");
        } else if (lex_.peek().type == Tok::Var) {
            a.arg = Var{lex_.take().text};
        } else {
            lex_.fail("expected variable or * in aggregate");
        }
        expect_punct(")");
        if (accept_word("AS")) {
            if (lex_.peek().type != Tok::Var) lex_.fail("expected alias variable");
            a.alias = Var{lex_.take().text};
        } else if (alias_required) {
            lex_.fail("aggregate needs an AS alias here");
        } else {
            a.alias = Var{std::string("_") + agg_fn_name(a.fn) + std::to_string(auto_alias_++)};
            for (auto& c : a.alias.name) c = char(std::tolower(uint8_t(c)));
        }
        return a;
    }

    void parse_select() {
        reject_unsupported();
        expect_word("SELECT");
        q_.distinct = accept_word("DISTINCT");
        bool star = false;
        while (true) {
            if (lex_.peek().type == Tok::Var) {
                q_.select.push_back(Var{lex_.take().text});
            } else if (peek_agg_fn()) {
                q_.select.push_back(parse_agg(false));
            } else if (accept_punct("(")) {
                if (!peek_agg_fn()) lex_.fail("expected aggregate expression");
                q_.select.push_back(parse_agg(false));
                expect_punct(")");
            } else if (lex_.peek().type == Tok::Punct && lex_.peek().text == "*") {
                lex_.take();
                star = true;
            } else {
                break;
            }
        }
        if (!star && q_.select.empty()) lex_.fail("empty select list");
        star_ = star;
    }

    Term token_to_term(const sparql_detail::Token& t) {
        switch (t.type) {
            case Tok::Iri: return Term::iri(t.text);
            case Tok::Pname: return Term::iri(expand_pname(t));
            case Tok::String: return Term::str(t.text);
            case Tok::Integer: {
                int32_t v = 0;
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
                if (ec != std::errc() || p != t.text.data() + t.text.size())
                    throw ParseError(Errc::SyntaxError, "integer out of 32-bit range", t.line, t.col);
                return Term::integer(v);
            }
            case Tok::Decimal: {
                float v = 0;
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
                if (ec != std::errc()) throw ParseError(Errc::SyntaxError, "bad decimal", t.line, t.col);
                return Term::real(v);
            }
            default:
                throw ParseError(Errc::SyntaxError, "expected an RDF term", t.line, t.col);
        }
    }

    std::string expand_pname(const sparql_detail::Token& t) {
        size_t colon = t.text.find(':');
        std::string prefix = t.text.substr(0, colon);
        auto it = q_.prefixes.find(prefix);
        if (it == q_.prefixes.end())
            throw ParseError(Errc::SyntaxError, "unknown prefix '" + prefix + ":'", t.line, t.col);
        return it->second + t.text.substr(colon + 1);
    }

    PatternTerm parse_pattern_term() {
        reject_unsupported();
        if (lex_.peek().type == Tok::Var) return Var{lex_.take().text};
        return token_to_term(lex_.take());
    }

    FilterOperand parse_filter_operand() {
        if (lex_.peek().type == Tok::Var) return Var{lex_.take().text};
        return token_to_term(lex_.take());
    }

    CmpOp parse_cmp_op() {
        if (lex_.peek().type != Tok::Punct) lex_.fail("expected comparison operator");
        std::string op = lex_.take().text;
        if (op == "<") return CmpOp::Lt;
        if (op == "<=") return CmpOp::Le;
        if (op == "=") return CmpOp::Eq;
        if (op == "!=") return CmpOp::Ne;
        if (op == ">=") return CmpOp::Ge;
        if (op == ">") return CmpOp::Gt;
        lex_.fail("unknown comparison operator '" + op + "'");
    }

    void parse_where() {
        if (accept_word("FROM")) {
            if (lex_.peek().type == Tok::Iri)
                q_.from_iri = lex_.take().text;
            else if (lex_.peek().type == Tok::Pname)
                q_.from_iri = expand_pname(lex_.take());
            else
                lex_.fail("expected IRI after FROM");
        }
        expect_word("WHERE");
        expect_punct("{");
        while (!accept_punct("}")) {
            reject_unsupported();
            if (lex_.peek().type == Tok::End) lex_.fail("unterminated group pattern");
            if (accept_word("FILTER")) {
                expect_punct("(");
                FilterComparison f;
                f.lhs = parse_filter_operand();
                f.op = parse_cmp_op();
                f.rhs = parse_filter_operand();
                expect_punct(")");
                q_.filters.push_back(f);
                accept_punct(".");
                continue;
            }
            TriplePattern p;
            p.subject = parse_pattern_term();
            p.predicate = parse_pattern_term();
            p.object = parse_pattern_term();
            q_.patterns.push_back(p);
            accept_punct(".");
        }
    }

    void parse_solution_modifiers() {
        if (accept_word("GROUP")) {
            expect_word("BY");
            while (lex_.peek().type == Tok::Var) q_.group_by.push_back(Var{lex_.take().text});
            if (q_.group_by.empty()) lex_.fail("GROUP BY needs at least one variable");
        }
        if (accept_word("HAVING")) {
            expect_punct("(");
            HavingCond h;
            if (peek_agg_fn())
                h.agg = parse_agg(false);
            else if (lex_.peek().type == Tok::Var)
                h.var = Var{lex_.take().text};
            else
                lex_.fail("expected aggregate or alias in HAVING");
            h.op = parse_cmp_op();
            h.constant = token_to_term(lex_.take());
            expect_punct(")");
            q_.having = h;
        }
        if (accept_word("ORDER")) {
            expect_word("BY");
            while (true) {
                if (accept_word("ASC")) {
                    expect_punct("(");
                    if (lex_.peek().type != Tok::Var) lex_.fail("expected variable");
                    q_.order_by.push_back({Var{lex_.take().text}, false});
                    expect_punct(")");
                } else if (accept_word("DESC")) {
                    expect_punct("(");
                    if (lex_.peek().type != Tok::Var) lex_.fail("expected variable");
                    q_.order_by.push_back({Var{lex_.take().text}, true});
                    expect_punct(")");
                } else if (lex_.peek().type == Tok::Var) {
                    q_.order_by.push_back({Var{lex_.take().text}, false});
                } else {
                    break;
                }
            }
            if (q_.order_by.empty()) lex_.fail("ORDER BY needs at least one key");
        }
        if (accept_word("LIMIT")) {
            if (lex_.peek().type != Tok::Integer) lex_.fail("expected LIMIT count");
            q_.limit = std::stoull(lex_.take().text);
        }
        if (accept_word("OFFSET")) {
            if (lex_.peek().type != Tok::Integer) lex_.fail("expected OFFSET count");
            q_.offset = std::stoull(lex_.take().text);
        }
        reject_unsupported();
    }

    void validate() {
        if (q_.patterns.empty())
            throw ParseError(Errc::SyntaxError, "query has no triple patterns", 1, 1);
        auto pvars = q_.pattern_vars();
        auto known = [&](const Var& v) {
            return std::find(pvars.begin(), pvars.end(), v) != pvars.end();
        };
        if (star_) {
            if (q_.has_aggregates() || !q_.select.empty())
                throw ParseError(Errc::SyntaxError, "* cannot be mixed with other select items", 1, 1);
            for (const Var& v : pvars) q_.select.push_back(v);
        }
        std::vector<Var> aliases;
        for (const auto& s : q_.select)
            if (auto* a = std::get_if<AggExpr>(&s)) aliases.push_back(a->alias);
        auto fail_var = [&](const Var& v, const char* where) {
            throw ParseError(Errc::SyntaxError,
                             "variable ?" + v.name + " in " + where + " does not occur in the patterns",
                             1, 1);
        };
        for (const auto& s : q_.select) {
            if (auto* v = std::get_if<Var>(&s)) {
                if (!known(*v)) fail_var(*v, "SELECT");
            } else {
                const auto& a = std::get<AggExpr>(s);
                if (a.arg && !known(*a.arg)) fail_var(*a.arg, "aggregate");
            }
        }
        for (const auto& f : q_.filters)
            for (const FilterOperand* o : {&f.lhs, &f.rhs})
                if (auto* v = std::get_if<Var>(o); v && !known(*v)) fail_var(*v, "FILTER");
        for (const Var& v : q_.group_by)
            if (!known(v)) fail_var(v, "GROUP BY");
        for (const auto& k : q_.order_by) {
            bool alias = std::find(aliases.begin(), aliases.end(), k.var) != aliases.end();
            if (!alias && !known(k.var)) fail_var(k.var, "ORDER BY");
        }
        if (q_.having) {
            if (q_.having->var) {
                bool alias = std::find(aliases.begin(), aliases.end(), *q_.having->var) != aliases.end();
                if (!alias) fail_var(*q_.having->var, "HAVING");
            }
            if (q_.having->agg && q_.having->agg->arg && !known(*q_.having->agg->arg))
                fail_var(*q_.having->agg->arg, "HAVING");
        }
        // Aggregates appear only with GROUP BY or as the sole kind of select item.
        if (q_.has_aggregates() && q_.group_by.empty()) {
            for (const auto& s : q_.select)
                if (std::holds_alternative<Var>(s))
                    throw ParseError(Errc::SyntaxError,
                                     "plain select variables need GROUP BY next to aggregates", 1, 1);
        }
        if (!q_.group_by.empty()) {
            for (const auto& s : q_.select)
                if (auto* v = std::get_if<Var>(&s))
                    if (std::find(q_.group_by.begin(), q_.group_by.end(), *v) == q_.group_by.end())
                        throw ParseError(Errc::SyntaxError,
                                         "select variable ?" + v->name + " is not grouped", 1, 1);
        }
    }

    sparql_detail::Lexer lex_;
    ParsedQuery q_;
    bool star_ = false;
    unsigned auto_alias_ = 0;
};

inline ParsedQuery parse_query(std::string_view text) { return SparqlParser(text).parse(); }

// ---------------------------------------------------------------------------
// Canonical printer (full IRIs, round-trips through parse_query)

namespace sparql_detail {

inline std::string pattern_term_text(const PatternTerm& t) {
    if (auto* v = std::get_if<Var>(&t)) return "?" + v->name;
    return term_text(std::get<Term>(t));
}

inline std::string agg_text(const AggExpr& a) {
    std::string s = std::string(agg_fn_name(a.fn)) + "(" + (a.arg ? "?" + a.arg->name : "*") + ")";
    return "(" + s + " AS ?" + a.alias.name + ")";
}

inline std::string operand_text(const FilterOperand& o) {
    if (auto* v = std::get_if<Var>(&o)) return "?" + v->name;
    return term_text(std::get<Term>(o));
}

} // namespace sparql_detail

inline std::string print_query(const ParsedQuery& q) {
    using namespace sparql_detail;
    std::ostringstream os;
    os << "SELECT";
    if (q.distinct) os << " DISTINCT";
    for (const auto& s : q.select) {
        if (auto* v = std::get_if<Var>(&s))
            os << " ?" << v->name;
        else
            os << " " << agg_text(std::get<AggExpr>(s));
    }
    os << "\n";
    if (q.from_iri) os << "FROM <" << *q.from_iri << ">\n";
    os << "WHERE {\n";
    for (const auto& p : q.patterns)
        os << "  " << pattern_term_text(p.subject) << " " << pattern_term_text(p.predicate) << " "
           << pattern_term_text(p.object) << " .\n";
    for (const auto& f : q.filters)
        os << "  FILTER (" << operand_text(f.lhs) << " " << cmp_op_text(f.op) << " "
           << operand_text(f.rhs) << ") .\n";
    os << "}\n";
    if (!q.group_by.empty()) {
        os << "GROUP BY";
        for (const Var& v : q.group_by) os << " ?" << v.name;
        os << "\n";
    }
    if (q.having) {
        os << "HAVING (";
        if (q.having->agg) {
            const AggExpr& a = *q.having->agg;
            os << agg_fn_name(a.fn) << "(" << (a.arg ? "?" + a.arg->name : "*") << ")";
        } else {
            os << "?" << q.having->var->name;
        }
        os << " " << cmp_op_text(q.having->op) << " " << term_text(q.having->constant) << ")\n";
    }
    if (!q.order_by.empty()) {
        os << "ORDER BY";
        for (const auto& k : q.order_by) {
            if (k.descending)
                os << " DESC(?" << k.var.name << ")";
            else
                os << " ?" << k.var.name;
        }
        os << "\n";
    }
    if (q.limit) os << "LIMIT " << *q.limit << "\n";
    if (q.offset) os << "OFFSET " << *q.offset << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Pattern graph

/// The query as a graph: shared terms collapse to one node, one
/// predicate-labelled directed edge per pattern.
struct PatternGraph {
    struct Edge {
        size_t from = 0, to = 0;
        std::string predicate;  // full IRI; empty when the predicate is a variable
        bool predicate_is_var = false;
        size_t pattern_index = 0;
    };

    std::vector<std::string> nodes;  // canonical node keys
    std::vector<Edge> edges;

    size_t out_degree(size_t node) const {
        size_t n = 0;
        for (const auto& e : edges)
            if (e.from == node) ++n;
        return n;
    }
};

inline std::string pattern_node_key(const PatternTerm& t) {
    if (auto* v = std::get_if<Var>(&t)) return "?" + v->name;
    return term_text(std::get<Term>(t));
}

inline PatternGraph to_pattern_graph(const ParsedQuery& q) {
    PatternGraph g;
    auto node_of = [&](const PatternTerm& t) {
        std::string key = pattern_node_key(t);
        for (size_t i = 0; i < g.nodes.size(); ++i)
            if (g.nodes[i] == key) return i;
        g.nodes.push_back(key);
        return g.nodes.size() - 1;
    };
    for (size_t i = 0; i < q.patterns.size(); ++i) {
        const TriplePattern& p = q.patterns[i];
        PatternGraph::Edge e;
        e.from = node_of(p.subject);
        e.to = node_of(p.object);
        e.pattern_index = i;
        if (auto* term = std::get_if<Term>(&p.predicate)) {
            e.predicate = term->lexical();
        } else {
            e.predicate_is_var = true;
        }
        g.edges.push_back(e);
    }
    return g;
}

} // namespace snes
