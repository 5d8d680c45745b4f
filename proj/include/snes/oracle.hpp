#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snes/sparql.hpp"
#include "snes/term.hpp"

namespace snes {

/// A solution table: one column per selected variable, multiset semantics.
/// Cells are unbound only for aggregates over empty input.
struct ResultTable {
    std::vector<std::string> vars;
    std::vector<std::vector<std::optional<Term>>> rows;
    bool ordered = false;

    size_t column_of(const std::string& var) const {
        for (size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == var) return i;
        throw Error(Errc::SchemaMismatch, "no column ?" + var);
    }
};

inline int cell_order(const std::optional<Term>& a, const std::optional<Term>& b) {
    if (!a && !b) return 0;
    if (!a) return -1;
    if (!b) return 1;
    return term_order(*a, *b);
}

inline bool cell_equal(const std::optional<Term>& a, const std::optional<Term>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || *a == *b;
}

inline int row_order(const std::vector<std::optional<Term>>& a,
                     const std::vector<std::optional<Term>>& b) {
    for (size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        if (int c = cell_order(a[i], b[i])) return c;
    return a.size() < b.size() ? -1 : a.size() > b.size() ? 1 : 0;
}

namespace oracle_detail {

using Binding = std::map<std::string, Term>;

inline bool match_term(const PatternTerm& pt, const Term& t, Binding& b) {
    if (auto* term = std::get_if<Term>(&pt)) return *term == t;
    const std::string& var = std::get<Var>(pt).name;
    auto it = b.find(var);
    if (it != b.end()) return it->second == t;
    b[var] = t;
    return true;
}

inline std::optional<Term> aggregate_over(const AggExpr& agg, const std::vector<Binding>& group) {
    if (agg.fn == AggFn::Count) return Term::integer(int32_t(group.size()));
    if (!agg.arg) return std::nullopt;
    const std::string& var = agg.arg->name;
    if (agg.fn == AggFn::Min || agg.fn == AggFn::Max) {
        std::optional<Term> best;
        for (const Binding& b : group) {
            const Term& v = b.at(var);
            if (!best) {
                best = v;
                continue;
            }
            int c = term_order(v, *best);
            if ((agg.fn == AggFn::Min && c < 0) || (agg.fn == AggFn::Max && c > 0)) best = v;
        }
        return best;
    }
    // SUM / AVG are numeric; any non-numeric contribution leaves them unbound.
    bool all_int = true;
    int64_t isum = 0;
    double fsum = 0;
    for (const Binding& b : group) {
        const Term& v = b.at(var);
        if (!v.is_numeric()) return std::nullopt;
        if (v.kind() == TermKind::IntLit) {
            isum += v.int_value();
        } else {
            all_int = false;
        }
        fsum += v.as_double();
    }
    if (agg.fn == AggFn::Sum) {
        if (group.empty()) return Term::integer(0);
        return all_int ? Term::integer(int32_t(isum)) : Term::real(float(fsum));
    }
    if (group.empty()) return std::nullopt;
    return Term::real(float(fsum / double(group.size())));
}

inline bool filter_holds(const FilterComparison& f, const Binding& b) {
    auto value = [&](const FilterOperand& o) -> const Term& {
        if (auto* t = std::get_if<Term>(&o)) return *t;
        return b.at(std::get<Var>(o).name);
    };
    return compare_terms(value(f.lhs), f.op, value(f.rhs));
}

} // namespace oracle_detail

/// Textbook nested-loop evaluation of the supported subset over one
/// dataset: BGPs, filters, grouping, aggregates and solution modifiers.
/// Deliberately unoptimized; this is the trust anchor for every
/// equivalence test.
inline ResultTable eval_reference(const std::vector<Triple>& dataset, const ParsedQuery& q) {
    using namespace oracle_detail;

    std::vector<Binding> bindings{Binding{}};
    for (const TriplePattern& p : q.patterns) {
        std::vector<Binding> next;
        for (const Binding& b : bindings) {
            for (const Triple& t : dataset) {
                Binding attempt = b;
                if (match_term(p.subject, t.subject, attempt) &&
                    match_term(p.predicate, t.predicate, attempt) &&
                    match_term(p.object, t.object, attempt))
                    next.push_back(std::move(attempt));
            }
        }
        bindings = std::move(next);
    }

    for (const FilterComparison& f : q.filters) {
        std::vector<Binding> kept;
        for (Binding& b : bindings)
            if (filter_holds(f, b)) kept.push_back(std::move(b));
        bindings = std::move(kept);
    }

    // Solution rows carry every column later stages may touch: either the
    // grouped/aggregated columns or all pattern variables.
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<Term>>> rows;

    if (q.has_aggregates() || !q.group_by.empty()) {
        for (const Var& v : q.group_by) columns.push_back(v.name);
        std::vector<AggExpr> aggs;
        for (const auto& s : q.select)
            if (auto* a = std::get_if<AggExpr>(&s)) aggs.push_back(*a);
        if (q.having && q.having->agg) {
            bool present = false;
            for (const AggExpr& a : aggs)
                if (a.fn == q.having->agg->fn && a.arg == q.having->agg->arg) present = true;
            if (!present) aggs.push_back(*q.having->agg);
        }
        for (const AggExpr& a : aggs) columns.push_back(a.alias.name);

        std::map<std::string, std::pair<std::vector<Term>, std::vector<Binding>>> groups;
        auto key_text = [](const std::vector<Term>& key) {
            std::string s;
            for (const Term& t : key) {
                s += char('0' + int(t.kind()));
                s += t.lexical();
                s += '\x1f';
                s += t.value_text();
                s += '\x1e';
            }
            return s;
        };
        if (q.group_by.empty()) {
            groups[""] = {{}, bindings};  // one global group, present even when empty
        } else {
            for (Binding& b : bindings) {
                std::vector<Term> key;
                for (const Var& v : q.group_by) key.push_back(b.at(v.name));
                auto& g = groups[key_text(key)];
                g.first = key;
                g.second.push_back(std::move(b));
            }
        }
        for (const auto& [key_str, group] : groups) {
            const auto& key = group.first;
            const auto& members = group.second;
            std::vector<std::optional<Term>> row;
            for (const Term& t : key) row.push_back(t);
            std::map<std::string, std::optional<Term>> agg_values;
            for (const AggExpr& a : aggs) {
                auto v = aggregate_over(a, members);
                agg_values[a.alias.name] = v;
                row.push_back(v);
            }
            if (q.having) {
                std::optional<Term> subject;
                if (q.having->agg)
                    subject = aggregate_over(*q.having->agg, members);
                else
                    subject = agg_values.count(q.having->var->name)
                                  ? agg_values[q.having->var->name]
                                  : std::optional<Term>{};
                if (!subject || !compare_terms(*subject, q.having->op, q.having->constant)) continue;
            }
            rows.push_back(std::move(row));
        }
    } else {
        for (const Var& v : q.pattern_vars()) columns.push_back(v.name);
        for (const Binding& b : bindings) {
            std::vector<std::optional<Term>> row;
            for (const std::string& c : columns) row.push_back(b.at(c));
            rows.push_back(std::move(row));
        }
    }

    auto col_index = [&](const std::string& name) -> std::optional<size_t> {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    };

    ResultTable out;
    out.ordered = !q.order_by.empty();
    std::vector<size_t> projection;
    for (const auto& s : q.select) {
        if (auto* v = std::get_if<Var>(&s)) {
            out.vars.push_back(v->name);
            projection.push_back(*col_index(v->name));
        } else {
            const auto& a = std::get<AggExpr>(s);
            out.vars.push_back(a.alias.name);
            projection.push_back(*col_index(a.alias.name));
        }
    }

    if (!q.order_by.empty()) {
        std::vector<size_t> keys;
        std::vector<bool> desc;
        for (const OrderKey& k : q.order_by) {
            if (auto i = col_index(k.var.name)) {
                keys.push_back(*i);
                desc.push_back(k.descending);
            }
        }
        // Ties break on the projected row: solutions that differ only in
        // unprojected columns are interchangeable, so every implementation
        // ordering this way yields the same list.
        std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
            for (size_t i = 0; i < keys.size(); ++i) {
                int c = cell_order(a[keys[i]], b[keys[i]]);
                if (c != 0) return desc[i] ? c > 0 : c < 0;
            }
            for (size_t p : projection)
                if (int c = cell_order(a[p], b[p])) return c < 0;
            return false;
        });
    }

    for (const auto& row : rows) {
        std::vector<std::optional<Term>> projected;
        for (size_t i : projection) projected.push_back(row[i]);
        out.rows.push_back(std::move(projected));
    }

    if (q.distinct) {
        std::vector<std::vector<std::optional<Term>>> unique;
        for (const auto& row : out.rows) {
            bool seen = false;
            for (const auto& u : unique)
                if (u.size() == row.size()) {
                    bool eq = true;
                    for (size_t i = 0; i < row.size(); ++i)
                        if (!cell_equal(u[i], row[i])) eq = false;
                    if (eq) seen = true;
                }
            if (!seen) unique.push_back(row);
        }
        out.rows = std::move(unique);
    }

    if (q.offset) out.rows.erase(out.rows.begin(), out.rows.begin() + std::min<size_t>(*q.offset, out.rows.size()));
    if (q.limit && out.rows.size() > *q.limit) out.rows.resize(*q.limit);
    return out;
}

/// Canonical form for multiset comparison: rows sorted unless the query
/// ordered them.
inline ResultTable canonical(ResultTable t) {
    if (!t.ordered)
        std::sort(t.rows.begin(), t.rows.end(),
                  [](const auto& a, const auto& b) { return row_order(a, b) < 0; });
    return t;
}

/// Multiset equality with a relative tolerance on float cells (AVG emission
/// is 32-bit).
inline bool tables_equal(const ResultTable& a, const ResultTable& b, double float_rel_tol = 1e-6) {
    if (a.vars != b.vars || a.rows.size() != b.rows.size()) return false;
    ResultTable ca = canonical(a), cb = canonical(b);
    for (size_t r = 0; r < ca.rows.size(); ++r) {
        const auto& ra = ca.rows[r];
        const auto& rb = cb.rows[r];
        if (ra.size() != rb.size()) return false;
        for (size_t i = 0; i < ra.size(); ++i) {
            if (ra[i].has_value() != rb[i].has_value()) return false;
            if (!ra[i]) continue;
            if (*ra[i] == *rb[i]) continue;
            if (ra[i]->kind() == TermKind::FloatLit && rb[i]->kind() == TermKind::FloatLit) {
                double x = ra[i]->float_value(), y = rb[i]->float_value();
                double scale = std::max({1.0, std::abs(x), std::abs(y)});
                if (std::abs(x - y) / scale <= float_rel_tol) continue;
            }
            return false;
        }
    }
    return true;
}

} // namespace snes
