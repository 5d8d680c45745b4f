#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "snes/hash.hpp"
#include "snes/sparql.hpp"
#include "snes/wire.hpp"

namespace snes {

// ---------------------------------------------------------------------------
// Data model graph

/// Directed graph describing what devices can answer locally: unlabelled
/// nodes, predicate-labelled edges. Each edge may carry the object type of
/// its predicate (iri when omitted), which types the projection masks.
struct ModelEdge {
    std::string from, to;
    std::string predicate;
    TermKind object_type = TermKind::Iri;
};

class DataModelGraph {
public:
    void add_edge(std::string from, std::string to, std::string predicate,
                  TermKind object_type = TermKind::Iri) {
        auto it = object_types_.find(predicate);
        if (it != object_types_.end() && it->second != object_type)
            throw Error(Errc::SchemaMismatch, "predicate " + predicate + " has two object types");
        object_types_[predicate] = object_type;
        nodes_.insert(from);
        nodes_.insert(to);
        edges_.push_back({std::move(from), std::move(to), std::move(predicate), object_type});
    }

    const std::vector<ModelEdge>& edges() const { return edges_; }
    const std::set<std::string>& nodes() const { return nodes_; }
    bool empty() const { return edges_.empty(); }

    bool has_predicate(const std::string& iri) const { return object_types_.count(iri) != 0; }

    std::optional<TermKind> object_type(const std::string& predicate) const {
        auto it = object_types_.find(predicate);
        if (it == object_types_.end()) return std::nullopt;
        return it->second;
    }

    /// File format: `node_id predicate_iri node_id [iri|string|int|float]`.
    static DataModelGraph parse(std::istream& in) {
        DataModelGraph g;
        std::string line;
        unsigned line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::istringstream ls(line);
            std::string from, pred, to, type_s;
            if (!(ls >> from)) continue;
            if (from[0] == '#') continue;
            if (!(ls >> pred >> to))
                throw ParseError(Errc::SyntaxError, "model line needs: node predicate node", line_no, 1);
            TermKind kind = TermKind::Iri;
            if (ls >> type_s) {
                if (type_s == "iri") kind = TermKind::Iri;
                else if (type_s == "string") kind = TermKind::StringLit;
                else if (type_s == "int") kind = TermKind::IntLit;
                else if (type_s == "float") kind = TermKind::FloatLit;
                else throw ParseError(Errc::SyntaxError, "unknown object type " + type_s, line_no, 1);
            }
            g.add_edge(from, to, pred, kind);
        }
        return g;
    }

    static DataModelGraph parse_text(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

private:
    std::set<std::string> nodes_;
    std::vector<ModelEdge> edges_;
    std::map<std::string, TermKind> object_types_;
};

/// Maps IRI namespace prefixes to external SPARQL endpoints.
/// File format: `namespace_prefix endpoint_url`.
class EndpointMap {
public:
    void add(std::string prefix, std::string url) { entries_.emplace_back(std::move(prefix), std::move(url)); }

    std::optional<std::string> lookup(const std::string& iri) const {
        for (const auto& [prefix, url] : entries_)
            if (iri.rfind(prefix, 0) == 0) return url;
        return std::nullopt;
    }

    bool empty() const { return entries_.empty(); }

    static EndpointMap parse(std::istream& in) {
        EndpointMap m;
        std::string line;
        unsigned line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::istringstream ls(line);
            std::string prefix, url;
            if (!(ls >> prefix)) continue;
            if (prefix[0] == '#') continue;
            if (!(ls >> url))
                throw ParseError(Errc::SyntaxError, "endpoint line needs: prefix url", line_no, 1);
            m.add(prefix, url);
        }
        return m;
    }

    static EndpointMap parse_text(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// Maximal locally-answerable subgraph matching

namespace plandetail {

/// Does the pattern-edge subset embed into the model graph? A single
/// pattern is local as soon as its edge label exists; a connected subset
/// maps its nodes injectively to model nodes such that every query edge has
/// a model edge with the same predicate and direction. Exact backtracking;
/// query shapes are small.
inline bool embeds(const DataModelGraph& model, const PatternGraph& pg,
                   const std::vector<size_t>& edge_subset) {
    if (edge_subset.size() == 1) return model.has_predicate(pg.edges[edge_subset[0]].predicate);
    std::vector<size_t> qnodes;
    for (size_t ei : edge_subset) {
        for (size_t n : {pg.edges[ei].from, pg.edges[ei].to})
            if (std::find(qnodes.begin(), qnodes.end(), n) == qnodes.end()) qnodes.push_back(n);
    }
    std::vector<std::string> mnodes(model.nodes().begin(), model.nodes().end());
    std::map<size_t, size_t> assign;  // query node -> model node index
    std::vector<bool> used(mnodes.size(), false);

    auto edges_consistent = [&]() {
        for (size_t ei : edge_subset) {
            const auto& e = pg.edges[ei];
            auto f = assign.find(e.from);
            auto t = assign.find(e.to);
            if (f == assign.end() || t == assign.end()) continue;
            bool found = false;
            for (const ModelEdge& me : model.edges()) {
                if (me.predicate == e.predicate && me.from == mnodes[f->second] &&
                    me.to == mnodes[t->second]) {
                    found = true;
                    break;
                }
            }
            if (!found) return false;
        }
        return true;
    };

    std::function<bool(size_t)> place = [&](size_t i) {
        if (i == qnodes.size()) return true;
        for (size_t m = 0; m < mnodes.size(); ++m) {
            if (used[m]) continue;
            assign[qnodes[i]] = m;
            used[m] = true;
            if (edges_consistent() && place(i + 1)) return true;
            used[m] = false;
            assign.erase(qnodes[i]);
        }
        return false;
    };
    return place(0);
}

inline bool subset_connected(const PatternGraph& pg, const std::vector<size_t>& edge_subset) {
    if (edge_subset.empty()) return false;
    std::set<size_t> todo(edge_subset.begin(), edge_subset.end());
    std::vector<size_t> stack{*todo.begin()};
    std::set<size_t> nodes;
    todo.erase(todo.begin());
    while (!stack.empty()) {
        size_t e = stack.back();
        stack.pop_back();
        nodes.insert(pg.edges[e].from);
        nodes.insert(pg.edges[e].to);
        for (auto it = todo.begin(); it != todo.end();) {
            const auto& cand = pg.edges[*it];
            if (nodes.count(cand.from) || nodes.count(cand.to)) {
                stack.push_back(*it);
                it = todo.erase(it);
            } else {
                ++it;
            }
        }
    }
    return todo.empty();
}

} // namespace plandetail

/// Computes the maximal connected pattern subsets (by inclusion) whose
/// edge-labelled shape embeds into the model. Only patterns with constant
/// predicates known to the model participate.
inline std::vector<std::vector<size_t>> match_local(const DataModelGraph& model,
                                                    const PatternGraph& pg,
                                                    const std::vector<size_t>& candidate_patterns) {
    using namespace plandetail;
    std::vector<size_t> cands;
    for (size_t pi : candidate_patterns) {
        const auto& e = pg.edges[pi];
        if (!e.predicate_is_var && model.has_predicate(e.predicate)) cands.push_back(pi);
    }
    if (cands.empty()) return {};

    // Connected components of the candidate edges (via shared graph nodes).
    std::vector<std::vector<size_t>> components;
    {
        std::set<size_t> left(cands.begin(), cands.end());
        while (!left.empty()) {
            std::vector<size_t> comp{*left.begin()};
            left.erase(left.begin());
            std::set<size_t> nodes{pg.edges[comp[0]].from, pg.edges[comp[0]].to};
            bool grew = true;
            while (grew) {
                grew = false;
                for (auto it = left.begin(); it != left.end();) {
                    const auto& e = pg.edges[*it];
                    if (nodes.count(e.from) || nodes.count(e.to)) {
                        nodes.insert(e.from);
                        nodes.insert(e.to);
                        comp.push_back(*it);
                        it = left.erase(it);
                        grew = true;
                    } else {
                        ++it;
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            components.push_back(std::move(comp));
        }
    }

    std::vector<std::vector<size_t>> maximal;
    for (const auto& comp : components) {
        if (embeds(model, pg, comp)) {
            maximal.push_back(comp);
            continue;
        }
        // Enumerate subsets by descending size; keep embeddable connected
        // subsets not contained in an already-kept one.
        size_t n = comp.size();
        if (n > 20)
            throw Error(Errc::UnsupportedConstruct,
                        "partial model match over " + std::to_string(n) + " patterns is too large");
        std::vector<uint32_t> subsets;
        for (uint32_t m = 1; m < (1u << n); ++m) subsets.push_back(m);
        std::sort(subsets.begin(), subsets.end(), [](uint32_t a, uint32_t b) {
            int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
            return pa != pb ? pa > pb : a < b;
        });
        std::vector<uint32_t> kept_masks;
        for (uint32_t m : subsets) {
            bool covered = false;
            for (uint32_t k : kept_masks)
                if ((m & k) == m) {
                    covered = true;
                    break;
                }
            if (covered) continue;
            std::vector<size_t> subset;
            for (size_t i = 0; i < n; ++i)
                if (m & (1u << i)) subset.push_back(comp[i]);
            if (!subset_connected(pg, subset)) continue;
            if (!embeds(model, pg, subset)) continue;
            kept_masks.push_back(m);
            maximal.push_back(subset);
        }
    }
    std::sort(maximal.begin(), maximal.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    return maximal;
}

// ---------------------------------------------------------------------------
// Query plans

struct ColumnBinding {
    std::string var;
    ValueType type = ValueType::StringHash;

    friend bool operator==(const ColumnBinding&, const ColumnBinding&) = default;
};

/// One collect stream leaving every device: the operator producing it and
/// its column-to-variable mapping.
struct ComponentSchema {
    uint8_t producer_op_id = 0;
    std::vector<ColumnBinding> columns;
    std::vector<size_t> pattern_indices;
};

struct PushedAggregate {
    uint8_t op_id = 0;
    std::vector<AggColumn> spec;
    std::vector<Var> aliases;  // result column names, select order
};

struct WebPart {
    std::string subquery;
    std::string endpoint_url;
    std::vector<std::string> vars;  // selected variables of the subquery
    std::vector<size_t> pattern_indices;
};

/// The split of a parsed query into device, web and base-station work, with
/// recorded split points for reassembly.
struct QueryPlan {
    ParsedQuery query;
    std::optional<DeviceQuery> device_query;
    std::vector<ComponentSchema> components;
    std::optional<PushedAggregate> pushed_aggregate;
    std::optional<WebPart> web_part;
    std::vector<FilterComparison> base_filters;
    std::vector<std::string> split_points;  // variables shared between parts
    bool known_empty = false;               // contradictory typing: result is empty

    bool grouped() const { return !query.group_by.empty(); }
};

struct PlannerOptions {
    uint16_t lifetime_s = 60;
};

// ---------------------------------------------------------------------------
// Device query compilation

namespace plandetail {

struct LNode {
    enum Kind { Gps, Filter, DupEq, Join } kind = Gps;
    size_t pattern_index = 0;                   // Gps
    FilterComparison filter;                    // Filter
    std::string dup_var;                        // DupEq
    std::string join_var;                       // Join
    std::vector<std::string> pending_dups;      // Join: shared vars equal-checked above
    std::unique_ptr<LNode> left, right;         // Filter/DupEq use left only
    std::set<std::string> needed;               // vars this node's output must keep
    size_t op_id = 0;
};

struct ColRef {
    std::string var;
    ValueType type = ValueType::StringHash;
};

inline std::vector<std::string> pattern_var_list(const TriplePattern& p) {
    std::vector<std::string> out;
    for (const PatternTerm* t : {&p.subject, &p.predicate, &p.object})
        if (auto* v = std::get_if<Var>(t)) out.push_back(v->name);
    return out;
}

inline Const32 term_constant(const Term& t) {
    switch (t.kind()) {
        case TermKind::IntLit:   return Const32::of_int(t.int_value());
        case TermKind::FloatLit: return Const32::of_float(t.float_value());
        default:                 return Const32::of_hash(term_hash32(t));
    }
}

class ComponentCompiler {
public:
    ComponentCompiler(const ParsedQuery& q, const std::map<std::string, ValueType>& var_types)
        : q_(q), var_types_(var_types) {}

    /// Builds the logical shape: GPS per pattern, left-deep joins over the
    /// first shared variable, equality selections for further shared
    /// variables, filters anchored where their columns are first bound.
    std::unique_ptr<LNode> build(const std::vector<size_t>& patterns,
                                 const std::vector<FilterComparison>& filters) {
        // Greedy connected ordering, seeded by query order.
        std::vector<size_t> order;
        std::set<std::string> bound;
        std::vector<size_t> remaining = patterns;
        while (!remaining.empty()) {
            size_t pick = remaining.size();
            for (size_t i = 0; i < remaining.size(); ++i) {
                auto vars = pattern_var_list(q_.patterns[remaining[i]]);
                bool shares = order.empty();
                for (const auto& v : vars)
                    if (bound.count(v)) shares = true;
                if (shares) {
                    pick = i;
                    break;
                }
            }
            if (pick == remaining.size())
                throw Error(Errc::SchemaMismatch, "component is not variable-connected");
            size_t pi = remaining[pick];
            for (const auto& v : pattern_var_list(q_.patterns[pi])) bound.insert(v);
            order.push_back(pi);
            remaining.erase(remaining.begin() + pick);
        }

        std::vector<FilterComparison> pending_filters = filters;
        std::set<std::string> acc_vars;
        std::unique_ptr<LNode> acc;
        for (size_t k = 0; k < order.size(); ++k) {
            size_t pi = order[k];
            std::unique_ptr<LNode> g = wrap_gps(pi, pending_filters);
            auto vars = pattern_var_list(q_.patterns[pi]);
            if (!acc) {
                acc = std::move(g);
                acc_vars.insert(vars.begin(), vars.end());
            } else {
                std::vector<std::string> shared;
                for (const auto& v : vars)
                    if (acc_vars.count(v) &&
                        std::find(shared.begin(), shared.end(), v) == shared.end())
                        shared.push_back(v);
                if (shared.empty())
                    throw Error(Errc::SchemaMismatch, "join without a shared variable");
                auto join = std::make_unique<LNode>();
                join->kind = LNode::Join;
                join->join_var = shared[0];
                join->pending_dups.assign(shared.begin() + 1, shared.end());
                join->left = std::move(acc);
                join->right = std::move(g);
                acc = std::move(join);
                for (const auto& v : shared)
                    if (v != shared[0]) acc = wrap_dup_eq(std::move(acc), v);
                acc_vars.insert(vars.begin(), vars.end());
            }
            // Filters whose variables are now all bound anchor here.
            for (auto it = pending_filters.begin(); it != pending_filters.end();) {
                if (filter_vars_bound(*it, acc_vars)) {
                    acc = wrap_filter(std::move(acc), *it);
                    it = pending_filters.erase(it);
                } else {
                    ++it;
                }
            }
        }
        if (!pending_filters.empty())
            throw Error(Errc::SchemaMismatch, "pushed filter references unbound variables");
        return acc;
    }

    /// Top-down: every node learns which variables its output must keep.
    void assign_needed(LNode& n, std::set<std::string> needed) {
        n.needed = needed;
        switch (n.kind) {
            case LNode::Gps:
                return;
            case LNode::Filter: {
                std::set<std::string> child = needed;
                for (const FilterOperand* o : {&n.filter.lhs, &n.filter.rhs})
                    if (auto* v = std::get_if<Var>(o)) child.insert(v->name);
                assign_needed(*n.left, std::move(child));
                return;
            }
            case LNode::DupEq: {
                std::set<std::string> child = needed;
                child.insert(n.dup_var);
                assign_needed(*n.left, std::move(child));
                return;
            }
            case LNode::Join: {
                std::set<std::string> down = needed;
                down.insert(n.join_var);
                for (const auto& v : n.pending_dups) down.insert(v);
                assign_needed(*n.left, down);
                assign_needed(*n.right, down);
                return;
            }
        }
    }

    /// Ids: GPS nodes first in build order, then the rest post-order, so
    /// parents always carry higher ids and the root comes last.
    void assign_ids(LNode& n, size_t& next_gps, size_t& next_other) {
        if (n.left) assign_ids(*n.left, next_gps, next_other);
        if (n.right) assign_ids(*n.right, next_gps, next_other);
        n.op_id = n.kind == LNode::Gps ? next_gps++ : next_other++;
    }

    size_t count_gps(const LNode& n) const {
        size_t c = n.kind == LNode::Gps ? 1 : 0;
        if (n.left) c += count_gps(*n.left);
        if (n.right) c += count_gps(*n.right);
        return c;
    }
    size_t count_ops(const LNode& n) const {
        size_t c = 1;
        if (n.left) c += count_ops(*n.left);
        if (n.right) c += count_ops(*n.right);
        return c;
    }

    /// Bottom-up descriptor emission; returns the node's output columns.
    std::vector<ColRef> emit(const LNode& n, uint8_t parent_id,
                             std::vector<OperatorDescriptor>& out) const {
        switch (n.kind) {
            case LNode::Gps:  return emit_gps(n, parent_id, out);
            case LNode::Filter: return emit_filter(n, parent_id, out);
            case LNode::DupEq: return emit_dup_eq(n, parent_id, out);
            case LNode::Join: return emit_join(n, parent_id, out);
        }
        throw Error(Errc::SchemaMismatch, "bad logical node");
    }

    ValueType var_type(const std::string& v) const {
        auto it = var_types_.find(v);
        if (it == var_types_.end()) return ValueType::StringHash;
        return it->second;
    }

private:
    static bool filter_vars_bound(const FilterComparison& f, const std::set<std::string>& bound) {
        for (const FilterOperand* o : {&f.lhs, &f.rhs})
            if (auto* v = std::get_if<Var>(o))
                if (!bound.count(v->name)) return false;
        return true;
    }

    std::unique_ptr<LNode> wrap_gps(size_t pattern_index,
                                    std::vector<FilterComparison>& pending_filters) {
        auto g = std::make_unique<LNode>();
        g->kind = LNode::Gps;
        g->pattern_index = pattern_index;
        std::unique_ptr<LNode> top = std::move(g);
        const TriplePattern& p = q_.patterns[pattern_index];
        // A variable repeated inside one pattern needs an equality above the GPS.
        auto vars = pattern_var_list(p);
        std::set<std::string> seen, dup;
        for (const auto& v : vars) {
            if (!seen.insert(v).second) dup.insert(v);
        }
        for (const auto& v : dup) top = wrap_dup_eq(std::move(top), v);
        // Filters fully bound by this single pattern anchor directly above it.
        std::set<std::string> bound(vars.begin(), vars.end());
        for (auto it = pending_filters.begin(); it != pending_filters.end();) {
            if (filter_vars_bound(*it, bound)) {
                top = wrap_filter(std::move(top), *it);
                it = pending_filters.erase(it);
            } else {
                ++it;
            }
        }
        return top;
    }

    std::unique_ptr<LNode> wrap_filter(std::unique_ptr<LNode> child, FilterComparison f) const {
        auto n = std::make_unique<LNode>();
        n->kind = LNode::Filter;
        n->filter = std::move(f);
        n->left = std::move(child);
        return n;
    }

    std::unique_ptr<LNode> wrap_dup_eq(std::unique_ptr<LNode> child, std::string var) const {
        auto n = std::make_unique<LNode>();
        n->kind = LNode::DupEq;
        n->dup_var = std::move(var);
        n->left = std::move(child);
        return n;
    }

    std::vector<ColRef> emit_gps(const LNode& n, uint8_t parent_id,
                                 std::vector<OperatorDescriptor>& out) const {
        const TriplePattern& p = q_.patterns[n.pattern_index];
        OperatorDescriptor d;
        d.op_id = uint8_t(n.op_id);
        d.type = OpType::Gps;
        d.parent_id = parent_id;
        GpsParams params;
        std::vector<ColRef> cols;
        const PatternTerm* slots[3] = {&p.subject, &p.predicate, &p.object};
        std::optional<Const32>* consts[3] = {&params.subject, &params.predicate, &params.object};
        for (size_t i = 0; i < 3; ++i) {
            if (auto* t = std::get_if<Term>(slots[i])) {
                *consts[i] = term_constant(*t);
                continue;
            }
            const std::string& v = std::get<Var>(*slots[i]).name;
            // Keep needed vars; a repeated variable keeps all its slots for
            // the equality selection above.
            bool repeated = std::count_if(slots, slots + 3, [&](const PatternTerm* s) {
                                const Var* sv = std::get_if<Var>(s);
                                return sv && sv->name == v;
                            }) > 1;
            if (n.needed.count(v) || repeated) {
                d.projection.set(i, var_type(v));
                cols.push_back({v, var_type(v)});
            }
        }
        d.params = params;
        out.push_back(d);
        return cols;
    }

    std::vector<ColRef> emit_filter(const LNode& n, uint8_t parent_id,
                                    std::vector<OperatorDescriptor>& out) const {
        std::vector<ColRef> in = emit(*n.left, uint8_t(n.op_id), out);
        OperatorDescriptor d;
        d.op_id = uint8_t(n.op_id);
        d.type = OpType::Selection;
        d.parent_id = parent_id;
        SelectionParams params;
        params.comparisons.push_back(lower_filter(n.filter, in));
        d.params = params;
        std::vector<ColRef> cols = project_needed(d.projection, in, n.needed);
        out.push_back(d);
        return cols;
    }

    std::vector<ColRef> emit_dup_eq(const LNode& n, uint8_t parent_id,
                                    std::vector<OperatorDescriptor>& out) const {
        std::vector<ColRef> in = emit(*n.left, uint8_t(n.op_id), out);
        size_t first = in.size(), second = in.size();
        for (size_t i = 0; i < in.size(); ++i) {
            if (in[i].var != n.dup_var) continue;
            if (first == in.size())
                first = i;
            else
                second = i;
        }
        if (second == in.size())
            throw Error(Errc::SchemaMismatch, "duplicate column for ?" + n.dup_var + " missing");
        OperatorDescriptor d;
        d.op_id = uint8_t(n.op_id);
        d.type = OpType::Selection;
        d.parent_id = parent_id;
        SelectionParams params;
        params.comparisons.push_back({Operand::col(uint8_t(first)), CmpOp::Eq,
                                      Operand::col(uint8_t(second))});
        d.params = params;
        // The second copy is always dropped. Duplicate pairs of *other*
        // variables survive intact for later equality selections; everything
        // else is kept only when needed above.
        std::vector<ColRef> cols;
        for (size_t i = 0; i < in.size(); ++i) {
            if (i == second) continue;
            const std::string& v = in[i].var;
            bool keep;
            if (v == n.dup_var)
                keep = n.needed.count(v) != 0;
            else if (is_dup_pair(in, i))
                keep = true;
            else
                keep = n.needed.count(v) != 0;
            if (keep) {
                d.projection.set(i, in[i].type);
                cols.push_back(in[i]);
            }
        }
        out.push_back(d);
        return cols;
    }

    static bool is_dup_pair(const std::vector<ColRef>& in, size_t idx) {
        for (size_t j = 0; j < in.size(); ++j)
            if (j != idx && in[j].var == in[idx].var) return true;
        return false;
    }

    std::vector<ColRef> emit_join(const LNode& n, uint8_t parent_id,
                                  std::vector<OperatorDescriptor>& out) const {
        std::vector<ColRef> first = emit(*n.left, uint8_t(n.op_id), out);
        std::vector<ColRef> second = emit(*n.right, uint8_t(n.op_id), out);
        // At runtime the SLJ treats the lower-id child as its LEFT side, so
        // the concatenation layout follows id order, not build order.
        bool build_order_is_id_order = n.left->op_id < n.right->op_id;
        std::vector<ColRef>& left = build_order_is_id_order ? first : second;
        std::vector<ColRef>& right = build_order_is_id_order ? second : first;
        if (left.size() + right.size() > kMaxColumns)
            throw Error(Errc::RowTooWide, "intermediate row would exceed 16 columns");
        size_t lattr = left.size(), rattr = right.size();
        for (size_t i = 0; i < left.size(); ++i)
            if (left[i].var == n.join_var) lattr = i;
        for (size_t i = 0; i < right.size(); ++i)
            if (right[i].var == n.join_var) rattr = i;
        if (lattr == left.size() || rattr == right.size())
            throw Error(Errc::SchemaMismatch, "join variable missing from a child");
        OperatorDescriptor d;
        d.op_id = uint8_t(n.op_id);
        d.type = OpType::Slj;
        d.parent_id = parent_id;
        d.params = SljParams{uint8_t(lattr), uint8_t(rattr)};
        // Join-variable columns compare equal, so only the left copy can
        // survive; pending shared variables keep both copies for the
        // equality selections above.
        std::set<std::string> pending(n.pending_dups.begin(), n.pending_dups.end());
        std::vector<ColRef> cols;
        for (size_t i = 0; i < left.size(); ++i) {
            if (n.needed.count(left[i].var) || pending.count(left[i].var)) {
                d.projection.set(i, left[i].type);
                cols.push_back(left[i]);
            }
        }
        for (size_t i = 0; i < right.size(); ++i) {
            const std::string& v = right[i].var;
            if (v == n.join_var) continue;
            bool keep = pending.count(v) ? true : n.needed.count(v) && !column_present(cols, v);
            if (keep) {
                d.projection.set(left.size() + i, right[i].type);
                cols.push_back(right[i]);
            }
        }
        out.push_back(d);
        return cols;
    }

    static bool column_present(const std::vector<ColRef>& cols, const std::string& v) {
        for (const auto& c : cols)
            if (c.var == v) return true;
        return false;
    }

    Comparison lower_filter(const FilterComparison& f, const std::vector<ColRef>& in) const {
        auto lower = [&](const FilterOperand& o, const FilterOperand& other) -> Operand {
            if (auto* v = std::get_if<Var>(&o)) {
                for (size_t i = 0; i < in.size(); ++i)
                    if (in[i].var == v->name) return Operand::col(uint8_t(i));
                throw Error(Errc::SchemaMismatch, "filter column not in scope");
            }
            const Term& t = std::get<Term>(o);
            // The constant is typed against the variable side of the comparison.
            ValueType target = ValueType::StringHash;
            if (auto* v = std::get_if<Var>(&other)) target = var_type(v->name);
            if (target == ValueType::Int || target == ValueType::Float) {
                if (t.kind() == TermKind::IntLit)
                    return Operand::con(target == ValueType::Float ? Const32::of_float(float(t.int_value()))
                                                                   : Const32::of_int(t.int_value()));
                if (t.kind() == TermKind::FloatLit) return Operand::con(Const32::of_float(t.float_value()));
                if (t.kind() == TermKind::StringLit) {
                    auto num = parse_number(t.lexical());
                    if (!num)
                        throw Error(Errc::TypeMismatch, "string constant against numeric column");
                    return Operand::con(target == ValueType::Int ? Const32::of_int(int32_t(*num))
                                                                 : Const32::of_float(float(*num)));
                }
                throw Error(Errc::TypeMismatch, "IRI constant against numeric column");
            }
            return Operand::con(term_constant(t));
        };
        Comparison c;
        c.lhs = lower(f.lhs, f.rhs);
        c.op = f.op;
        c.rhs = lower(f.rhs, f.lhs);
        return c;
    }

    std::vector<ColRef> project_needed(ProjectionMask& mask, const std::vector<ColRef>& in,
                                       const std::set<std::string>& needed) const {
        std::vector<ColRef> cols;
        std::set<std::string> taken;
        for (size_t i = 0; i < in.size(); ++i) {
            if (needed.count(in[i].var) && !taken.count(in[i].var)) {
                mask.set(i, in[i].type);
                cols.push_back(in[i]);
                taken.insert(in[i].var);
            }
        }
        return cols;
    }

    const ParsedQuery& q_;
    const std::map<std::string, ValueType>& var_types_;
};

} // namespace plandetail

/// Compiles device components into one in-network query: one GPS per
/// pattern, left-deep SLJ chains, anchored selections, projection masks
/// computed bottom-up, ids in execution order (GPS first, root last).
/// Raises TooManyOperators and RowTooWide at planning time.
struct DeviceCompileResult {
    DeviceQuery query;
    std::vector<ComponentSchema> components;
    std::optional<PushedAggregate> pushed_aggregate;
};

inline DeviceCompileResult compile_device_query(
    const ParsedQuery& q, const std::vector<std::vector<size_t>>& components,
    const std::vector<std::vector<FilterComparison>>& component_filters,
    const std::vector<std::set<std::string>>& needed_above,
    const std::map<std::string, ValueType>& var_types,
    const std::vector<AggExpr>* pushed_aggs,  // non-null => Aggregate root
    uint16_t lifetime_s) {
    using namespace plandetail;
    ComponentCompiler cc(q, var_types);

    std::vector<std::unique_ptr<LNode>> tops;
    for (size_t c = 0; c < components.size(); ++c) {
        auto top = cc.build(components[c], component_filters[c]);
        std::set<std::string> needed = needed_above[c];
        if (pushed_aggs)
            for (const AggExpr& a : *pushed_aggs)
                if (a.arg) needed.insert(a.arg->name);
        cc.assign_needed(*top, needed);
        tops.push_back(std::move(top));
    }

    size_t total_gps = 0, total_ops = 1;  // +1 for the root
    for (const auto& t : tops) {
        total_gps += cc.count_gps(*t);
        total_ops += cc.count_ops(*t);
    }
    if (total_ops > 256)
        throw Error(Errc::TooManyOperators,
                    std::to_string(total_ops) + " operators exceed the 256-operator limit");
    if (total_ops > 255)
        throw Error(Errc::TooManyOperators, "one-byte operator ids address at most 255 operators");

    size_t next_gps = 0, next_other = total_gps;
    for (auto& t : tops) cc.assign_ids(*t, next_gps, next_other);
    uint8_t root_id = uint8_t(next_other);

    DeviceCompileResult result;
    result.query.lifetime_s = lifetime_s;

    OperatorDescriptor root;
    root.op_id = root_id;
    root.parent_id = kNoParent;

    std::vector<OperatorDescriptor> ops;
    std::vector<std::vector<ColRef>> top_cols;
    for (auto& t : tops) top_cols.push_back(cc.emit(*t, root_id, ops));

    if (pushed_aggs) {
        if (tops.size() != 1)
            throw Error(Errc::SchemaMismatch, "in-network aggregation needs one component");
        root.type = OpType::Aggregate;
        AggregateParams params;
        PushedAggregate pa;
        pa.op_id = root_id;
        const auto& cols = top_cols[0];
        size_t slot = 0;
        for (const AggExpr& a : *pushed_aggs) {
            AggColumn c;
            c.fn = a.fn;
            if (a.arg) {
                size_t idx = cols.size();
                for (size_t i = 0; i < cols.size(); ++i)
                    if (cols[i].var == a.arg->name) idx = i;
                if (idx == cols.size())
                    throw Error(Errc::SchemaMismatch, "aggregate argument not in child output");
                c.input_column = uint8_t(idx);
                c.input_type = cols[idx].type;
            } else {
                c.input_column = 0;
                c.input_type = ValueType::Int;
            }
            if (c.fn != AggFn::Count && c.input_type == ValueType::StringHash)
                throw Error(Errc::TypeMismatch, "numeric aggregate over a string column");
            params.columns.push_back(c);
            ValueType emitted = c.fn == AggFn::Count ? ValueType::Int
                                : c.fn == AggFn::Avg ? ValueType::Float
                                                     : c.input_type;
            root.projection.set(slot++, emitted);
            pa.aliases.push_back(a.alias);
        }
        pa.spec = params.columns;
        root.params = params;
        result.pushed_aggregate = pa;
    } else {
        root.type = OpType::Collect;
        root.params = CollectParams{};
    }
    ops.push_back(root);

    // GPS first, ascending; the wire carries them in id order.
    std::sort(ops.begin(), ops.end(),
              [](const OperatorDescriptor& a, const OperatorDescriptor& b) { return a.op_id < b.op_id; });
    result.query.ops = std::move(ops);

    for (size_t c = 0; c < tops.size(); ++c) {
        ComponentSchema cs;
        cs.producer_op_id = uint8_t(tops[c]->op_id);
        cs.pattern_indices = components[c];
        for (const auto& col : top_cols[c]) cs.columns.push_back({col.var, col.type});
        result.components.push_back(std::move(cs));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Classification

namespace plandetail {

inline std::vector<std::string> filter_vars(const FilterComparison& f) {
    std::vector<std::string> out;
    for (const FilterOperand* o : {&f.lhs, &f.rhs})
        if (auto* v = std::get_if<Var>(o)) out.push_back(v->name);
    return out;
}

/// Can this filter run in-network over the given variable typing?
inline bool filter_pushable(const FilterComparison& f,
                            const std::map<std::string, ValueType>& var_types) {
    auto type_of = [&](const FilterOperand& o) -> ValueType {
        if (auto* v = std::get_if<Var>(&o)) {
            auto it = var_types.find(v->name);
            return it == var_types.end() ? ValueType::StringHash : it->second;
        }
        const Term& t = std::get<Term>(o);
        switch (t.kind()) {
            case TermKind::IntLit:   return ValueType::Int;
            case TermKind::FloatLit: return ValueType::Float;
            default:                 return ValueType::StringHash;
        }
    };
    ValueType lt = type_of(f.lhs), rt = type_of(f.rhs);
    bool l_num = lt != ValueType::StringHash, r_num = rt != ValueType::StringHash;
    bool ordering = f.op != CmpOp::Eq && f.op != CmpOp::Ne;
    if (l_num && r_num) return true;
    if (!l_num && !r_num) {
        if (ordering) return false;  // hash space has no order
        // A quoted numeric against a numeric column is handled by coercion;
        // plain string equality against a hash column is fine.
        return true;
    }
    // Mixed numeric/string: pushable only when the string side is a literal
    // constant that parses as a number (the paper's FILTER (?temp > '20')).
    const FilterOperand& stringy = l_num ? f.rhs : f.lhs;
    if (auto* t = std::get_if<Term>(&stringy))
        if (t->kind() == TermKind::StringLit && parse_number(t->lexical())) return true;
    return false;
}

} // namespace plandetail

/// Splits the parsed query into device-local, web and base-station parts.
/// Every pattern lands in exactly one part or the query is Unanswerable.
inline QueryPlan classify(const ParsedQuery& q, const DataModelGraph& model,
                          const EndpointMap& endpoints, const PlannerOptions& opts = {}) {
    using namespace plandetail;
    QueryPlan plan;
    plan.query = q;
    PatternGraph pg = to_pattern_graph(q);

    // Web patterns: constant predicates in a configured external namespace.
    std::vector<size_t> web_patterns, rest;
    std::optional<std::string> web_url;
    for (size_t i = 0; i < q.patterns.size(); ++i) {
        const auto& e = pg.edges[i];
        std::optional<std::string> url =
            e.predicate_is_var ? std::nullopt : endpoints.lookup(e.predicate);
        if (url) {
            if (web_url && *web_url != *url)
                throw Error(Errc::UnsupportedConstruct, "query spans multiple external endpoints");
            web_url = url;
            web_patterns.push_back(i);
        } else {
            rest.push_back(i);
        }
    }

    // Everything else must be answerable by the devices.
    for (size_t i : rest) {
        const auto& e = pg.edges[i];
        if (e.predicate_is_var)
            throw Error(Errc::Unanswerable, "variable predicates cannot be matched against the model");
        if (!model.has_predicate(e.predicate))
            throw Error(Errc::Unanswerable, "predicate " + e.predicate + " is unknown everywhere");
    }

    // Cover the local patterns with maximal common subgraphs, then
    // re-partition the cover by shared variables for compilation.
    std::set<size_t> uncovered(rest.begin(), rest.end());
    while (!uncovered.empty()) {
        std::vector<size_t> cand(uncovered.begin(), uncovered.end());
        auto maximal = match_local(model, pg, cand);
        if (maximal.empty())
            throw Error(Errc::Unanswerable, "pattern does not embed into the data model");
        for (size_t pi : maximal.front()) uncovered.erase(pi);
    }

    // Compilation groups by shared variables: patterns connected only
    // through a shared constant cannot be joined by an SLJ and become
    // separate collect streams, re-joined at the base station.
    std::vector<std::vector<size_t>> components;
    {
        std::set<size_t> left(rest.begin(), rest.end());
        while (!left.empty()) {
            std::vector<size_t> comp{*left.begin()};
            left.erase(left.begin());
            std::set<std::string> vars;
            for (const auto& v : pattern_var_list(q.patterns[comp[0]])) vars.insert(v);
            bool grew = true;
            while (grew) {
                grew = false;
                for (auto it = left.begin(); it != left.end();) {
                    auto pv = pattern_var_list(q.patterns[*it]);
                    bool shares = false;
                    for (const auto& v : pv)
                        if (vars.count(v)) shares = true;
                    if (shares) {
                        vars.insert(pv.begin(), pv.end());
                        comp.push_back(*it);
                        it = left.erase(it);
                        grew = true;
                    } else {
                        ++it;
                    }
                }
            }
            std::sort(comp.begin(), comp.end());
            components.push_back(std::move(comp));
        }
        std::sort(components.begin(), components.end());
    }

    // Variable typing: subjects are IRIs; object types come from the model.
    // A variable used with two incompatible types can never bind (term
    // equality is kind-exact), so the query is known to be empty.
    std::map<std::string, ValueType> var_types;
    auto note_type = [&](const std::string& v, ValueType t) {
        auto it = var_types.find(v);
        if (it == var_types.end()) {
            var_types[v] = t;
            return;
        }
        if (it->second != t) plan.known_empty = true;
    };
    for (size_t i : rest) {
        const TriplePattern& p = q.patterns[i];
        if (auto* v = std::get_if<Var>(&p.subject)) note_type(v->name, ValueType::StringHash);
        if (auto* v = std::get_if<Var>(&p.object)) {
            TermKind k = *model.object_type(pg.edges[i].predicate);
            ValueType t = k == TermKind::IntLit    ? ValueType::Int
                          : k == TermKind::FloatLit ? ValueType::Float
                                                    : ValueType::StringHash;
            note_type(v->name, t);
        }
    }
    if (plan.known_empty) return plan;

    // Variable sets per part.
    std::vector<std::set<std::string>> comp_vars;
    for (const auto& comp : components) {
        std::set<std::string> vars;
        for (size_t pi : comp)
            for (const auto& v : pattern_var_list(q.patterns[pi])) vars.insert(v);
        comp_vars.push_back(std::move(vars));
    }
    std::set<std::string> web_vars;
    for (size_t pi : web_patterns)
        for (const auto& v : pattern_var_list(q.patterns[pi])) web_vars.insert(v);

    // Split points: variables present in two or more parts.
    {
        std::map<std::string, int> occurrences;
        for (const auto& vars : comp_vars)
            for (const auto& v : vars) ++occurrences[v];
        for (const auto& v : web_vars) ++occurrences[v];
        for (const auto& [v, n] : occurrences)
            if (n >= 2) plan.split_points.push_back(v);
    }

    // Filters: into a device component, into the web subquery, or at base.
    std::vector<std::vector<FilterComparison>> comp_filters(components.size());
    std::vector<FilterComparison> web_filters;
    for (const FilterComparison& f : q.filters) {
        auto vars = filter_vars(f);
        if (vars.empty()) {  // constant-constant: evaluated once at the base
            plan.base_filters.push_back(f);
            continue;
        }
        auto within = [&](const std::set<std::string>& set) {
            for (const auto& v : vars)
                if (!set.count(v)) return false;
            return true;
        };
        bool placed = false;
        for (size_t c = 0; c < components.size() && !placed; ++c) {
            if (within(comp_vars[c]) && filter_pushable(f, var_types)) {
                comp_filters[c].push_back(f);
                placed = true;
            }
        }
        if (!placed && within(web_vars)) {
            web_filters.push_back(f);
            placed = true;
        }
        if (!placed) plan.base_filters.push_back(f);
    }

    // Variables each part must deliver upward.
    std::set<std::string> needed_outside;
    for (const auto& s : q.select) {
        if (auto* v = std::get_if<Var>(&s)) needed_outside.insert(v->name);
    }
    for (const Var& v : q.group_by) needed_outside.insert(v.name);
    for (const auto& k : q.order_by) needed_outside.insert(k.var.name);
    if (q.having && q.having->agg && q.having->agg->arg)
        needed_outside.insert(q.having->agg->arg->name);
    for (const auto& f : plan.base_filters)
        for (const auto& v : filter_vars(f)) needed_outside.insert(v);
    for (const auto& v : plan.split_points) needed_outside.insert(v);

    // Decide the in-network root: an ungrouped aggregate over one fully
    // local, variable-connected component is pushed; everything else collects.
    std::vector<AggExpr> aggs;
    for (const auto& s : q.select)
        if (auto* a = std::get_if<AggExpr>(&s)) aggs.push_back(*a);

    bool push_agg = !aggs.empty() && q.group_by.empty() && web_patterns.empty() &&
                    components.size() == 1 && plan.base_filters.empty();
    for (const AggExpr& a : aggs) {
        if (!push_agg) break;
        if (a.fn == AggFn::Count) continue;
        if (!a.arg) {
            push_agg = false;
            break;
        }
        auto it = var_types.find(a.arg->name);
        if (it == var_types.end() || it->second == ValueType::StringHash) push_agg = false;
    }
    if (push_agg && q.having && q.having->agg) {
        // A HAVING aggregate must match a pushed select aggregate, otherwise
        // its inputs are gone after in-network aggregation.
        bool matches = false;
        for (const AggExpr& a : aggs)
            if (a.fn == q.having->agg->fn && a.arg == q.having->agg->arg) matches = true;
        if (!matches) push_agg = false;
    }

    if (!aggs.empty() && !push_agg) {
        // Base-station aggregation needs the raw argument columns.
        for (const AggExpr& a : aggs)
            if (a.arg) needed_outside.insert(a.arg->name);
    }
    if (q.having && q.having->agg && q.having->agg->arg && !push_agg)
        needed_outside.insert(q.having->agg->arg->name);

    std::vector<std::set<std::string>> needed_above;
    for (const auto& vars : comp_vars) {
        std::set<std::string> needed;
        for (const auto& v : needed_outside)
            if (vars.count(v)) needed.insert(v);
        needed_above.push_back(std::move(needed));
    }

    if (!components.empty()) {
        DeviceCompileResult dev =
            compile_device_query(q, components, comp_filters, needed_above, var_types,
                                 push_agg ? &aggs : nullptr, opts.lifetime_s);
        plan.device_query = std::move(dev.query);
        plan.components = std::move(dev.components);
        plan.pushed_aggregate = std::move(dev.pushed_aggregate);
    }

    if (!web_patterns.empty()) {
        WebPart web;
        web.endpoint_url = *web_url;
        web.pattern_indices = web_patterns;
        ParsedQuery sub;
        for (size_t pi : web_patterns) sub.patterns.push_back(q.patterns[pi]);
        sub.filters = web_filters;
        std::set<std::string> selected;
        for (const auto& v : web_vars)
            if (needed_outside.count(v)) selected.insert(v);
        if (selected.empty()) selected = web_vars;
        for (const auto& v : selected) {
            sub.select.push_back(Var{v});
            web.vars.push_back(v);
        }
        if (sub.select.empty())
            throw Error(Errc::Unanswerable, "web part binds no variables");
        web.subquery = print_query(sub);
        plan.web_part = std::move(web);
    }

    if (!plan.device_query && !plan.web_part)
        throw Error(Errc::Unanswerable, "query has no answerable part");
    return plan;
}

} // namespace snes
