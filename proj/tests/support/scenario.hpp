#pragma once

// Randomized end-to-end scenarios for the acceptance suite: a random data
// model, one to five devices with data honoring it, and a generated query
// from the supported subset. Data instances are device-scoped, so every
// join the model declares local really is local.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "snes/oracle.hpp"
#include "snes/planner.hpp"

namespace snes::scenario {

struct Scenario {
    Topology topo;
    DataModelGraph model;
    EndpointMap endpoints;
    std::map<uint32_t, std::vector<Triple>> device_data;
    std::vector<Triple> web_data;
    std::string query;

    std::vector<Triple> union_data() const {
        std::vector<Triple> all;
        for (const auto& [dev, triples] : device_data)
            all.insert(all.end(), triples.begin(), triples.end());
        all.insert(all.end(), web_data.begin(), web_data.end());
        return all;
    }
};

namespace detail {

struct ModelShape {
    // Resource nodes are joinable; value nodes are leaf objects with
    // exactly one incoming edge, so generated queries never join on values.
    size_t resource_nodes = 0;
    struct Edge {
        size_t from;               // resource node
        size_t to;                 // resource node (resource edges only)
        bool to_value = false;     // value edge: `to` is unused
        TermKind value_kind = TermKind::Iri;
        std::string predicate;
    };
    std::vector<Edge> edges;
};

inline std::string node_name(size_t i) { return "n" + std::to_string(i); }

inline ModelShape random_shape(std::mt19937_64& rng) {
    ModelShape s;
    s.resource_nodes = 2 + rng() % 3;  // 2..4
    size_t pred = 0;
    for (size_t i = 1; i < s.resource_nodes; ++i) {
        ModelShape::Edge e;
        e.from = rng() % i;
        e.to = i;
        e.predicate = "http://m.example/link" + std::to_string(pred++);
        s.edges.push_back(e);
    }
    // Occasionally an extra resource edge for richer shapes.
    if (s.resource_nodes >= 3 && rng() % 2) {
        ModelShape::Edge e;
        e.from = rng() % s.resource_nodes;
        e.to = rng() % s.resource_nodes;
        if (e.to == e.from) e.to = (e.to + 1) % s.resource_nodes;
        e.predicate = "http://m.example/link" + std::to_string(pred++);
        s.edges.push_back(e);
    }
    // Value edges, one fresh value node each.
    size_t val = 0;
    for (size_t i = 0; i < s.resource_nodes; ++i) {
        size_t count = rng() % 3;  // 0..2
        for (size_t j = 0; j < count; ++j) {
            ModelShape::Edge e;
            e.from = i;
            e.to_value = true;
            switch (rng() % 3) {
                case 0: e.value_kind = TermKind::IntLit; break;
                case 1: e.value_kind = TermKind::FloatLit; break;
                default: e.value_kind = TermKind::StringLit;
            }
            e.predicate = "http://m.example/val" + std::to_string(val++);
            s.edges.push_back(e);
        }
    }
    return s;
}

inline DataModelGraph to_model(const ModelShape& s) {
    DataModelGraph g;
    size_t value_node = 0;
    for (const auto& e : s.edges) {
        if (e.to_value)
            g.add_edge(node_name(e.from), "v" + std::to_string(value_node++), e.predicate,
                       e.value_kind);
        else
            g.add_edge(node_name(e.from), node_name(e.to), e.predicate);
    }
    return g;
}

inline Term random_value(std::mt19937_64& rng, TermKind kind) {
    switch (kind) {
        case TermKind::IntLit: return Term::integer(int32_t(rng() % 60));
        case TermKind::FloatLit: return Term::real(float(rng() % 240) / 4.f);
        default: return Term::str("reading " + std::to_string(rng() % 12));
    }
}

} // namespace detail

inline Scenario generate(uint64_t seed) {
    using namespace detail;
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
    Scenario sc;

    ModelShape shape = random_shape(rng);
    sc.model = to_model(shape);

    // Topology: 1..5 devices, random tree, random latencies.
    size_t devices = 1 + rng() % 5;
    {
        std::ostringstream os;
        for (size_t i = 1; i <= devices; ++i) {
            uint32_t parent = i == 1 ? 0 : uint32_t(rng() % i);  // 0 = base
            os << i << " " << (parent == 0 ? std::string("-") : std::to_string(parent)) << " "
               << (5 + rng() % 16) << "\n";
        }
        sc.topo = Topology::parse_text(os.str());
    }

    // Device data: per-device instances of every resource node; triples
    // instantiate model edges within the device only.
    std::map<size_t, std::map<uint32_t, std::vector<std::string>>> instances;
    for (size_t n = 0; n < shape.resource_nodes; ++n) {
        for (uint32_t d = 1; d <= devices; ++d) {
            size_t count = 1 + rng() % 2;
            for (size_t j = 0; j < count; ++j)
                instances[n][d].push_back("http://data.example/d" + std::to_string(d) + "/n" +
                                          std::to_string(n) + "/i" + std::to_string(j));
        }
    }
    for (uint32_t d = 1; d <= devices; ++d) {
        auto& out = sc.device_data[d];
        for (const auto& e : shape.edges) {
            for (const std::string& subj : instances[e.from][d]) {
                if (e.to_value) {
                    if (rng() % 10 < 8)
                        out.push_back({Term::iri(subj), Term::iri(e.predicate),
                                       random_value(rng, e.value_kind)});
                } else {
                    for (const std::string& obj : instances[e.to][d])
                        if (rng() % 10 < 7)
                            out.push_back({Term::iri(subj), Term::iri(e.predicate), Term::iri(obj)});
                }
            }
        }
        if (out.size() > 100) out.resize(100);
    }

    // Query: a connected walk over the model shape.
    size_t want_edges = 1 + rng() % 4;
    std::vector<size_t> chosen;            // indices into shape.edges
    std::set<size_t> touched_resources;
    {
        std::vector<size_t> candidates(shape.edges.size());
        for (size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
        size_t first = rng() % shape.edges.size();
        chosen.push_back(first);
        touched_resources.insert(shape.edges[first].from);
        if (!shape.edges[first].to_value) touched_resources.insert(shape.edges[first].to);
        while (chosen.size() < want_edges) {
            std::vector<size_t> adjacent;
            for (size_t i = 0; i < shape.edges.size(); ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
                const auto& e = shape.edges[i];
                if (touched_resources.count(e.from) ||
                    (!e.to_value && touched_resources.count(e.to)))
                    adjacent.push_back(i);
            }
            if (adjacent.empty()) break;
            size_t pick = adjacent[rng() % adjacent.size()];
            chosen.push_back(pick);
            touched_resources.insert(shape.edges[pick].from);
            if (!shape.edges[pick].to_value) touched_resources.insert(shape.edges[pick].to);
        }
    }

    // Variables per resource node; fresh variables per value edge.
    auto res_var = [](size_t n) { return "?r" + std::to_string(n); };
    struct QPattern {
        std::string s, p, o;
    };
    std::vector<QPattern> patterns;
    std::vector<std::string> value_vars;
    std::map<std::string, TermKind> value_var_kind;
    std::vector<std::string> resource_vars;
    size_t vv = 0;
    for (size_t idx : chosen) {
        const auto& e = shape.edges[idx];
        QPattern p;
        p.s = res_var(e.from);
        p.p = "<" + e.predicate + ">";
        if (e.to_value) {
            std::string v = "?v" + std::to_string(vv++);
            p.o = v;
            value_vars.push_back(v);
            value_var_kind[v] = e.value_kind;
        } else {
            p.o = res_var(e.to);
        }
        patterns.push_back(p);
    }
    for (size_t n : touched_resources) resource_vars.push_back(res_var(n));

    // Constants: sometimes pin an object to a value present in the data.
    if (!value_vars.empty() && rng() % 3 == 0) {
        for (size_t i = 0; i < patterns.size(); ++i) {
            const auto& e = shape.edges[chosen[i]];
            if (!e.to_value || patterns[i].o[0] != '?') continue;
            uint32_t d = 1 + rng() % devices;
            for (const Triple& t : sc.device_data[d]) {
                if (t.predicate.lexical() == e.predicate) {
                    std::string var = patterns[i].o;
                    patterns[i].o = term_text(t.object);
                    value_vars.erase(std::find(value_vars.begin(), value_vars.end(), var));
                    value_var_kind.erase(var);
                    break;
                }
            }
            break;
        }
    }
    // Sometimes pin a subject to a known instance IRI.
    if (rng() % 5 == 0) {
        size_t i = rng() % patterns.size();
        const auto& e = shape.edges[chosen[i]];
        uint32_t d = 1 + rng() % devices;
        if (!instances[e.from][d].empty() &&
            std::count_if(patterns.begin(), patterns.end(),
                          [&](const QPattern& p) { return p.s == patterns[i].s || p.o == patterns[i].s; }) == 1)
            patterns[i].s = "<" + instances[e.from][d][0] + ">";
    }

    // Optional web pattern joined on a resource variable.
    bool with_web = rng() % 3 == 0;
    std::string web_var;
    if (with_web) {
        web_var = resource_vars[rng() % resource_vars.size()];
        QPattern p;
        p.s = web_var;
        p.p = "<http://web.example/info>";
        p.o = "?wlabel";
        patterns.push_back(p);
        sc.endpoints.add("http://web.example/", "mock://web");
        size_t node = 0;
        for (size_t n : touched_resources)
            if (res_var(n) == web_var) node = n;
        for (uint32_t d = 1; d <= devices; ++d)
            for (const std::string& inst : instances[node][d])
                if (rng() % 2)
                    sc.web_data.push_back({Term::iri(inst), Term::iri("http://web.example/info"),
                                           Term::str("w" + std::to_string(rng() % 50))});
        sc.web_data.push_back({Term::iri("http://data.example/elsewhere"),
                               Term::iri("http://web.example/info"), Term::str("noise")});
    }

    // Filter over a numeric value variable.
    std::string filter;
    {
        std::vector<std::string> numeric;
        for (const auto& v : value_vars)
            if (value_var_kind[v] != TermKind::StringLit) numeric.push_back(v);
        if (!numeric.empty() && rng() % 2 == 0) {
            const std::string& v = numeric[rng() % numeric.size()];
            const char* ops[] = {"<", "<=", ">", ">=", "=", "!="};
            std::string c = value_var_kind[v] == TermKind::IntLit
                                ? std::to_string(rng() % 60)
                                : ("'" + std::to_string(rng() % 60) + "'");
            filter = "  FILTER (" + v + " " + ops[rng() % 6] + " " + c + ") .\n";
        }
    }

    // Select clause: plain, ungrouped aggregate, or GROUP BY.
    std::vector<std::string> all_vars = resource_vars;
    all_vars.insert(all_vars.end(), value_vars.begin(), value_vars.end());
    if (with_web) all_vars.push_back("?wlabel");

    std::ostringstream q;
    int kind = int(rng() % 10);
    std::string tail;
    if (kind < 5) {  // plain select
        std::set<std::string> sel;
        size_t n = 1 + rng() % all_vars.size();
        while (sel.size() < n) sel.insert(all_vars[rng() % all_vars.size()]);
        q << "SELECT";
        if (rng() % 4 == 0) q << " DISTINCT";
        for (const auto& v : sel) q << " " << v;
        if (rng() % 2) {
            auto it = sel.begin();
            std::advance(it, rng() % sel.size());
            tail += "ORDER BY " + std::string(rng() % 3 ? "" : "DESC(") + *it +
                    (rng() % 3 ? "" : ")") + "\n";
            // keep the paren form consistent
            tail = "ORDER BY " + (rng() % 2 ? *it : "DESC(" + *it + ")") + "\n";
            if (rng() % 2) tail += "LIMIT " + std::to_string(1 + rng() % 8) + "\n";
            if (rng() % 3 == 0) tail += "OFFSET " + std::to_string(rng() % 4) + "\n";
        }
    } else if (kind < 8) {  // ungrouped aggregates
        std::vector<std::string> ints, numerics;
        for (const auto& v : value_vars) {
            if (value_var_kind[v] == TermKind::IntLit) ints.push_back(v);
            if (value_var_kind[v] != TermKind::StringLit) numerics.push_back(v);
        }
        q << "SELECT (COUNT(*) AS ?n)";
        if (!ints.empty() && rng() % 2) q << " (SUM(" << ints[rng() % ints.size()] << ") AS ?sum)";
        if (!numerics.empty()) {
            const std::string& v = numerics[rng() % numerics.size()];
            switch (rng() % 3) {
                case 0: q << " (MIN(" << v << ") AS ?mn)"; break;
                case 1: q << " (MAX(" << v << ") AS ?mx)"; break;
                default: q << " (AVG(" << v << ") AS ?avg)";
            }
        }
    } else {  // grouped aggregation
        const std::string& g = resource_vars[rng() % resource_vars.size()];
        q << "SELECT " << g << " (COUNT(*) AS ?n)";
        tail = "GROUP BY " + g + "\n";
        if (rng() % 3 == 0) tail += "HAVING (COUNT(*) > 1)\n";
    }
    q << "\nWHERE {\n";
    for (const auto& p : patterns) q << "  " << p.s << " " << p.p << " " << p.o << " .\n";
    q << filter;
    q << "}\n" << tail;
    sc.query = q.str();
    return sc;
}

} // namespace snes::scenario
