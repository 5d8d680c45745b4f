#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "snes/sparql.hpp"

using namespace snes;

namespace {

const char* kBuildingQuery = R"(
PREFIX ex: <http://example.org/>
SELECT ?sensor
FROM <http://example.org/>
WHERE {
  ?sensor ex:attached_to ?system .
  ?sensor ex:located_in ex:Building_A .
}
)";

const char* kTemperatureQuery = R"(
PREFIX ex: <http://example.org/>
SELECT ?system COUNT(*) AS ?count
FROM <http://example.org/>
WHERE {
  ?sensor ex:attached_to ?system .
  ?sensor ex:located_in ex:Building_A .
  ?sensor ex:measures ?temp .
  FILTER (?temp > '20') .
}
GROUP BY ?system
)";

const char* kCriticalQuery = R"(
PREFIX : <http://example.org/>
SELECT ?time ?description WHERE {
  ?node :observed ?condition .
  ?condition :hasSeverity :Critical .
  ?condition :hasTimeStamp ?time .
  ?condition :hasDescription ?description .
}
)";

} // namespace

TEST_CASE("the building-A sensor query parses") {
    ParsedQuery q = parse_query(kBuildingQuery);
    REQUIRE(q.patterns.size() == 2);
    REQUIRE(q.select.size() == 1);
    CHECK(std::get<Var>(q.select[0]).name == "sensor");
    CHECK(q.from_iri == "http://example.org/");
    // Prefixed names expand to full IRIs.
    CHECK(std::get<Term>(q.patterns[0].predicate).lexical() == "http://example.org/attached_to");
    CHECK(std::get<Term>(q.patterns[1].object).lexical() == "http://example.org/Building_A");
}

TEST_CASE("the temperature GROUP BY query parses") {
    ParsedQuery q = parse_query(kTemperatureQuery);
    REQUIRE(q.patterns.size() == 3);
    REQUIRE(q.filters.size() == 1);
    CHECK(std::get<Var>(q.filters[0].lhs).name == "temp");
    CHECK(q.filters[0].op == CmpOp::Gt);
    CHECK(std::get<Term>(q.filters[0].rhs).kind() == TermKind::StringLit);
    CHECK(std::get<Term>(q.filters[0].rhs).lexical() == "20");
    REQUIRE(q.group_by.size() == 1);
    CHECK(q.group_by[0].name == "system");
    REQUIRE(q.select.size() == 2);
    const auto& agg = std::get<AggExpr>(q.select[1]);
    CHECK(agg.fn == AggFn::Count);
    CHECK(!agg.arg);
    CHECK(agg.alias.name == "count");
}

TEST_CASE("the critical-conditions query parses") {
    ParsedQuery q = parse_query(kCriticalQuery);
    REQUIRE(q.patterns.size() == 4);
    REQUIRE(q.select.size() == 2);
    CHECK(std::get<Var>(q.select[0]).name == "time");
    CHECK(std::get<Var>(q.select[1]).name == "description");
}

TEST_CASE("pattern graphs collapse shared terms") {
    // 2 patterns sharing ?sensor: 3 nodes... plus constants count as nodes too.
    ParsedQuery q = parse_query(
        "SELECT ?a WHERE { ?a <http://p/x> ?b . ?a <http://p/y> ?c . }");
    PatternGraph g = to_pattern_graph(q);
    CHECK(g.nodes.size() == 3);
    CHECK(g.edges.size() == 2);
    size_t a = 0;
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i] == "?a") a = i;
    CHECK(g.out_degree(a) == 2);
}

TEST_CASE("a single pattern gives two nodes and one edge") {
    ParsedQuery q = parse_query("SELECT ?s WHERE { ?s <http://p/q> ?o . }");
    PatternGraph g = to_pattern_graph(q);
    CHECK(g.nodes.size() == 2);
    CHECK(g.edges.size() == 1);
    CHECK(g.edges[0].predicate == "http://p/q");
}

TEST_CASE("the critical-conditions pattern graph is a star around ?condition") {
    PatternGraph g = to_pattern_graph(parse_query(kCriticalQuery));
    size_t condition = g.nodes.size();
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i] == "?condition") condition = i;
    REQUIRE(condition < g.nodes.size());
    CHECK(g.out_degree(condition) == 3);
    size_t into = 0;
    for (const auto& e : g.edges)
        if (e.to == condition) ++into;
    CHECK(into == 1);  // ?node -> ?condition
}

TEST_CASE("print and parse round-trip") {
    for (const char* text : {kBuildingQuery, kTemperatureQuery, kCriticalQuery}) {
        ParsedQuery q = parse_query(text);
        ParsedQuery back = parse_query(print_query(q));
        CHECK(back == q);
    }
}

TEST_CASE("randomized round-trip over the subset") {
    std::mt19937 rng(7777);
    auto var = [&](int i) { return Var{"v" + std::to_string(i)}; };
    for (int round = 0; round < 500; ++round) {
        ParsedQuery q;
        size_t npat = 1 + rng() % 4;
        for (size_t i = 0; i < npat; ++i) {
            TriplePattern p;
            p.subject = var(int(rng() % 3));
            p.predicate = Term::iri("http://m.example/p" + std::to_string(rng() % 5));
            switch (rng() % 4) {
                case 0: p.object = var(int(3 + rng() % 3)); break;
                case 1: p.object = Term::integer(int32_t(rng()) % 100); break;
                case 2: p.object = Term::str("lit \"x\" " + std::to_string(rng() % 9)); break;
                default: p.object = Term::iri("http://m.example/o" + std::to_string(rng() % 5));
            }
            q.patterns.push_back(p);
        }
        auto pvars = q.pattern_vars();
        auto pick_var = [&]() { return pvars[rng() % pvars.size()]; };
        if (rng() % 2) {
            FilterComparison f;
            f.lhs = pick_var();
            f.op = CmpOp(rng() % 6);
            f.rhs = rng() % 2 ? FilterOperand(pick_var())
                              : FilterOperand(Term::real(float(int(rng() % 100)) / 4.f));
            q.filters.push_back(f);
        }
        bool use_agg = rng() % 3 == 0;
        if (use_agg) {
            if (rng() % 2) q.group_by.push_back(pvars[0]);
            for (const Var& v : q.group_by) q.select.push_back(v);
            AggExpr a;
            a.fn = AggFn(rng() % 5);
            a.arg = a.fn == AggFn::Count && rng() % 2 ? std::nullopt : std::optional<Var>(pick_var());
            a.alias = Var{"agg"};
            q.select.push_back(a);
            if (rng() % 2) {
                q.having = HavingCond{a, std::nullopt, CmpOp(rng() % 6), Term::integer(5)};
            }
        } else {
            q.select.push_back(pvars[0]);
            if (rng() % 2 && pvars.size() > 1) q.select.push_back(pvars[1]);
            if (rng() % 2) q.order_by.push_back({pvars[0], rng() % 2 == 0});
        }
        q.distinct = rng() % 4 == 0;
        if (rng() % 3 == 0) q.limit = rng() % 20;
        if (rng() % 4 == 0) q.offset = rng() % 5;

        ParsedQuery back = parse_query(print_query(q));
        REQUIRE(back == q);
    }
}

TEST_CASE("select star expands to the pattern variables in order") {
    ParsedQuery q = parse_query("SELECT * WHERE { ?b <http://p/x> ?a . ?a <http://p/y> ?c . }");
    REQUIRE(q.select.size() == 3);
    CHECK(std::get<Var>(q.select[0]).name == "b");
    CHECK(std::get<Var>(q.select[1]).name == "a");
    CHECK(std::get<Var>(q.select[2]).name == "c");
}

TEST_CASE("unknown select variables are rejected, not repaired") {
    try {
        parse_query("SELECT ?nope WHERE { ?s <http://p/q> ?o . }");
        FAIL("expected SyntaxError");
    } catch (const ParseError& e) {
        CHECK(e.code() == Errc::SyntaxError);
    }
}

TEST_CASE("out-of-subset constructs are called out distinctly") {
    try {
        parse_query("SELECT ?s WHERE { ?s <http://p/q> ?o . OPTIONAL { ?s <http://p/r> ?x . } }");
        FAIL("expected UnsupportedConstruct");
    } catch (const ParseError& e) {
        CHECK(e.code() == Errc::UnsupportedConstruct);
    }
    CHECK_THROWS_AS(parse_query("ASK { ?s ?p ?o }"), ParseError);
}

TEST_CASE("syntax errors carry a position") {
    try {
        parse_query("SELECT ?s WHERE {\n  ?s <http://p> }\n");
        FAIL("expected SyntaxError");
    } catch (const ParseError& e) {
        CHECK(e.code() == Errc::SyntaxError);
        CHECK(e.line() == 2);
        CHECK(e.column() > 1);
    }
}

TEST_CASE("unknown prefixes are an error") {
    CHECK_THROWS_AS(parse_query("SELECT ?s WHERE { ?s nope:p ?o . }"), ParseError);
}

TEST_CASE("aggregates without grouping must stand alone") {
    CHECK_THROWS_AS(parse_query("SELECT ?s COUNT(*) WHERE { ?s <http://p> ?o . }"), ParseError);
    ParsedQuery ok = parse_query("SELECT (COUNT(*) AS ?n) WHERE { ?s <http://p> ?o . }");
    CHECK(ok.select.size() == 1);
}

TEST_CASE("grouped plain select variables must be grouped") {
    CHECK_THROWS_AS(
        parse_query("SELECT ?o COUNT(*) WHERE { ?s <http://p> ?o . } GROUP BY ?s"),
        ParseError);
}

TEST_CASE("modifiers parse") {
    ParsedQuery q = parse_query(
        "SELECT DISTINCT ?s WHERE { ?s <http://p> ?o . } ORDER BY DESC(?s) ?o LIMIT 5 OFFSET 2");
    CHECK(q.distinct);
    REQUIRE(q.order_by.size() == 2);
    CHECK(q.order_by[0].descending);
    CHECK(!q.order_by[1].descending);
    CHECK(q.limit == 5);
    CHECK(q.offset == 2);
}
