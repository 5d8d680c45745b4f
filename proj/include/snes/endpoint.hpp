#pragma once

#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "snes/netsim.hpp"
#include "snes/oracle.hpp"
#include "snes/planner.hpp"

namespace snes {

// ---------------------------------------------------------------------------
// SPARQL JSON results

inline nlohmann::json term_to_json(const Term& t) {
    nlohmann::json j;
    switch (t.kind()) {
        case TermKind::Iri:
            j["type"] = "uri";
            j["value"] = t.lexical();
            break;
        case TermKind::StringLit:
            j["type"] = "literal";
            j["value"] = t.lexical();
            break;
        case TermKind::IntLit:
            j["type"] = "literal";
            j["value"] = t.value_text();
            j["datatype"] = "http://www.w3.org/2001/XMLSchema#integer";
            break;
        case TermKind::FloatLit:
            j["type"] = "literal";
            j["value"] = t.value_text();
            j["datatype"] = "http://www.w3.org/2001/XMLSchema#float";
            break;
    }
    return j;
}

inline nlohmann::json table_to_sparql_json(const ResultTable& t) {
    nlohmann::json j;
    j["head"]["vars"] = t.vars;
    nlohmann::json bindings = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json b = nlohmann::json::object();
        for (size_t i = 0; i < t.vars.size(); ++i)
            if (row[i]) b[t.vars[i]] = term_to_json(*row[i]);
        bindings.push_back(std::move(b));
    }
    j["results"]["bindings"] = std::move(bindings);
    return j;
}

inline Term term_from_json(const nlohmann::json& j) {
    std::string type = j.at("type").get<std::string>();
    std::string value = j.at("value").get<std::string>();
    if (type == "uri") return Term::iri(value);
    if (j.contains("datatype")) {
        std::string dt = j["datatype"].get<std::string>();
        if (dt.find("integer") != std::string::npos || dt.find("#int") != std::string::npos) {
            int32_t v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec == std::errc() && p == value.data() + value.size()) return Term::integer(v);
        }
        if (dt.find("float") != std::string::npos || dt.find("double") != std::string::npos ||
            dt.find("decimal") != std::string::npos) {
            float v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec == std::errc()) return Term::real(v);
        }
    }
    return Term::str(value);
}

inline ResultTable table_from_sparql_json(const nlohmann::json& j) {
    ResultTable t;
    for (const auto& v : j.at("head").at("vars")) t.vars.push_back(v.get<std::string>());
    for (const auto& b : j.at("results").at("bindings")) {
        std::vector<std::optional<Term>> row;
        for (const auto& var : t.vars) {
            if (b.contains(var))
                row.push_back(term_from_json(b.at(var)));
            else
                row.push_back(std::nullopt);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Web sources

/// An upstream answering SPARQL subqueries: the standard HTTP protocol in
/// live mode, an in-process store in tests.
class WebSource {
public:
    virtual ~WebSource() = default;
    virtual ResultTable query(const std::string& sparql) = 0;
};

class MockWebSource : public WebSource {
public:
    explicit MockWebSource(std::vector<Triple> data) : data_(std::move(data)) {}

    ResultTable query(const std::string& sparql) override {
        queries_seen_.push_back(sparql);
        return eval_reference(data_, parse_query(sparql));
    }

    const std::vector<Triple>& data() const { return data_; }
    const std::vector<std::string>& queries_seen() const { return queries_seen_; }

private:
    std::vector<Triple> data_;
    std::vector<std::string> queries_seen_;
};

} // namespace snes

#include "httplib.h"

namespace snes {

/// Speaks the SPARQL HTTP protocol against any endpoint URL: the query
/// travels as a form parameter, results come back as SPARQL JSON.
class HttpWebSource : public WebSource {
public:
    explicit HttpWebSource(std::string url, int timeout_ms = 5000, int retries = 1)
        : url_(std::move(url)), timeout_ms_(timeout_ms), retries_(retries) {}

    ResultTable query(const std::string& sparql) override {
        auto [base, path] = split_url(url_);
        httplib::Client client(base);
        client.set_connection_timeout(0, timeout_ms_ * 1000);
        client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        httplib::Params params{{"query", sparql}};
        for (int attempt = 0; attempt <= retries_; ++attempt) {
            auto res = client.Post(path, params);
            if (!res) continue;
            if (res->status != 200)
                throw Error(Errc::UpstreamTimeout,
                            "endpoint " + url_ + " answered " + std::to_string(res->status));
            return table_from_sparql_json(nlohmann::json::parse(res->body));
        }
        throw Error(Errc::UpstreamTimeout, "endpoint " + url_ + " is unreachable");
    }

private:
    static std::pair<std::string, std::string> split_url(const std::string& url) {
        size_t scheme = url.find("://");
        size_t path_start = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
        if (path_start == std::string::npos) return {url, "/"};
        return {url.substr(0, path_start), url.substr(path_start)};
    }

    std::string url_;
    int timeout_ms_;
    int retries_;
};

// ---------------------------------------------------------------------------
// The SELDA service

struct ServiceOptions {
    size_t mtu = kDefaultMtu;
    uint64_t seed = 0;
    uint64_t aggregate_interval_ms = 1000;
    uint16_t lifetime_s = 60;
    int upstream_timeout_ms = 5000;
    double drop_probability = 0.0;
};

struct QueryStats {
    size_t string_requests_issued = 0;
    size_t distinct_result_hashes = 0;
    size_t device_messages = 0;  // simulator messages caused by this query
};

/// Parses, splits and dispatches queries, assembles partial results and
/// serves SPARQL over HTTP.
class Service {
public:
    Service(Topology topo, DataModelGraph model, EndpointMap endpoints, ServiceOptions opt = ServiceOptions())
        : model_(std::move(model)), endpoints_(std::move(endpoints)), opt_(opt),
          sim_(std::move(topo), sim_options(opt)) {}

    Simulator& simulator() { return sim_; }
    const Simulator& simulator() const { return sim_; }

    void load_device_triples(uint32_t dev, const std::vector<Triple>& triples) {
        for (const Triple& t : triples) sim_.device_store(dev).insert(t);
    }

    void set_local_triples(std::vector<Triple> triples) { local_ = std::move(triples); }

    /// Tests register in-process sources per endpoint URL; anything
    /// unregistered is reached over HTTP.
    void register_web_source(const std::string& url, std::shared_ptr<WebSource> source) {
        web_sources_[url] = std::move(source);
    }

    const QueryStats& last_stats() const { return stats_; }

    /// The whole pipeline: parse, plan, dispatch device and web parts,
    /// resolve hashes, join at the split points, apply the finalizers.
    ResultTable execute(const std::string& text) {
        std::lock_guard<std::mutex> lock(mutex_);
        stats_ = {};
        resolved_this_query_.clear();
        hashes_this_query_.clear();
        ParsedQuery pq = parse_query(text);
        QueryPlan plan = classify(pq, model_, endpoints_, PlannerOptions{opt_.lifetime_s});

        if (plan.known_empty) return empty_table(pq);

        std::future<ResultTable> web_future;
        if (plan.web_part) {
            web_future = std::async(std::launch::async, [this, &plan]() {
                return web_source_for(plan.web_part->endpoint_url)->query(plan.web_part->subquery);
            });
        }

        std::vector<ResultTable> partials;
        if (plan.device_query) {
            size_t messages_before = sim_.message_count();
            DeviceQuery dq = *plan.device_query;
            dq.query_id = next_query_id();
            sim_.post_query(dq);
            sim_.run_until_idle();
            for (const ComponentSchema& comp : plan.components) {
                if (!plan.pushed_aggregate &&
                    sim_.end_marker_count(dq.query_id, comp.producer_op_id) != sim_.device_count())
                    throw Error(Errc::UpstreamTimeout, "device network did not complete the query");
            }
            if (plan.pushed_aggregate) {
                partials.push_back(aggregate_partial(dq.query_id, plan));
            } else {
                for (const ComponentSchema& comp : plan.components)
                    partials.push_back(component_partial(dq.query_id, comp));
            }
            stats_.device_messages = sim_.message_count() - messages_before;
        }

        if (plan.web_part) {
            if (web_future.wait_for(std::chrono::milliseconds(opt_.upstream_timeout_ms)) !=
                std::future_status::ready)
                throw Error(Errc::UpstreamTimeout, "external endpoint timed out");
            partials.push_back(web_future.get());
        }

        return assemble(partials, plan);
    }

    /// Joins the partial results on the split-point variables and applies
    /// the final operations in SPARQL order.
    ResultTable assemble(const std::vector<ResultTable>& partials, const QueryPlan& plan) {
        const ParsedQuery& q = plan.query;
        if (partials.empty()) return empty_table(q);

        ResultTable acc = partials[0];
        for (size_t i = 1; i < partials.size(); ++i) acc = hash_join(acc, partials[i]);

        for (const FilterComparison& f : plan.base_filters) {
            std::vector<std::vector<std::optional<Term>>> kept;
            for (auto& row : acc.rows)
                if (base_filter_holds(f, acc, row)) kept.push_back(std::move(row));
            acc.rows = std::move(kept);
        }

        if (plan.pushed_aggregate) {
            apply_having_on_aliases(q, acc);
        } else if (q.has_aggregates() || !q.group_by.empty()) {
            acc = group_and_aggregate(q, acc);
        }

        std::vector<size_t> proj;
        ResultTable out;
        out.ordered = !q.order_by.empty();
        for (const auto& s : q.select) {
            const std::string& name =
                std::holds_alternative<Var>(s) ? std::get<Var>(s).name : std::get<AggExpr>(s).alias.name;
            out.vars.push_back(name);
            proj.push_back(acc.column_of(name));
        }

        order_rows(q, acc, proj);

        for (const auto& row : acc.rows) {
            std::vector<std::optional<Term>> r;
            for (size_t i : proj) r.push_back(row[i]);
            out.rows.push_back(std::move(r));
        }

        if (q.distinct) {
            std::vector<std::vector<std::optional<Term>>> unique;
            for (const auto& row : out.rows) {
                bool seen = false;
                for (const auto& u : unique) {
                    bool eq = u.size() == row.size();
                    for (size_t i = 0; eq && i < row.size(); ++i) eq = cell_equal(u[i], row[i]);
                    if (eq) seen = true;
                }
                if (!seen) unique.push_back(row);
            }
            out.rows = std::move(unique);
        }
        if (q.offset)
            out.rows.erase(out.rows.begin(),
                           out.rows.begin() + std::min<size_t>(*q.offset, out.rows.size()));
        if (q.limit && out.rows.size() > *q.limit) out.rows.resize(*q.limit);
        return out;
    }

private:
    static Simulator::Options sim_options(const ServiceOptions& o) {
        Simulator::Options s;
        s.mtu = o.mtu;
        s.aggregate_interval_ms = o.aggregate_interval_ms;
        s.seed = o.seed;
        s.drop_probability = o.drop_probability;
        return s;
    }

    uint8_t next_query_id() {
        qid_ = uint8_t(qid_ % 255 + 1);  // 1..255; 0 is reserved for plain string requests
        return qid_;
    }

    static ResultTable empty_table(const ParsedQuery& q) {
        ResultTable t;
        for (const auto& s : q.select)
            t.vars.push_back(std::holds_alternative<Var>(s) ? std::get<Var>(s).name
                                                            : std::get<AggExpr>(s).alias.name);
        return t;
    }

    WebSource* web_source_for(const std::string& url) {
        auto it = web_sources_.find(url);
        if (it != web_sources_.end()) return it->second.get();
        if (url == "local") {
            auto src = std::make_shared<MockWebSource>(local_);
            auto* raw = src.get();
            web_sources_[url] = std::move(src);
            return raw;
        }
        auto src = std::make_shared<HttpWebSource>(url, opt_.upstream_timeout_ms);
        auto* raw = src.get();
        web_sources_[url] = std::move(src);
        return raw;
    }

    /// One collect stream, hashes resolved to terms via string requests.
    ResultTable component_partial(uint8_t qid, const ComponentSchema& comp) {
        std::vector<ValueType> types;
        ResultTable t;
        for (const ColumnBinding& c : comp.columns) {
            types.push_back(c.type);
            t.vars.push_back(c.var);
        }
        std::vector<Row> raw;
        for (const BaseRow& br : sim_.base_rows(qid)) {
            if (br.msg.op_id != comp.producer_op_id || br.msg.end_marker) continue;
            raw.push_back(row_from_wire(br.msg, types));
        }
        for (const Row& row : raw) {
            std::vector<std::optional<Term>> cells;
            for (size_t i = 0; i < row.arity; ++i) {
                const RowValue& v = row.vals[i];
                if (v.type == ValueType::StringHash)
                    cells.push_back(resolve_hash_term(v.bits, qid));
                else if (v.type == ValueType::Int)
                    cells.push_back(Term::integer(v.as_int()));
                else
                    cells.push_back(Term::real(v.as_float()));
            }
            t.rows.push_back(std::move(cells));
        }
        return t;
    }

    ResultTable aggregate_partial(uint8_t qid, const QueryPlan& plan) {
        const PushedAggregate& pa = *plan.pushed_aggregate;
        auto state = sim_.base_aggregate(qid);
        if (!state) throw Error(Errc::SchemaMismatch, "no aggregate state at the base");
        ResultTable t;
        for (const Var& v : pa.aliases) t.vars.push_back(v.name);
        std::vector<std::optional<Term>> row;
        auto emitted = state->emit();
        for (size_t i = 0; i < emitted.size(); ++i) {
            if (!emitted[i]) {
                row.push_back(std::nullopt);
                continue;
            }
            const RowValue& v = *emitted[i];
            if (v.type == ValueType::Int)
                row.push_back(Term::integer(v.as_int()));
            else if (v.type == ValueType::Float)
                row.push_back(Term::real(v.as_float()));
            else
                row.push_back(resolve_hash_term(v.bits, qid));
        }
        t.rows.push_back(std::move(row));
        return t;
    }

    /// Each distinct hash triggers at most one string request; resolved
    /// pairs are cached across queries. Unresolvable hashes render as a
    /// tagged unknown marker.
    Term resolve_hash_term(uint32_t hash, uint8_t qid) {
        if (hashes_this_query_.insert(hash).second)
            stats_.distinct_result_hashes = hashes_this_query_.size();
        auto it = hash_cache_.find(hash);
        if (it != hash_cache_.end()) return it->second;
        if (auto pending = resolved_this_query_.find(hash); pending != resolved_this_query_.end())
            return pending->second;
        ++stats_.string_requests_issued;
        auto answer = sim_.request_string(hash, qid);
        Term term = answer ? (answer->first == kStringIri ? Term::iri(answer->second)
                                                          : Term::str(answer->second))
                           : unresolved_marker(hash);
        if (answer)
            hash_cache_[hash] = term;
        else
            resolved_this_query_[hash] = term;  // do not cache absence across queries
        return term;
    }

    static Term unresolved_marker(uint32_t hash) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%08x", hash);
        return Term::str(std::string("urn:snes:unresolved-hash:") + buf);
    }

    ResultTable hash_join(const ResultTable& a, const ResultTable& b) {
        std::vector<size_t> a_keys, b_keys;
        for (size_t i = 0; i < a.vars.size(); ++i)
            for (size_t j = 0; j < b.vars.size(); ++j)
                if (a.vars[i] == b.vars[j]) {
                    a_keys.push_back(i);
                    b_keys.push_back(j);
                }
        ResultTable out;
        out.vars = a.vars;
        std::vector<size_t> b_extra;
        for (size_t j = 0; j < b.vars.size(); ++j) {
            if (std::find(b_keys.begin(), b_keys.end(), j) == b_keys.end()) {
                out.vars.push_back(b.vars[j]);
                b_extra.push_back(j);
            }
        }
        // Index b by its key cells.
        std::map<std::string, std::vector<size_t>> index;
        auto key_of = [](const std::vector<std::optional<Term>>& row, const std::vector<size_t>& keys) {
            std::ostringstream os;
            for (size_t k : keys) {
                if (row[k])
                    os << int(row[k]->kind()) << "\x1f" << row[k]->lexical() << "\x1f"
                       << row[k]->value_text() << "\x1e";
                else
                    os << "~\x1e";
            }
            return os.str();
        };
        for (size_t r = 0; r < b.rows.size(); ++r) index[key_of(b.rows[r], b_keys)].push_back(r);
        for (const auto& ra : a.rows) {
            auto it = index.find(key_of(ra, a_keys));
            if (it == index.end()) continue;
            for (size_t rb : it->second) {
                std::vector<std::optional<Term>> row = ra;
                for (size_t j : b_extra) row.push_back(b.rows[rb][j]);
                out.rows.push_back(std::move(row));
            }
        }
        return out;
    }

    bool base_filter_holds(const FilterComparison& f, const ResultTable& t,
                           const std::vector<std::optional<Term>>& row) const {
        auto value = [&](const FilterOperand& o) -> std::optional<Term> {
            if (auto* term = std::get_if<Term>(&o)) return *term;
            return row[t.column_of(std::get<Var>(o).name)];
        };
        auto l = value(f.lhs), r = value(f.rhs);
        if (!l || !r) return false;
        return compare_terms(*l, f.op, *r);
    }

    ResultTable group_and_aggregate(const ParsedQuery& q, const ResultTable& in) {
        std::vector<AggExpr> aggs;
        for (const auto& s : q.select)
            if (auto* a = std::get_if<AggExpr>(&s)) aggs.push_back(*a);
        if (q.having && q.having->agg) {
            bool present = false;
            for (const AggExpr& a : aggs)
                if (a.fn == q.having->agg->fn && a.arg == q.having->agg->arg) present = true;
            if (!present) aggs.push_back(*q.having->agg);
        }
        ResultTable out;
        for (const Var& v : q.group_by) out.vars.push_back(v.name);
        for (const AggExpr& a : aggs) out.vars.push_back(a.alias.name);

        std::vector<size_t> group_cols;
        for (const Var& v : q.group_by) group_cols.push_back(in.column_of(v.name));

        std::map<std::string, std::pair<std::vector<std::optional<Term>>, std::vector<size_t>>> groups;
        auto key_of = [&](const std::vector<std::optional<Term>>& row) {
            std::ostringstream os;
            for (size_t c : group_cols) {
                if (row[c])
                    os << int(row[c]->kind()) << "\x1f" << row[c]->lexical() << "\x1f"
                       << row[c]->value_text() << "\x1e";
                else
                    os << "~\x1e";
            }
            return os.str();
        };
        if (q.group_by.empty()) groups[""] = {{}, {}};
        for (size_t r = 0; r < in.rows.size(); ++r) {
            auto& g = groups[key_of(in.rows[r])];
            if (g.first.empty() && !group_cols.empty())
                for (size_t c : group_cols) g.first.push_back(in.rows[r][c]);
            g.second.push_back(r);
        }
        for (auto& [key, group] : groups) {
            std::vector<std::optional<Term>> row = group.first;
            std::map<std::string, std::optional<Term>> agg_values;
            for (const AggExpr& a : aggs) {
                auto v = aggregate_terms(a, in, group.second);
                agg_values[a.alias.name] = v;
                row.push_back(v);
            }
            if (q.having) {
                std::optional<Term> subject = q.having->agg
                                                  ? agg_values[q.having->agg->alias.name]
                                                  : agg_values[q.having->var->name];
                if (!subject || !compare_terms(*subject, q.having->op, q.having->constant)) continue;
            }
            out.rows.push_back(std::move(row));
        }
        return out;
    }

    std::optional<Term> aggregate_terms(const AggExpr& agg, const ResultTable& t,
                                        const std::vector<size_t>& rows) const {
        if (agg.fn == AggFn::Count) return Term::integer(int32_t(rows.size()));
        if (!agg.arg) return std::nullopt;
        size_t col = t.column_of(agg.arg->name);
        if (agg.fn == AggFn::Min || agg.fn == AggFn::Max) {
            std::optional<Term> best;
            for (size_t r : rows) {
                const auto& cell = t.rows[r][col];
                if (!cell) continue;
                if (!best) {
                    best = cell;
                    continue;
                }
                int c = term_order(*cell, *best);
                if ((agg.fn == AggFn::Min && c < 0) || (agg.fn == AggFn::Max && c > 0)) best = cell;
            }
            return best;
        }
        bool all_int = true;
        int64_t isum = 0;
        double fsum = 0;
        for (size_t r : rows) {
            const auto& cell = t.rows[r][col];
            if (!cell || !cell->is_numeric()) return std::nullopt;
            if (cell->kind() == TermKind::IntLit)
                isum += cell->int_value();
            else
                all_int = false;
            fsum += cell->as_double();
        }
        if (agg.fn == AggFn::Sum) {
            if (rows.empty()) return Term::integer(0);
            return all_int ? Term::integer(int32_t(isum)) : Term::real(float(fsum));
        }
        if (rows.empty()) return std::nullopt;
        return Term::real(float(fsum / double(rows.size())));
    }

    void apply_having_on_aliases(const ParsedQuery& q, ResultTable& t) const {
        if (!q.having) return;
        std::string alias;
        if (q.having->var) {
            alias = q.having->var->name;
        } else {
            for (const auto& s : q.select)
                if (auto* a = std::get_if<AggExpr>(&s))
                    if (a->fn == q.having->agg->fn && a->arg == q.having->agg->arg)
                        alias = a->alias.name;
        }
        size_t col = t.column_of(alias);
        std::vector<std::vector<std::optional<Term>>> kept;
        for (auto& row : t.rows)
            if (row[col] && compare_terms(*row[col], q.having->op, q.having->constant))
                kept.push_back(std::move(row));
        t.rows = std::move(kept);
    }

    /// Ties break on the projected row, matching the reference evaluator.
    void order_rows(const ParsedQuery& q, ResultTable& t, const std::vector<size_t>& proj) const {
        if (q.order_by.empty()) return;
        std::vector<size_t> keys;
        std::vector<bool> desc;
        for (const OrderKey& k : q.order_by) {
            keys.push_back(t.column_of(k.var.name));
            desc.push_back(k.descending);
        }
        std::stable_sort(t.rows.begin(), t.rows.end(), [&](const auto& a, const auto& b) {
            for (size_t i = 0; i < keys.size(); ++i) {
                int c = cell_order(a[keys[i]], b[keys[i]]);
                if (c != 0) return desc[i] ? c > 0 : c < 0;
            }
            for (size_t p : proj)
                if (int c = cell_order(a[p], b[p])) return c < 0;
            return false;
        });
    }

    DataModelGraph model_;
    EndpointMap endpoints_;
    ServiceOptions opt_;
    Simulator sim_;
    std::vector<Triple> local_;
    std::map<std::string, std::shared_ptr<WebSource>> web_sources_;
    std::unordered_map<uint32_t, Term> hash_cache_;
    std::unordered_map<uint32_t, Term> resolved_this_query_;
    std::set<uint32_t> hashes_this_query_;
    QueryStats stats_;
    uint8_t qid_ = 0;
    std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// HTTP front

/// Maps library errors to distinct protocol responses.
inline int http_status_for(Errc c) {
    switch (c) {
        case Errc::SyntaxError:
        case Errc::UnsupportedConstruct: return 400;
        case Errc::Unanswerable:         return 422;
        case Errc::UpstreamTimeout:      return 504;
        default:                         return 500;
    }
}

class EndpointServer {
public:
    explicit EndpointServer(Service& service) : service_(service) {
        server_.Get("/sparql", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
        });
        server_.Post("/sparql", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res);
        });
    }

    /// Blocks; stop() from another thread shuts the server down.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    bool bind_to_port(const std::string& host, int port) { return server_.bind_to_port(host, port); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    bool is_running() const { return server_.is_running(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        std::string query;
        if (req.has_param("query"))
            query = req.get_param_value("query");
        else if (!req.body.empty() && req.get_header_value("Content-Type") == "application/sparql-query")
            query = req.body;
        if (query.empty()) {
            res.status = 400;
            res.set_content(R"({"error":"SyntaxError","message":"missing query parameter"})",
                            "application/json");
            return;
        }
        try {
            ResultTable table = service_.execute(query);
            res.set_content(table_to_sparql_json(table).dump(2), "application/sparql-results+json");
        } catch (const Error& e) {
            res.status = http_status_for(e.code());
            nlohmann::json j{{"error", errc_name(e.code())}, {"message", e.what()}};
            res.set_content(j.dump(2), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            nlohmann::json j{{"error", "Internal"}, {"message", e.what()}};
            res.set_content(j.dump(2), "application/json");
        }
    }

    Service& service_;
    httplib::Server server_;
};

} // namespace snes
