#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "snes/wire.hpp"

namespace snes {

inline constexpr uint32_t kBaseId = 0;  // the routing-tree root hosting the endpoint

/// The routing tree: every device has one parent link with a fixed
/// simulated latency; parent 0 is the base station.
struct Topology {
    std::map<uint32_t, uint32_t> parent;
    std::map<uint32_t, uint32_t> latency_ms;
    std::map<uint32_t, std::vector<uint32_t>> children;
    std::vector<uint32_t> device_ids;

    static Topology parse(std::istream& in) {
        Topology t;
        std::string line;
        unsigned line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::istringstream ls(line);
            std::string dev_s, parent_s;
            uint32_t latency = 0;
            if (!(ls >> dev_s)) continue;
            if (dev_s[0] == '#') continue;
            if (!(ls >> parent_s >> latency))
                throw ParseError(Errc::SyntaxError, "topology line needs: device parent latency_ms",
                                 line_no, 1);
            uint32_t dev = parse_id(dev_s, line_no);
            uint32_t par = (parent_s == "-") ? kBaseId : parse_id(parent_s, line_no);
            if (dev == kBaseId) throw ParseError(Errc::SyntaxError, "device id 0 is the base", line_no, 1);
            if (t.parent.count(dev)) throw ParseError(Errc::SyntaxError, "duplicate device", line_no, 1);
            t.parent[dev] = par;
            t.latency_ms[dev] = latency;
        }
        t.finish();
        return t;
    }

    static Topology parse_text(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    void finish() {
        children.clear();
        device_ids.clear();
        for (auto& [dev, par] : parent) {
            device_ids.push_back(dev);
            children[par].push_back(dev);
        }
        for (auto& [p, cs] : children) std::sort(cs.begin(), cs.end());
        // Every parent chain must reach the base without cycles.
        for (auto& [dev, par] : parent) {
            uint32_t cur = dev;
            size_t hops = 0;
            while (cur != kBaseId) {
                auto it = parent.find(cur);
                if (it == parent.end()) throw Error(Errc::SyntaxError, "parent device does not exist");
                cur = it->second;
                if (++hops > parent.size()) throw Error(Errc::SyntaxError, "topology contains a cycle");
            }
        }
    }

    const std::vector<uint32_t>& children_of(uint32_t dev) const {
        static const std::vector<uint32_t> none;
        auto it = children.find(dev);
        return it == children.end() ? none : it->second;
    }

    size_t depth_of(uint32_t dev) const {
        size_t d = 0;
        while (dev != kBaseId) {
            dev = parent.at(dev);
            ++d;
        }
        return d;
    }

private:
    static uint32_t parse_id(const std::string& s, unsigned line_no) {
        try {
            size_t pos = 0;
            unsigned long v = std::stoul(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return uint32_t(v);
        } catch (const std::exception&) {
            throw ParseError(Errc::SyntaxError, "bad device id '" + s + "'", line_no, 1);
        }
    }
};

struct TraceEntry {
    uint64_t time_ms = 0;
    uint32_t src = 0, dst = 0;
    MsgType type = MsgType::Query;
    size_t size_bytes = 0;
};

inline const char* msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::Query:      return "QUERY";
        case MsgType::ResultRow:  return "RESULT_ROW";
        case MsgType::AggRow:     return "AGG_ROW";
        case MsgType::StringReq:  return "STRING_REQ";
        case MsgType::StringResp: return "STRING_RESP";
    }
    return "?";
}

inline std::string trace_line(const TraceEntry& e) {
    auto name = [](uint32_t id) { return id == kBaseId ? std::string("base") : std::to_string(id); };
    std::ostringstream os;
    os << e.time_ms << " " << name(e.src) << " " << name(e.dst) << " " << msg_type_name(e.type) << " "
       << e.size_bytes;
    return os.str();
}

/// A result-bearing message as it arrived at the base station.
struct BaseRow {
    uint64_t time_ms = 0;
    RowMessage msg;
};

struct SimulatorOptions {
    size_t mtu = kDefaultMtu;
    uint64_t aggregate_interval_ms = 1000;
    uint64_t seed = 0;
    double drop_probability = 0.0;  // correctness is asserted at 0 only
    size_t join_buffer_limit = kDefaultJoinBufferLimit;
    size_t hash_cache_capacity = 256;
};

/// Deterministic discrete-event simulation of query distribution, result
/// forwarding, in-network aggregation and string resolution over the tree.
class Simulator {
public:
    using Options = SimulatorOptions;

    explicit Simulator(Topology topo, Options opt = Options())
        : topo_(std::move(topo)), opt_(opt), rng_(opt.seed) {
        for (uint32_t dev : topo_.device_ids) devices_.emplace(dev, Device{opt_.hash_cache_capacity});
    }

    TupleStore& device_store(uint32_t dev) { return device_of(dev).store; }
    const Topology& topology() const { return topo_; }
    size_t device_count() const { return devices_.size(); }
    uint64_t now_ms() const { return now_; }

    /// Sends the query to all base children, split at operator boundaries.
    void post_query(const DeviceQuery& q) {
        std::vector<Bytes> messages = encode_query(q, opt_.mtu);
        BaseQueryState state;
        state.query = q;
        state.posted_ms = now_;
        state.expiry_ms = now_ + uint64_t(q.lifetime_s) * 1000;
        for (const auto& d : q.ops) {
            if (d.parent_id == kNoParent && d.type == OpType::Aggregate) {
                state.agg_op_id = d.op_id;
                state.agg_spec = std::get<AggregateParams>(d.params).columns;
                state.has_agg_root = true;
            }
        }
        base_queries_[q.query_id] = std::move(state);
        for (const Bytes& m : messages)
            for (uint32_t child : topo_.children_of(kBaseId)) send(kBaseId, child, m);
    }

    /// Floods a string request from the base; devices answer from cache or
    /// dictionary, otherwise forward to their children. Returns (kind, text).
    std::optional<std::pair<uint8_t, std::string>> request_string(uint32_t hash, uint8_t query_id = 0) {
        base_string_results_.erase(hash);
        const auto& kids = topo_.children_of(kBaseId);
        if (kids.empty()) return std::nullopt;
        base_pending_string_[hash] = int(kids.size());
        Bytes req = encode_string_request(query_id, hash);
        for (uint32_t child : kids) send(kBaseId, child, req);
        run_until_idle();
        auto it = base_string_results_.find(hash);
        if (it == base_string_results_.end() || it->second.kind == kStringAbsent) return std::nullopt;
        return std::make_pair(it->second.kind, it->second.text);
    }

    /// A device application pushing a fresh row into an active query
    /// (sensor updates between aggregate intervals).
    void schedule_device_row(uint32_t dev, uint8_t qid, const Row& row, uint64_t at_ms) {
        Event e;
        e.time = at_ms;
        e.seq = seq_++;
        e.kind = Event::LocalRow;
        e.dev = dev;
        e.qid = qid;
        e.row = row;
        queue_.push(std::move(e));
    }

    void run_until_idle() {
        size_t guard = 0;
        while (!queue_.empty()) {
            if (++guard > 50'000'000) throw Error(Errc::IoError, "event queue does not drain");
            Event e = queue_.top();
            queue_.pop();
            now_ = std::max(now_, e.time);
            dispatch(e);
        }
    }

    // --- observation -------------------------------------------------------

    const std::vector<TraceEntry>& trace() const { return trace_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    uint64_t device_dict_iterations(uint32_t dev) const { return device_of(dev).dict_iterations; }

    const std::vector<BaseRow>& base_rows(uint8_t qid) const { return base_query(qid).rows; }
    std::optional<uint64_t> first_result_ms(uint8_t qid) const { return base_query(qid).first_result_ms; }

    size_t end_marker_count(uint8_t qid, uint8_t producer_op) const {
        const auto& m = base_query(qid).end_markers;
        auto it = m.find(producer_op);
        return it == m.end() ? 0 : it->second;
    }

    /// Merged aggregation state as seen at the base station.
    std::optional<AggregateState> base_aggregate(uint8_t qid) const {
        const BaseQueryState& bq = base_query(qid);
        if (!bq.has_agg_root) return std::nullopt;
        AggregateState total(bq.agg_spec);
        for (const auto& [dev, st] : bq.agg_child_states) total.merge(st);
        return total;
    }

    uint64_t total_bytes_to(uint32_t dst, std::optional<MsgType> type = std::nullopt) const {
        uint64_t n = 0;
        for (const TraceEntry& e : trace_)
            if (e.dst == dst && (!type || e.type == *type)) n += e.size_bytes;
        return n;
    }

    uint64_t link_bytes(uint32_t src, uint32_t dst, std::optional<MsgType> type = std::nullopt) const {
        uint64_t n = 0;
        for (const TraceEntry& e : trace_)
            if (((e.src == src && e.dst == dst) || (e.src == dst && e.dst == src)) &&
                (!type || e.type == *type))
                n += e.size_bytes;
        return n;
    }

    size_t message_count(std::optional<MsgType> type = std::nullopt) const {
        size_t n = 0;
        for (const TraceEntry& e : trace_)
            if (!type || e.type == *type) ++n;
        return n;
    }

private:
    struct Device {
        explicit Device(size_t cache_capacity) : cache(cache_capacity) {}

        TupleStore store;
        HashCache cache;
        uint64_t dict_iterations = 0;

        struct ActiveQuery {
            uint16_t lifetime_s = 0;
            uint8_t total_ops = 0;
            std::map<uint8_t, std::vector<OperatorDescriptor>> fragments;  // by op index offset
            size_t received_ops = 0;
            bool instantiated = false;
            uint64_t expiry_ms = 0;
            std::unique_ptr<OperatorTree> tree;
            std::map<uint32_t, AggregateState> child_states;  // latest state per child device
            bool agg_dirty = false;
        };
        std::map<uint8_t, ActiveQuery> queries;
        std::map<uint32_t, int> pending_string;  // hash -> children still unanswered
    };

    struct BaseQueryState {
        DeviceQuery query;
        uint64_t posted_ms = 0;
        uint64_t expiry_ms = 0;
        bool has_agg_root = false;
        uint8_t agg_op_id = 0;
        std::vector<AggColumn> agg_spec;
        std::vector<BaseRow> rows;
        std::map<uint8_t, size_t> end_markers;
        std::optional<uint64_t> first_result_ms;
        std::map<uint32_t, AggregateState> agg_child_states;
    };

    struct Event {
        enum Kind { Deliver, Tick, Expire, LocalRow } kind = Deliver;
        uint64_t time = 0;
        uint64_t seq = 0;
        uint32_t from = 0, dev = 0;
        uint8_t qid = 0;
        Bytes payload;
        Row row;

        bool operator>(const Event& o) const {
            return time != o.time ? time > o.time : seq > o.seq;
        }
    };

    Device& device_of(uint32_t dev) {
        auto it = devices_.find(dev);
        if (it == devices_.end()) throw Error(Errc::SchemaMismatch, "unknown device id");
        return it->second;
    }
    const Device& device_of(uint32_t dev) const { return const_cast<Simulator*>(this)->device_of(dev); }

    const BaseQueryState& base_query(uint8_t qid) const {
        auto it = base_queries_.find(qid);
        if (it == base_queries_.end()) throw Error(Errc::SchemaMismatch, "unknown query id at base");
        return it->second;
    }

    void send(uint32_t from, uint32_t to, const Bytes& bytes) {
        if (bytes.size() > opt_.mtu)
            throw Error(Errc::MessageExceedsMtu,
                        "message of " + std::to_string(bytes.size()) + " bytes exceeds MTU");
        if (opt_.drop_probability > 0 &&
            std::uniform_real_distribution<double>(0, 1)(rng_) < opt_.drop_probability)
            return;
        // Link latency is keyed by the child end of the link.
        uint32_t link_end = (topo_.parent.count(to) && topo_.parent.at(to) == from) ? to : from;
        Event e;
        e.kind = Event::Deliver;
        e.time = now_ + topo_.latency_ms.at(link_end);
        e.seq = seq_++;
        e.from = from;
        e.dev = to;
        e.payload = bytes;
        queue_.push(std::move(e));
    }

    void schedule_tick(uint32_t dev, uint8_t qid, uint64_t at) {
        Event e;
        e.kind = Event::Tick;
        e.time = at;
        e.seq = seq_++;
        e.dev = dev;
        e.qid = qid;
        queue_.push(std::move(e));
    }

    void dispatch(const Event& e) {
        switch (e.kind) {
            case Event::Deliver:
                trace_.push_back({e.time, e.from, e.dev, MsgType(e.payload[0]), e.payload.size()});
                if (e.dev == kBaseId)
                    base_receive(e.from, e.payload);
                else
                    device_receive(e.dev, e.from, e.payload);
                return;
            case Event::Tick:
                device_tick(e.dev, e.qid);
                return;
            case Event::Expire: {
                Device& d = device_of(e.dev);
                d.queries.erase(e.qid);
                return;
            }
            case Event::LocalRow:
                device_local_row(e.dev, e.qid, e.row);
                return;
        }
    }

    void device_receive(uint32_t dev, uint32_t from, const Bytes& bytes) {
        Device& d = device_of(dev);
        DecodedMessage msg = decode_message(bytes);
        if (auto* q = std::get_if<QueryMessage>(&msg)) {
            for (uint32_t child : topo_.children_of(dev)) send(dev, child, bytes);
            handle_query_fragment(dev, d, *q);
        } else if (auto* r = std::get_if<RowMessage>(&msg)) {
            if (r->aggregate)
                handle_agg_row(dev, d, from, *r);
            else
                handle_result_row(dev, d, *r, bytes);
        } else if (auto* req = std::get_if<StringRequestMsg>(&msg)) {
            handle_string_request(dev, d, *req);
        } else if (auto* resp = std::get_if<StringResponseMsg>(&msg)) {
            handle_string_response(dev, d, *resp, bytes);
        }
    }

    void handle_query_fragment(uint32_t dev, Device& d, const QueryMessage& q) {
        auto it = d.queries.find(q.query_id);
        if (it != d.queries.end() && it->second.instantiated)
            d.queries.erase(it);  // a re-posted query id supersedes the old instance
        auto& aq = d.queries[q.query_id];
        aq.lifetime_s = q.lifetime_s;
        aq.total_ops = q.total_ops;
        if (!aq.fragments.count(q.op_index_offset)) {
            aq.received_ops += q.descriptors.size();
            aq.fragments[q.op_index_offset] = q.descriptors;
        }
        if (!aq.instantiated && aq.received_ops == aq.total_ops) instantiate(dev, d, q.query_id, aq);
    }

    void instantiate(uint32_t dev, Device& d, uint8_t qid, Device::ActiveQuery& aq) {
        std::vector<OperatorDescriptor> ops;
        for (auto& [off, frag] : aq.fragments) ops.insert(ops.end(), frag.begin(), frag.end());
        aq.tree = std::make_unique<OperatorTree>(std::move(ops), opt_.join_buffer_limit);
        aq.instantiated = true;
        aq.expiry_ms = now_ + uint64_t(aq.lifetime_s) * 1000;
        Event ex;
        ex.kind = Event::Expire;
        ex.time = aq.expiry_ms;
        ex.seq = seq_++;
        ex.dev = dev;
        ex.qid = qid;
        queue_.push(std::move(ex));

        uint32_t up = topo_.parent.at(dev);
        aq.tree->run(d.store, [&](const TaggedRow& tr) {
            send(dev, up, encode_result_row(qid, tr.producer_op_id, tr.row));
        });
        if (aq.tree->has_aggregate_root()) {
            aq.agg_dirty = aq.tree->aggregate_state().dirty();
            schedule_tick(dev, qid, now_ + opt_.aggregate_interval_ms);
        }
    }

    void handle_result_row(uint32_t dev, Device& d, const RowMessage& r, const Bytes& bytes) {
        auto it = d.queries.find(r.query_id);
        if (it == d.queries.end() || !it->second.instantiated) {
            diagnostics_.push_back("device " + std::to_string(dev) + ": row for unknown query " +
                                   std::to_string(r.query_id) + " dropped");
            return;
        }
        send(dev, topo_.parent.at(dev), bytes);  // Collect rows hop unchanged towards the base
    }

    void handle_agg_row(uint32_t dev, Device& d, uint32_t from, const RowMessage& r) {
        auto it = d.queries.find(r.query_id);
        if (it == d.queries.end() || !it->second.instantiated ||
            !it->second.tree->has_aggregate_root()) {
            diagnostics_.push_back("device " + std::to_string(dev) +
                                   ": aggregate row for unknown query dropped");
            return;
        }
        Device::ActiveQuery& aq = it->second;
        const auto& spec = aq.tree->aggregate_state().spec();
        aq.child_states[from] = agg_state_from_words(spec, r.words);
        aq.agg_dirty = true;
    }

    void device_tick(uint32_t dev, uint8_t qid) {
        Device& d = device_of(dev);
        auto it = d.queries.find(qid);
        if (it == d.queries.end() || !it->second.instantiated) return;
        Device::ActiveQuery& aq = it->second;
        if (aq.agg_dirty) {
            AggregateState effective = aq.tree->aggregate_state();
            for (const auto& [child, st] : aq.child_states) effective.merge(st);
            if (effective.update_count() > 0)
                send(dev, topo_.parent.at(dev),
                     encode_agg_row(qid, aq.tree->root_id(), effective));
            aq.agg_dirty = false;
        }
        uint64_t next = now_ + opt_.aggregate_interval_ms;
        if (next <= aq.expiry_ms) schedule_tick(dev, qid, next);
    }

    void device_local_row(uint32_t dev, uint8_t qid, const Row& row) {
        Device& d = device_of(dev);
        auto it = d.queries.find(qid);
        if (it == d.queries.end() || !it->second.instantiated) {
            diagnostics_.push_back("device " + std::to_string(dev) + ": local row for inactive query");
            return;
        }
        Device::ActiveQuery& aq = it->second;
        uint32_t up = topo_.parent.at(dev);
        aq.tree->push_external(row, [&](const TaggedRow& tr) {
            send(dev, up, encode_result_row(qid, tr.producer_op_id, tr.row));
        });
        if (aq.tree->has_aggregate_root()) aq.agg_dirty = true;
    }

    void handle_string_request(uint32_t dev, Device& d, const StringRequestMsg& req) {
        uint32_t up = topo_.parent.at(dev);
        auto found = resolve_hash(d.cache, d.store, req.hash, &d.dict_iterations);
        if (found) {
            Term t = term_from_tagged(*found);
            uint8_t kind = t.kind() == TermKind::Iri ? kStringIri : kStringLiteral;
            send(dev, up, encode_string_response(req.query_id, req.hash, kind, t.lexical()));
            return;
        }
        const auto& kids = topo_.children_of(dev);
        if (kids.empty()) {
            send(dev, up, encode_string_response(req.query_id, req.hash, kStringAbsent, ""));
            return;
        }
        d.pending_string[req.hash] = int(kids.size());
        Bytes fwd = encode_string_request(req.query_id, req.hash);
        for (uint32_t child : kids) send(dev, child, fwd);
    }

    void handle_string_response(uint32_t dev, Device& d, const StringResponseMsg& resp,
                                const Bytes& bytes) {
        auto it = d.pending_string.find(resp.hash);
        if (it == d.pending_string.end()) {
            diagnostics_.push_back("device " + std::to_string(dev) + ": late string response dropped");
            return;
        }
        uint32_t up = topo_.parent.at(dev);
        if (resp.kind != kStringAbsent) {
            d.pending_string.erase(it);  // first response wins
            send(dev, up, bytes);
            return;
        }
        if (--it->second == 0) {
            d.pending_string.erase(it);
            send(dev, up, encode_string_response(resp.query_id, resp.hash, kStringAbsent, ""));
        }
    }

    void base_receive(uint32_t from, const Bytes& bytes) {
        DecodedMessage msg = decode_message(bytes);
        if (auto* r = std::get_if<RowMessage>(&msg)) {
            auto it = base_queries_.find(r->query_id);
            if (it == base_queries_.end()) {
                diagnostics_.push_back("base: row for unknown query dropped");
                return;
            }
            BaseQueryState& bq = it->second;
            if (now_ > bq.expiry_ms) {
                diagnostics_.push_back("base: row for expired query " + std::to_string(r->query_id) +
                                       " dropped");
                return;
            }
            if (r->aggregate) {
                bq.agg_child_states[from] = agg_state_from_words(bq.agg_spec, r->words);
                return;
            }
            if (r->end_marker) {
                ++bq.end_markers[r->op_id];
            } else {
                if (!bq.first_result_ms) bq.first_result_ms = now_;
                bq.rows.push_back({now_, *r});
            }
        } else if (auto* resp = std::get_if<StringResponseMsg>(&msg)) {
            auto recorded = base_string_results_.find(resp->hash);
            if (recorded != base_string_results_.end() && recorded->second.kind != kStringAbsent) {
                if (resp->kind != kStringAbsent && resp->text != recorded->second.text)
                    diagnostics_.push_back("base: hash collision, keeping first string for hash " +
                                           std::to_string(resp->hash));
                return;
            }
            auto pending = base_pending_string_.find(resp->hash);
            if (resp->kind != kStringAbsent) {
                base_string_results_[resp->hash] = *resp;
                base_pending_string_.erase(resp->hash);
                return;
            }
            if (pending != base_pending_string_.end() && --pending->second == 0) {
                base_string_results_[resp->hash] = *resp;  // definitive absence
                base_pending_string_.erase(pending);
            }
        } else {
            diagnostics_.push_back("base: unexpected message type");
        }
    }

    Topology topo_;
    Options opt_;
    std::mt19937_64 rng_;
    std::map<uint32_t, Device> devices_;
    std::map<uint8_t, BaseQueryState> base_queries_;
    std::map<uint32_t, StringResponseMsg> base_string_results_;
    std::map<uint32_t, int> base_pending_string_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::vector<TraceEntry> trace_;
    std::vector<std::string> diagnostics_;
    uint64_t now_ = 0;
    uint64_t seq_ = 0;
};

} // namespace snes
