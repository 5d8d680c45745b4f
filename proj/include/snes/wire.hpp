#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "snes/operators.hpp"

namespace snes {

using Bytes = std::vector<uint8_t>;

enum class MsgType : uint8_t {
    Query = 1,
    ResultRow = 2,
    AggRow = 3,
    StringReq = 4,
    StringResp = 5,
};

inline constexpr size_t kDefaultMtu = 96;
inline constexpr size_t kQueryHeaderSize = 6;  // type, qid, lifetime(2), total_ops, offset
inline constexpr uint8_t kRowFlagEnd = 0x01;

// String response kind byte.
inline constexpr uint8_t kStringAbsent = 0;
inline constexpr uint8_t kStringIri = 1;
inline constexpr uint8_t kStringLiteral = 2;

namespace wiredetail {

inline void put_u16(Bytes& b, uint16_t v) {
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v));
}
inline void put_u32(Bytes& b, uint32_t v) {
    b.push_back(uint8_t(v >> 24));
    b.push_back(uint8_t(v >> 16));
    b.push_back(uint8_t(v >> 8));
    b.push_back(uint8_t(v));
}
inline void put_u64(Bytes& b, uint64_t v) {
    put_u32(b, uint32_t(v >> 32));
    put_u32(b, uint32_t(v));
}

struct Reader {
    std::span<const uint8_t> data;
    size_t pos = 0;

    size_t remaining() const { return data.size() - pos; }
    void need(size_t n) const {
        if (pos + n > data.size()) throw Error(Errc::Truncated, "message ends early");
    }
    uint8_t u8() {
        need(1);
        return data[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(data[pos]) << 8 | data[pos + 1];
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = uint32_t(data[pos]) << 24 | uint32_t(data[pos + 1]) << 16 |
                     uint32_t(data[pos + 2]) << 8 | uint32_t(data[pos + 3]);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        uint64_t hi = u32();
        return hi << 32 | u32();
    }
};

inline ValueType decode_type_code(uint8_t code) {
    if (code == 0 || code > 3) throw Error(Errc::BadArity, "bad value type code");
    return ValueType(code);
}

inline uint8_t encode_operand(const Operand& o) {
    if (o.is_const) return uint8_t(0x80u | (uint8_t(o.constant.type) << 4));
    if (o.column >= kMaxColumns) throw Error(Errc::BadArity, "operand column out of range");
    return o.column;
}

inline Operand decode_operand(uint8_t b, uint32_t const_bits) {
    if (b & 0x80u) {
        Operand o;
        o.is_const = true;
        o.constant = Const32{decode_type_code((b >> 4) & 0x3u), const_bits};
        return o;
    }
    if (b >= kMaxColumns) throw Error(Errc::BadArity, "operand column out of range");
    return Operand::col(b);
}

} // namespace wiredetail

// ---------------------------------------------------------------------------
// Operator descriptors
//
// op_id(1) op_type(1) parent_id(1, 0xFF = none) projection(4, big-endian)
// param_len(1) params(param_len)
//
//   GPS:       flags(1: bit0/1/2 = s/p/o constant present, bits 4-5 = object
//              constant type code) + 4 bytes per present constant, s,p,o order
//   Selection: count(1) + per comparison: lhs(1) cmp(1) rhs(1) constant(4);
//              operand byte: bit7 = constant, bits 4-5 its type code, else
//              bits 0-3 column index; at most one side may be a constant
//   SLJ:       left_attr(1) right_attr(1)
//   Collect:   empty
//   Aggregate: count(1) + per column: fn(1: bits 0-2 function, bits 3-4 input
//              type code) input_column(1)

inline Bytes encode_params(const OpParams& params) {
    using namespace wiredetail;
    Bytes p;
    if (auto* gps = std::get_if<GpsParams>(&params)) {
        uint8_t flags = 0;
        if (gps->subject) flags |= 0x01;
        if (gps->predicate) flags |= 0x02;
        if (gps->object) {
            flags |= 0x04;
            flags |= uint8_t(gps->object->type) << 4;
        }
        p.push_back(flags);
        if (gps->subject) put_u32(p, gps->subject->bits);
        if (gps->predicate) put_u32(p, gps->predicate->bits);
        if (gps->object) put_u32(p, gps->object->bits);
    } else if (auto* sel = std::get_if<SelectionParams>(&params)) {
        if (sel->comparisons.size() > 255) throw Error(Errc::ParamsTooLong, "too many comparisons");
        p.push_back(uint8_t(sel->comparisons.size()));
        for (const Comparison& c : sel->comparisons) {
            if (c.lhs.is_const && c.rhs.is_const)
                throw Error(Errc::UnsupportedConstruct, "constant-constant comparison");
            p.push_back(encode_operand(c.lhs));
            p.push_back(uint8_t(c.op));
            p.push_back(encode_operand(c.rhs));
            uint32_t bits = c.lhs.is_const ? c.lhs.constant.bits : c.rhs.is_const ? c.rhs.constant.bits : 0;
            put_u32(p, bits);
        }
    } else if (auto* slj = std::get_if<SljParams>(&params)) {
        p.push_back(slj->left_attr);
        p.push_back(slj->right_attr);
    } else if (auto* agg = std::get_if<AggregateParams>(&params)) {
        if (agg->columns.size() > 255) throw Error(Errc::ParamsTooLong, "too many aggregate columns");
        p.push_back(uint8_t(agg->columns.size()));
        for (const AggColumn& c : agg->columns) {
            p.push_back(uint8_t(uint8_t(c.fn) | (uint8_t(c.input_type) << 3)));
            p.push_back(c.input_column);
        }
    }
    // CollectParams: empty
    if (p.size() > 255) throw Error(Errc::ParamsTooLong, "parameters exceed 255 bytes");
    return p;
}

inline Bytes encode_descriptor(const OperatorDescriptor& d) {
    using namespace wiredetail;
    Bytes out;
    out.push_back(d.op_id);
    out.push_back(uint8_t(d.type));
    out.push_back(d.parent_id);
    put_u32(out, d.projection.bits());
    Bytes p = encode_params(d.params);
    out.push_back(uint8_t(p.size()));
    out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline size_t encoded_descriptor_size(const OperatorDescriptor& d) {
    return 8 + encode_params(d.params).size();
}

inline OperatorDescriptor decode_descriptor(wiredetail::Reader& r) {
    using namespace wiredetail;
    OperatorDescriptor d;
    d.op_id = r.u8();
    uint8_t type = r.u8();
    if (type < 1 || type > 5) throw Error(Errc::UnknownType, "unknown operator type");
    d.type = OpType(type);
    d.parent_id = r.u8();
    d.projection = ProjectionMask(r.u32());
    uint8_t param_len = r.u8();
    r.need(param_len);
    size_t param_end = r.pos + param_len;
    switch (d.type) {
        case OpType::Gps: {
            GpsParams g;
            uint8_t flags = r.u8();
            if (flags & 0x01) g.subject = Const32::of_hash(r.u32());
            if (flags & 0x02) g.predicate = Const32::of_hash(r.u32());
            if (flags & 0x04) g.object = Const32{decode_type_code((flags >> 4) & 0x3u), r.u32()};
            d.params = g;
            break;
        }
        case OpType::Selection: {
            SelectionParams s;
            uint8_t count = r.u8();
            for (size_t i = 0; i < count; ++i) {
                uint8_t lhs = r.u8();
                uint8_t op = r.u8();
                if (op > uint8_t(CmpOp::Gt)) throw Error(Errc::BadArity, "bad comparison code");
                uint8_t rhs = r.u8();
                if ((lhs & 0x80u) && (rhs & 0x80u))
                    throw Error(Errc::BadArity, "constant-constant comparison");
                uint32_t bits = r.u32();
                Comparison c;
                c.lhs = decode_operand(lhs, bits);
                c.op = CmpOp(op);
                c.rhs = decode_operand(rhs, bits);
                s.comparisons.push_back(c);
            }
            d.params = s;
            break;
        }
        case OpType::Slj: {
            SljParams s;
            s.left_attr = r.u8();
            s.right_attr = r.u8();
            d.params = s;
            break;
        }
        case OpType::Collect:
            d.params = CollectParams{};
            break;
        case OpType::Aggregate: {
            AggregateParams a;
            uint8_t count = r.u8();
            for (size_t i = 0; i < count; ++i) {
                uint8_t fn = r.u8();
                if ((fn & 0x07u) > uint8_t(AggFn::Max)) throw Error(Errc::BadArity, "bad aggregate code");
                AggColumn c;
                c.fn = AggFn(fn & 0x07u);
                c.input_type = wiredetail::decode_type_code((fn >> 3) & 0x3u);
                c.input_column = r.u8();
                a.columns.push_back(c);
            }
            d.params = a;
            break;
        }
    }
    if (r.pos != param_end) throw Error(Errc::BadArity, "descriptor parameter length mismatch");
    return d;
}

inline OperatorDescriptor decode_descriptor(std::span<const uint8_t> bytes) {
    wiredetail::Reader r{bytes};
    OperatorDescriptor d = decode_descriptor(r);
    if (r.pos != bytes.size()) throw Error(Errc::BadArity, "trailing bytes after descriptor");
    return d;
}

// ---------------------------------------------------------------------------
// Messages

struct QueryMessage {
    uint8_t query_id = 0;
    uint16_t lifetime_s = 0;
    uint8_t total_ops = 0;
    uint8_t op_index_offset = 0;
    std::vector<OperatorDescriptor> descriptors;

    friend bool operator==(const QueryMessage&, const QueryMessage&) = default;
};

struct RowMessage {
    bool aggregate = false;  // AggRow vs ResultRow
    uint8_t query_id = 0;
    uint8_t op_id = 0;
    bool end_marker = false;
    std::vector<uint32_t> words;

    friend bool operator==(const RowMessage&, const RowMessage&) = default;
};

struct StringRequestMsg {
    uint8_t query_id = 0;
    uint32_t hash = 0;

    friend bool operator==(const StringRequestMsg&, const StringRequestMsg&) = default;
};

struct StringResponseMsg {
    uint8_t query_id = 0;
    uint32_t hash = 0;
    uint8_t kind = kStringAbsent;
    std::string text;

    friend bool operator==(const StringResponseMsg&, const StringResponseMsg&) = default;
};

using DecodedMessage = std::variant<QueryMessage, RowMessage, StringRequestMsg, StringResponseMsg>;

/// Splits a query into MTU-sized messages at operator boundaries; each
/// message is independently decodable.
inline std::vector<Bytes> encode_query(const DeviceQuery& q, size_t mtu = kDefaultMtu) {
    using namespace wiredetail;
    if (q.ops.size() > 255)
        throw Error(Errc::TooManyOperators, "one-byte operator ids address at most 255 operators");
    std::vector<Bytes> encoded;
    encoded.reserve(q.ops.size());
    for (const auto& d : q.ops) {
        Bytes b = encode_descriptor(d);
        if (kQueryHeaderSize + b.size() > mtu)
            throw Error(Errc::OperatorExceedsMtu, "operator does not fit a single message");
        encoded.push_back(std::move(b));
    }
    std::vector<Bytes> messages;
    size_t i = 0;
    while (i < encoded.size()) {
        Bytes msg;
        msg.push_back(uint8_t(MsgType::Query));
        msg.push_back(q.query_id);
        put_u16(msg, q.lifetime_s);
        msg.push_back(uint8_t(q.ops.size()));
        msg.push_back(uint8_t(i));
        while (i < encoded.size() && msg.size() + encoded[i].size() <= mtu) {
            msg.insert(msg.end(), encoded[i].begin(), encoded[i].end());
            ++i;
        }
        messages.push_back(std::move(msg));
    }
    return messages;
}

inline Bytes encode_result_row(uint8_t query_id, uint8_t op_id, const Row& row) {
    using namespace wiredetail;
    Bytes b;
    b.push_back(uint8_t(MsgType::ResultRow));
    b.push_back(query_id);
    b.push_back(op_id);
    b.push_back(row.end_marker ? kRowFlagEnd : 0);
    if (!row.end_marker)
        for (size_t i = 0; i < row.arity; ++i) put_u32(b, row.vals[i].bits);
    return b;
}

/// Word counts of the serialized aggregation state, per column: COUNT and
/// SUM take 2 words (64-bit accumulator), AVG 4 (sum + count), MIN/MAX 1.
inline size_t agg_state_word_count(const std::vector<AggColumn>& spec) {
    size_t n = 0;
    for (const AggColumn& c : spec) {
        switch (c.fn) {
            case AggFn::Count:
            case AggFn::Sum: n += 2; break;
            case AggFn::Avg: n += 4; break;
            case AggFn::Min:
            case AggFn::Max: n += 1; break;
        }
    }
    return n;
}

inline std::vector<uint32_t> agg_state_to_words(const AggregateState& state) {
    std::vector<uint32_t> w;
    const auto& spec = state.spec();
    const auto& cols = state.columns();
    auto push64 = [&](uint64_t v) {
        w.push_back(uint32_t(v >> 32));
        w.push_back(uint32_t(v));
    };
    for (size_t i = 0; i < spec.size(); ++i) {
        uint64_t sum_bits = spec[i].input_type == ValueType::Int
                                ? std::bit_cast<uint64_t>(cols[i].isum)
                                : std::bit_cast<uint64_t>(cols[i].fsum);
        switch (spec[i].fn) {
            case AggFn::Count: push64(cols[i].count); break;
            case AggFn::Sum:   push64(sum_bits); break;
            case AggFn::Avg:
                push64(sum_bits);
                push64(cols[i].count);
                break;
            case AggFn::Min: w.push_back(cols[i].min_bits); break;
            case AggFn::Max: w.push_back(cols[i].max_bits); break;
        }
    }
    return w;
}

inline AggregateState agg_state_from_words(const std::vector<AggColumn>& spec,
                                           const std::vector<uint32_t>& words) {
    if (words.size() != agg_state_word_count(spec))
        throw Error(Errc::BadArity, "aggregate state word count mismatch");
    AggregateState state(spec);
    size_t i = 0;
    auto take64 = [&]() {
        uint64_t v = uint64_t(words[i]) << 32 | words[i + 1];
        i += 2;
        return v;
    };
    for (size_t c = 0; c < spec.size(); ++c) {
        AggColumnState& st = state.columns()[c];
        auto set_sum = [&](uint64_t bits) {
            if (spec[c].input_type == ValueType::Int)
                st.isum = std::bit_cast<int64_t>(bits);
            else
                st.fsum = std::bit_cast<double>(bits);
        };
        switch (spec[c].fn) {
            case AggFn::Count: st.count = take64(); break;
            case AggFn::Sum:
                set_sum(take64());
                st.count = 1;  // a transmitted state always stems from >= 1 update
                break;
            case AggFn::Avg:
                set_sum(take64());
                st.count = take64();
                break;
            case AggFn::Min:
                st.min_bits = st.max_bits = words[i++];
                st.count = 1;
                break;
            case AggFn::Max:
                st.max_bits = st.min_bits = words[i++];
                st.count = 1;
                break;
        }
    }
    return state;
}

inline Bytes encode_agg_row(uint8_t query_id, uint8_t op_id, const AggregateState& state) {
    using namespace wiredetail;
    Bytes b;
    b.push_back(uint8_t(MsgType::AggRow));
    b.push_back(query_id);
    b.push_back(op_id);
    b.push_back(0);
    for (uint32_t w : agg_state_to_words(state)) put_u32(b, w);
    return b;
}

inline Bytes encode_string_request(uint8_t query_id, uint32_t hash) {
    using namespace wiredetail;
    Bytes b;
    b.push_back(uint8_t(MsgType::StringReq));
    b.push_back(query_id);
    put_u32(b, hash);
    return b;
}

inline Bytes encode_string_response(uint8_t query_id, uint32_t hash, uint8_t kind,
                                    std::string_view text) {
    using namespace wiredetail;
    Bytes b;
    b.push_back(uint8_t(MsgType::StringResp));
    b.push_back(query_id);
    put_u32(b, hash);
    b.push_back(kind);
    b.insert(b.end(), text.begin(), text.end());
    return b;
}

/// Exact inverse of the encoders; rejects unknown types and malformed
/// payloads. Every message decodes on its own, without query context.
inline DecodedMessage decode_message(std::span<const uint8_t> bytes) {
    using namespace wiredetail;
    Reader r{bytes};
    uint8_t type = r.u8();
    if (type < 1 || type > 5) throw Error(Errc::UnknownType, "unknown message type");
    uint8_t qid = r.u8();
    switch (MsgType(type)) {
        case MsgType::Query: {
            QueryMessage m;
            m.query_id = qid;
            m.lifetime_s = r.u16();
            m.total_ops = r.u8();
            m.op_index_offset = r.u8();
            while (r.remaining() > 0) m.descriptors.push_back(decode_descriptor(r));
            if (m.descriptors.empty()) throw Error(Errc::Truncated, "query message without descriptors");
            if (size_t(m.op_index_offset) + m.descriptors.size() > m.total_ops)
                throw Error(Errc::BadArity, "descriptor range exceeds total_ops");
            return m;
        }
        case MsgType::ResultRow:
        case MsgType::AggRow: {
            RowMessage m;
            m.aggregate = MsgType(type) == MsgType::AggRow;
            m.query_id = qid;
            m.op_id = r.u8();
            uint8_t flags = r.u8();
            if (flags & ~kRowFlagEnd) throw Error(Errc::BadArity, "unknown row flags");
            m.end_marker = flags & kRowFlagEnd;
            if (r.remaining() % 4 != 0) throw Error(Errc::BadArity, "row payload not word-aligned");
            if (m.end_marker && r.remaining() != 0)
                throw Error(Errc::BadArity, "end marker carries value bytes");
            if (!m.aggregate && r.remaining() / 4 > kMaxColumns)
                throw Error(Errc::BadArity, "row wider than 16 columns");
            while (r.remaining() > 0) m.words.push_back(r.u32());
            return m;
        }
        case MsgType::StringReq: {
            StringRequestMsg m;
            m.query_id = qid;
            m.hash = r.u32();
            if (r.remaining() != 0) throw Error(Errc::BadArity, "trailing bytes in string request");
            return m;
        }
        case MsgType::StringResp: {
            StringResponseMsg m;
            m.query_id = qid;
            m.hash = r.u32();
            m.kind = r.u8();
            if (m.kind > kStringLiteral) throw Error(Errc::BadArity, "bad string kind");
            m.text.assign(bytes.begin() + r.pos, bytes.end());
            if (m.kind == kStringAbsent && !m.text.empty())
                throw Error(Errc::BadArity, "absent response carries text");
            return m;
        }
    }
    throw Error(Errc::UnknownType, "unknown message type");
}

/// Re-types raw wire words with the producing operator's output schema.
inline Row row_from_wire(const RowMessage& m, const std::vector<ValueType>& types) {
    if (m.end_marker) return Row::end();
    if (m.words.size() != types.size())
        throw Error(Errc::BadArity, "row arity does not match the operator's projection mask");
    Row r;
    for (size_t i = 0; i < types.size(); ++i) r.push(RowValue{types[i], m.words[i]});
    return r;
}

} // namespace snes
