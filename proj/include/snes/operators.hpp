#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "snes/hash.hpp"
#include "snes/row.hpp"
#include "snes/tuple_store.hpp"

namespace snes {

enum class OpType : uint8_t { Gps = 1, Selection = 2, Slj = 3, Collect = 4, Aggregate = 5 };

inline constexpr uint8_t kNoParent = 0xFF;
inline constexpr size_t kDefaultJoinBufferLimit = 1024;

/// A typed 32-bit constant as it appears in operator parameters.
struct Const32 {
    ValueType type = ValueType::StringHash;
    uint32_t bits = 0;

    static Const32 of_hash(uint32_t h) { return {ValueType::StringHash, h}; }
    static Const32 of_int(int32_t v) { return {ValueType::Int, std::bit_cast<uint32_t>(v)}; }
    static Const32 of_float(float v) { return {ValueType::Float, std::bit_cast<uint32_t>(v)}; }

    friend bool operator==(const Const32& a, const Const32& b) { return a.type == b.type && a.bits == b.bits; }
};

/// Graph Pattern Selection: equality of stored triples against constants.
/// Subject/predicate constants are always string hashes.
struct GpsParams {
    std::optional<Const32> subject, predicate, object;

    friend bool operator==(const GpsParams&, const GpsParams&) = default;
};

struct Operand {
    bool is_const = false;
    uint8_t column = 0;   // when !is_const
    Const32 constant{};   // when is_const

    static Operand col(uint8_t c) { return {false, c, {}}; }
    static Operand con(Const32 c) { return {true, 0, c}; }

    friend bool operator==(const Operand&, const Operand&) = default;
};

struct Comparison {
    Operand lhs;
    CmpOp op = CmpOp::Eq;
    Operand rhs;

    friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct SelectionParams {
    std::vector<Comparison> comparisons;  // conjunction

    friend bool operator==(const SelectionParams&, const SelectionParams&) = default;
};

struct SljParams {
    uint8_t left_attr = 0;
    uint8_t right_attr = 0;

    friend bool operator==(const SljParams&, const SljParams&) = default;
};

struct CollectParams {
    friend bool operator==(const CollectParams&, const CollectParams&) = default;
};

enum class AggFn : uint8_t { Sum = 0, Count = 1, Avg = 2, Min = 3, Max = 4 };

inline const char* agg_fn_name(AggFn f) {
    switch (f) {
        case AggFn::Sum:   return "SUM";
        case AggFn::Count: return "COUNT";
        case AggFn::Avg:   return "AVG";
        case AggFn::Min:   return "MIN";
        case AggFn::Max:   return "MAX";
    }
    return "?";
}

struct AggColumn {
    AggFn fn = AggFn::Count;
    ValueType input_type = ValueType::Int;  // StringHash is valid for COUNT only
    uint8_t input_column = 0;               // ignored by COUNT

    friend bool operator==(const AggColumn&, const AggColumn&) = default;
};

struct AggregateParams {
    std::vector<AggColumn> columns;

    friend bool operator==(const AggregateParams&, const AggregateParams&) = default;
};

using OpParams = std::variant<GpsParams, SelectionParams, SljParams, CollectParams, AggregateParams>;

/// One operator of an in-network query: id, type, parent link, the
/// mandatory 4-byte projection bitmask and type-specific parameters.
struct OperatorDescriptor {
    uint8_t op_id = 0;
    OpType type = OpType::Collect;
    uint8_t parent_id = kNoParent;
    ProjectionMask projection;
    OpParams params;

    friend bool operator==(const OperatorDescriptor&, const OperatorDescriptor&) = default;
};

/// The binary-encodable in-network query.
struct DeviceQuery {
    uint8_t query_id = 0;
    uint16_t lifetime_s = 60;
    std::vector<OperatorDescriptor> ops;

    friend bool operator==(const DeviceQuery&, const DeviceQuery&) = default;
};

// ---------------------------------------------------------------------------
// Aggregation state

struct AggColumnState {
    int64_t isum = 0;
    double fsum = 0.0;
    uint64_t count = 0;
    uint32_t min_bits = 0;
    uint32_t max_bits = 0;

    friend bool operator==(const AggColumnState&, const AggColumnState&) = default;
};

/// Per-device aggregation state for one Aggregate operator. AVG is kept as
/// (sum, count) and divided only at emission; merging is associative and
/// commutative for all five functions.
class AggregateState {
public:
    AggregateState() = default;
    explicit AggregateState(std::vector<AggColumn> spec)
        : spec_(std::move(spec)), cols_(spec_.size()) {}

    const std::vector<AggColumn>& spec() const { return spec_; }
    const std::vector<AggColumnState>& columns() const { return cols_; }
    std::vector<AggColumnState>& columns() { return cols_; }
    uint64_t update_count() const { return cols_.empty() ? 0 : cols_[0].count; }

    void update(const Row& row) {
        for (size_t i = 0; i < spec_.size(); ++i) {
            const AggColumn& c = spec_[i];
            AggColumnState& st = cols_[i];
            if (c.fn == AggFn::Count) {
                ++st.count;
                continue;
            }
            const RowValue& v = row.at(c.input_column);
            if (c.input_type == ValueType::StringHash)
                throw Error(Errc::TypeMismatch, "numeric aggregate over a string hash column");
            if (c.input_type == ValueType::Int)
                st.isum += v.as_int();
            else
                st.fsum += double(v.as_float());
            if (st.count == 0) {
                st.min_bits = st.max_bits = v.bits;
            } else {
                if (value_less(c.input_type, v.bits, st.min_bits)) st.min_bits = v.bits;
                if (value_less(c.input_type, st.max_bits, v.bits)) st.max_bits = v.bits;
            }
            ++st.count;
        }
        dirty_ = true;
    }

    void merge(const AggregateState& other) {
        if (spec_ != other.spec_) throw Error(Errc::SpecMismatch, "aggregate column specs differ");
        for (size_t i = 0; i < cols_.size(); ++i) {
            AggColumnState& a = cols_[i];
            const AggColumnState& b = other.cols_[i];
            if (b.count == 0) continue;
            a.isum += b.isum;
            a.fsum += b.fsum;
            if (a.count == 0) {
                a.min_bits = b.min_bits;
                a.max_bits = b.max_bits;
            } else {
                if (value_less(spec_[i].input_type, b.min_bits, a.min_bits)) a.min_bits = b.min_bits;
                if (value_less(spec_[i].input_type, a.max_bits, b.max_bits)) a.max_bits = b.max_bits;
            }
            a.count += b.count;
        }
        dirty_ = true;
    }

    /// Final per-column emission. COUNT and SUM over zero rows emit 0; the
    /// other functions are unbound (nullopt) on an empty state.
    std::vector<std::optional<RowValue>> emit() const {
        std::vector<std::optional<RowValue>> out;
        out.reserve(spec_.size());
        for (size_t i = 0; i < spec_.size(); ++i) {
            const AggColumn& c = spec_[i];
            const AggColumnState& st = cols_[i];
            switch (c.fn) {
                case AggFn::Count:
                    out.push_back(RowValue::of_int(int32_t(st.count)));
                    break;
                case AggFn::Sum:
                    out.push_back(c.input_type == ValueType::Int ? RowValue::of_int(int32_t(st.isum))
                                                                 : RowValue::of_float(float(st.fsum)));
                    break;
                case AggFn::Avg:
                    if (st.count == 0) { out.push_back(std::nullopt); break; }
                    out.push_back(RowValue::of_float(float(
                        (c.input_type == ValueType::Int ? double(st.isum) : st.fsum) / double(st.count))));
                    break;
                case AggFn::Min:
                    out.push_back(st.count == 0 ? std::optional<RowValue>{}
                                                : RowValue{c.input_type, st.min_bits});
                    break;
                case AggFn::Max:
                    out.push_back(st.count == 0 ? std::optional<RowValue>{}
                                                : RowValue{c.input_type, st.max_bits});
                    break;
            }
        }
        return out;
    }

    bool dirty() const { return dirty_; }
    void clear_dirty() { dirty_ = false; }
    void mark_dirty() { dirty_ = true; }

    friend bool operator==(const AggregateState& a, const AggregateState& b) {
        return a.spec_ == b.spec_ && a.cols_ == b.cols_;
    }

private:
    static bool value_less(ValueType t, uint32_t a, uint32_t b) {
        if (t == ValueType::Int) return std::bit_cast<int32_t>(a) < std::bit_cast<int32_t>(b);
        return std::bit_cast<float>(a) < std::bit_cast<float>(b);
    }

    std::vector<AggColumn> spec_;
    std::vector<AggColumnState> cols_;
    bool dirty_ = false;
};

// ---------------------------------------------------------------------------
// Operator execution

/// Memoized key -> 32-bit-hash translation over one device dictionary.
class KeyHashMemo {
public:
    explicit KeyHashMemo(const Dictionary& dict) : dict_(&dict) {}

    uint32_t hash_of(Dictionary::Key k) {
        if (k >= cache_.size()) cache_.resize(k + 1, kUnset);
        if (cache_[k] == kUnset) {
            uint32_t h = hash_bytes(kDefaultHash, dict_->lookup_string(k));
            cache_[k] = (uint64_t(1) << 32) | h;
        }
        return uint32_t(cache_[k]);
    }

private:
    static constexpr uint64_t kUnset = 0;
    const Dictionary* dict_;
    std::vector<uint64_t> cache_;
};

namespace detail {

inline RowValue slot_to_row_value(const Slot& s, KeyHashMemo& memo) {
    switch (s.tag) {
        case SlotTag::IriKey:
        case SlotTag::StrKey: return RowValue::of_hash(memo.hash_of(Dictionary::Key(s.value)));
        case SlotTag::Int:    return RowValue{ValueType::Int, s.value};
        case SlotTag::Float:  return RowValue{ValueType::Float, s.value};
    }
    throw Error(Errc::SchemaMismatch, "bad slot tag");
}

inline bool slot_matches(const Slot& s, const Const32& c, KeyHashMemo& memo) {
    switch (c.type) {
        case ValueType::StringHash:
            return (s.tag == SlotTag::IriKey || s.tag == SlotTag::StrKey) &&
                   memo.hash_of(Dictionary::Key(s.value)) == c.bits;
        case ValueType::Int:   return s.tag == SlotTag::Int && s.value == c.bits;
        case ValueType::Float: return s.tag == SlotTag::Float && s.value == c.bits;
        default: throw Error(Errc::TypeMismatch, "bad constant type");
    }
}

} // namespace detail

/// Leaf operator: emits one projected row per stored triple whose
/// constrained slots match, then an end marker.
template <typename Sink>
void gps_execute(const TupleStore& ts, KeyHashMemo& memo, const GpsParams& pattern,
                 const ProjectionMask& projection, Sink&& sink) {
    ts.scan(ScanMask{}, [&](const KeyTriple& kt) {
        if (pattern.subject && !detail::slot_matches(kt.subject, *pattern.subject, memo)) return;
        if (pattern.predicate && !detail::slot_matches(kt.predicate, *pattern.predicate, memo)) return;
        if (pattern.object && !detail::slot_matches(kt.object, *pattern.object, memo)) return;
        Row raw;
        raw.push(detail::slot_to_row_value(kt.subject, memo));
        raw.push(detail::slot_to_row_value(kt.predicate, memo));
        raw.push(detail::slot_to_row_value(kt.object, memo));
        sink(projection.apply(raw));
    });
    sink(Row::end());
}

namespace detail {

inline RowValue operand_value(const Operand& o, const Row& row) {
    return o.is_const ? RowValue{o.constant.type, o.constant.bits} : row.at(o.column);
}

inline bool row_compare(const RowValue& a, CmpOp op, const RowValue& b) {
    bool a_num = a.type != ValueType::StringHash;
    bool b_num = b.type != ValueType::StringHash;
    if (a_num && b_num) {
        double x = a.as_number(), y = b.as_number();
        return cmp_holds(x < y ? -1 : x > y ? 1 : 0, op);
    }
    if (!a_num && !b_num) {
        if (op == CmpOp::Eq) return a.bits == b.bits;
        if (op == CmpOp::Ne) return a.bits != b.bits;
        throw Error(Errc::TypeMismatch, "ordering comparison on string hashes");
    }
    // Mixed hash/numeric: equality is decided on type alone.
    if (op == CmpOp::Eq) return false;
    if (op == CmpOp::Ne) return true;
    throw Error(Errc::TypeMismatch, "ordering comparison across hash and numeric");
}

} // namespace detail

/// Conjunction of comparisons; returns the projected row iff all hold.
inline std::optional<Row> selection_apply(const Row& row, const std::vector<Comparison>& comparisons,
                                          const ProjectionMask& projection) {
    for (const Comparison& c : comparisons) {
        RowValue l = detail::operand_value(c.lhs, row);
        RowValue r = detail::operand_value(c.rhs, row);
        if (!detail::row_compare(l, c.op, r)) return std::nullopt;
    }
    return projection.apply(row);
}

/// Symmetric hash-join buffers of one Simple Local Join instance.
struct SljState {
    std::vector<Row> left, right;
    bool left_done = false, right_done = false;
};

/// Buffers the arriving row on its side and joins it against the opposite
/// buffer; outputs are left++right concatenations, projected.
inline std::vector<Row> slj_push(SljState& state, bool from_left, const Row& row,
                                 const SljParams& params, const ProjectionMask& projection,
                                 size_t buffer_limit = kDefaultJoinBufferLimit) {
    std::vector<Row> out;
    auto& own = from_left ? state.left : state.right;
    auto& other = from_left ? state.right : state.left;
    if (own.size() >= buffer_limit)
        throw Error(Errc::BufferOverflow, "join buffer exceeds " + std::to_string(buffer_limit) + " rows");
    own.push_back(row);
    uint8_t own_attr = from_left ? params.left_attr : params.right_attr;
    uint8_t other_attr = from_left ? params.right_attr : params.left_attr;
    for (const Row& o : other) {
        const RowValue& a = row.at(own_attr);
        const RowValue& b = o.at(other_attr);
        if (!(a == b)) continue;
        const Row& l = from_left ? row : o;
        const Row& r = from_left ? o : row;
        if (size_t(l.arity) + size_t(r.arity) > kMaxColumns)
            throw Error(Errc::RowTooWide, "join concatenation exceeds 16 columns");
        Row joined;
        for (size_t i = 0; i < l.arity; ++i) joined.push(l.vals[i]);
        for (size_t i = 0; i < r.arity; ++i) joined.push(r.vals[i]);
        out.push_back(projection.apply(joined));
    }
    return out;
}

/// A row leaving the device, tagged with the operator that produced it.
struct TaggedRow {
    uint8_t producer_op_id = 0;
    Row row;
};

/// The device-local operator tree. Descriptors are validated at
/// construction; run() executes GPS operators in ascending id order and
/// push-activates everything else.
class OperatorTree {
public:
    using Sink = std::function<void(const TaggedRow&)>;

    explicit OperatorTree(std::vector<OperatorDescriptor> ops,
                          size_t join_buffer_limit = kDefaultJoinBufferLimit)
        : join_buffer_limit_(join_buffer_limit) {
        if (ops.empty()) throw Error(Errc::MalformedTree, "empty operator set");
        for (auto& d : ops) {
            if (nodes_.count(d.op_id)) throw Error(Errc::MalformedTree, "duplicate operator id");
            nodes_[d.op_id].desc = d;
        }
        for (auto& [id, n] : nodes_) {
            if (n.desc.parent_id == kNoParent) {
                if (root_ != kNoParent) throw Error(Errc::MalformedTree, "multiple roots");
                root_ = id;
                continue;
            }
            auto it = nodes_.find(n.desc.parent_id);
            if (it == nodes_.end()) throw Error(Errc::MalformedTree, "parent id does not exist");
            it->second.children.push_back(id);
        }
        if (root_ == kNoParent) throw Error(Errc::MalformedTree, "no root operator");
        for (auto& [id, n] : nodes_) std::sort(n.children.begin(), n.children.end());
        validate();
        if (nodes_[root_].desc.type == OpType::Aggregate)
            agg_state_ = AggregateState(std::get<AggregateParams>(nodes_[root_].desc.params).columns);
    }

    uint8_t root_id() const { return root_; }
    bool has_aggregate_root() const { return nodes_.at(root_).desc.type == OpType::Aggregate; }

    const OperatorDescriptor& descriptor(uint8_t id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw Error(Errc::SchemaMismatch, "unknown operator id");
        return it->second.desc;
    }
    bool has_operator(uint8_t id) const { return nodes_.count(id) != 0; }

    AggregateState& aggregate_state() {
        if (!has_aggregate_root()) throw Error(Errc::MalformedTree, "root is not an Aggregate");
        return agg_state_;
    }
    const AggregateState& aggregate_state() const {
        return const_cast<OperatorTree*>(this)->aggregate_state();
    }

    /// Executes the tree over the store. `out` receives rows forwarded by a
    /// Collect root (producer-tagged, end-marker-terminated per child
    /// stream); an Aggregate root retains state instead.
    void run(const TupleStore& store, const Sink& out) {
        KeyHashMemo memo(store.dictionary());
        gps_order_.clear();
        for (auto& [id, n] : nodes_) {
            if (n.desc.type != OpType::Gps) continue;  // map iteration is id-ascending
            gps_order_.push_back(id);
            gps_execute(store, memo, std::get<GpsParams>(n.desc.params), n.desc.projection,
                        [&](const Row& row) { push(n.desc.parent_id, id, row, out); });
        }
    }

    /// Rows pushed by the device application (e.g. fresh sensor-derived
    /// facts) after the initial run; they enter at the root.
    void push_external(const Row& row, const Sink& out) {
        Node& r = nodes_.at(root_);
        if (r.desc.type == OpType::Aggregate)
            agg_state_.update(row);
        else
            out(TaggedRow{root_, row});
    }

    const std::vector<uint8_t>& gps_execution_order() const { return gps_order_; }

private:
    struct Node {
        OperatorDescriptor desc;
        std::vector<uint8_t> children;
        SljState slj;
    };

    void validate() {
        // Cycle check: every parent chain must terminate at the root.
        for (auto& [id, n] : nodes_) {
            std::vector<bool> seen(256, false);
            uint8_t cur = id;
            while (cur != root_) {
                if (seen[cur]) throw Error(Errc::MalformedTree, "cycle in parent links");
                seen[cur] = true;
                cur = nodes_.at(cur).desc.parent_id;
                if (cur == kNoParent) throw Error(Errc::MalformedTree, "disconnected operator");
            }
        }
        for (auto& [id, n] : nodes_) {
            const OperatorDescriptor& d = n.desc;
            bool is_root = id == root_;
            switch (d.type) {
                case OpType::Gps:
                    if (!n.children.empty()) throw Error(Errc::MalformedTree, "GPS cannot have children");
                    if (is_root) throw Error(Errc::MalformedTree, "GPS cannot be the root");
                    check_mask_width(d, 3);
                    break;
                case OpType::Selection: {
                    if (is_root) throw Error(Errc::MalformedTree, "Selection cannot be the root");
                    if (n.children.size() != 1)
                        throw Error(Errc::MalformedTree, "Selection needs exactly one child");
                    size_t in = input_arity(n);
                    check_mask_width(d, in);
                    for (const Comparison& c : std::get<SelectionParams>(d.params).comparisons)
                        for (const Operand* o : {&c.lhs, &c.rhs})
                            if (!o->is_const && o->column >= in)
                                throw Error(Errc::MalformedTree, "comparison column out of range");
                    break;
                }
                case OpType::Slj: {
                    if (is_root) throw Error(Errc::MalformedTree, "SLJ cannot be the root");
                    if (n.children.size() != 2)
                        throw Error(Errc::MalformedTree, "SLJ needs exactly two children");
                    const auto& p = std::get<SljParams>(d.params);
                    size_t la = out_arity(n.children[0]), ra = out_arity(n.children[1]);
                    if (la + ra > kMaxColumns)
                        throw Error(Errc::RowTooWide, "SLJ concatenation exceeds 16 columns");
                    if (p.left_attr >= la || p.right_attr >= ra)
                        throw Error(Errc::MalformedTree, "join attribute out of range");
                    check_mask_width(d, la + ra);
                    break;
                }
                case OpType::Collect:
                    if (!is_root) throw Error(Errc::MalformedTree, "Collect must be the root");
                    if (n.children.empty()) throw Error(Errc::MalformedTree, "Collect needs a child");
                    break;
                case OpType::Aggregate: {
                    if (!is_root) throw Error(Errc::MalformedTree, "Aggregate must be the root");
                    if (n.children.size() != 1)
                        throw Error(Errc::MalformedTree, "Aggregate needs exactly one local child");
                    const auto& p = std::get<AggregateParams>(d.params);
                    if (p.columns.empty()) throw Error(Errc::MalformedTree, "Aggregate without columns");
                    size_t in = input_arity(n);
                    for (const AggColumn& c : p.columns) {
                        if (c.fn != AggFn::Count && c.input_column >= in)
                            throw Error(Errc::MalformedTree, "aggregate input column out of range");
                        if (c.fn != AggFn::Count && c.input_type == ValueType::StringHash)
                            throw Error(Errc::TypeMismatch, "numeric aggregate over string hashes");
                    }
                    break;
                }
            }
        }
    }

    size_t out_arity(uint8_t id) const { return nodes_.at(id).desc.projection.output_arity(); }

    size_t input_arity(const Node& n) const {
        size_t a = 0;
        for (uint8_t c : n.children) a += out_arity(c);
        return a;
    }

    void check_mask_width(const OperatorDescriptor& d, size_t input_arity) const {
        for (size_t i = input_arity; i < kMaxColumns; ++i)
            if (d.projection.code(i) != ValueType::Drop)
                throw Error(Errc::MalformedTree, "projection keeps a slot beyond the input arity");
    }

    void push(uint8_t target, uint8_t from, const Row& row, const Sink& out) {
        Node& n = nodes_.at(target);
        switch (n.desc.type) {
            case OpType::Collect:
                out(TaggedRow{from, row});
                return;
            case OpType::Aggregate:
                if (!row.end_marker) agg_state_.update(row);
                return;
            case OpType::Selection:
                if (row.end_marker) {
                    push(n.desc.parent_id, target, row, out);
                    return;
                }
                if (auto kept = selection_apply(row, std::get<SelectionParams>(n.desc.params).comparisons,
                                                n.desc.projection))
                    push(n.desc.parent_id, target, *kept, out);
                return;
            case OpType::Slj: {
                bool from_left = from == n.children[0];
                if (row.end_marker) {
                    (from_left ? n.slj.left_done : n.slj.right_done) = true;
                    if (n.slj.left_done && n.slj.right_done) {
                        n.slj.left.clear();
                        n.slj.left.shrink_to_fit();
                        n.slj.right.clear();
                        n.slj.right.shrink_to_fit();
                        push(n.desc.parent_id, target, Row::end(), out);
                    }
                    return;
                }
                for (const Row& j : slj_push(n.slj, from_left, row, std::get<SljParams>(n.desc.params),
                                             n.desc.projection, join_buffer_limit_))
                    push(n.desc.parent_id, target, j, out);
                return;
            }
            case OpType::Gps:
                throw Error(Errc::MalformedTree, "GPS cannot receive pushed rows");
        }
    }

    std::map<uint8_t, Node> nodes_;
    uint8_t root_ = kNoParent;
    AggregateState agg_state_;
    std::vector<uint8_t> gps_order_;
    size_t join_buffer_limit_;
};

} // namespace snes
