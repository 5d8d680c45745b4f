#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "snes/error.hpp"

namespace snes {

inline constexpr size_t kMaxColumns = 16;  // no intermediate result row is longer than 16 columns

/// 2-bit per-slot codes of the projection bitmask. Drop removes the slot;
/// the other codes keep it and declare its type.
enum class ValueType : uint8_t { Drop = 0, Int = 1, Float = 2, StringHash = 3 };

struct RowValue {
    ValueType type = ValueType::Int;
    uint32_t bits = 0;

    static RowValue of_int(int32_t v) { return {ValueType::Int, std::bit_cast<uint32_t>(v)}; }
    static RowValue of_float(float v) { return {ValueType::Float, std::bit_cast<uint32_t>(v)}; }
    static RowValue of_hash(uint32_t h) { return {ValueType::StringHash, h}; }

    int32_t as_int() const { return std::bit_cast<int32_t>(bits); }
    float as_float() const { return std::bit_cast<float>(bits); }
    double as_number() const {
        if (type == ValueType::Int) return double(as_int());
        if (type == ValueType::Float) return double(as_float());
        throw Error(Errc::TypeMismatch, "slot is not numeric");
    }

    friend bool operator==(const RowValue& a, const RowValue& b) {
        return a.type == b.type && a.bits == b.bits;
    }
};

/// A fixed-width intermediate result tuple of at most 16 typed 32-bit slots.
/// An end marker (the NULL tuple) has arity 0 and terminates a stream.
struct Row {
    std::array<RowValue, kMaxColumns> vals{};
    uint8_t arity = 0;
    bool end_marker = false;

    static Row end() {
        Row r;
        r.end_marker = true;
        return r;
    }

    void push(RowValue v) {
        if (arity >= kMaxColumns) throw Error(Errc::RowTooWide, "row exceeds 16 columns");
        vals[arity++] = v;
    }

    const RowValue& at(size_t i) const {
        if (i >= arity) throw Error(Errc::SchemaMismatch, "column index out of range");
        return vals[i];
    }

    friend bool operator==(const Row& a, const Row& b) {
        if (a.arity != b.arity || a.end_marker != b.end_marker) return false;
        for (size_t i = 0; i < a.arity; ++i)
            if (!(a.vals[i] == b.vals[i])) return false;
        return true;
    }
};

/// The mandatory 4-byte projection bitmask: 16 x 2-bit slot codes. Besides
/// selecting the surviving slots it carries the type of every kept column.
class ProjectionMask {
public:
    ProjectionMask() = default;
    explicit ProjectionMask(uint32_t bits) : bits_(bits) {}

    uint32_t bits() const { return bits_; }

    ValueType code(size_t slot) const { return ValueType((bits_ >> (2 * slot)) & 0x3u); }

    void set(size_t slot, ValueType t) {
        if (slot >= kMaxColumns) throw Error(Errc::RowTooWide, "mask slot out of range");
        bits_ = (bits_ & ~(0x3u << (2 * slot))) | (uint32_t(t) << (2 * slot));
    }

    uint8_t output_arity() const {
        uint8_t n = 0;
        for (size_t i = 0; i < kMaxColumns; ++i)
            if (code(i) != ValueType::Drop) ++n;
        return n;
    }

    /// Types of the kept slots, in slot order; this is the output schema.
    std::vector<ValueType> output_types() const {
        std::vector<ValueType> out;
        for (size_t i = 0; i < kMaxColumns; ++i)
            if (code(i) != ValueType::Drop) out.push_back(code(i));
        return out;
    }

    /// Projects an input row: kept slots survive in order, stamped with the
    /// mask's declared type.
    Row apply(const Row& in) const {
        Row out;
        out.end_marker = in.end_marker;
        if (in.end_marker) return out;
        for (size_t i = 0; i < in.arity; ++i) {
            ValueType c = code(i);
            if (c == ValueType::Drop) continue;
            out.push(RowValue{c, in.vals[i].bits});
        }
        return out;
    }

    static ProjectionMask keep_all(const std::vector<ValueType>& types) {
        ProjectionMask m;
        for (size_t i = 0; i < types.size(); ++i) m.set(i, types[i]);
        return m;
    }

    friend bool operator==(const ProjectionMask& a, const ProjectionMask& b) { return a.bits_ == b.bits_; }

private:
    uint32_t bits_ = 0;
};

} // namespace snes
