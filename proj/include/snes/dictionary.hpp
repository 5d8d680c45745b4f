#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "snes/error.hpp"

namespace snes {

/// Device-local compressing dictionary: a bijection between strings and
/// 16-bit keys. Keys are never transmitted; cross-device identity uses
/// 32-bit hashes instead.
class Dictionary {
public:
    using Key = uint16_t;
    static constexpr size_t kMaxEntries = 65535;  // key 0xFFFF is reserved as invalid
    static constexpr Key kInvalidKey = 0xFFFF;

    /// Returns the existing key when s is already present, else a fresh one.
    Key insert(std::string_view s) {
        if (s.empty()) throw Error(Errc::SyntaxError, "dictionary rejects empty strings");
        if (auto it = index_.find(s); it != index_.end()) return it->second;
        if (entries_.size() >= kMaxEntries)
            throw Error(Errc::CapacityExceeded, "dictionary holds 65,535 entries");
        entries_.emplace_back(s);
        Key key = Key(entries_.size() - 1);
        index_.emplace(entries_.back(), key);
        return key;
    }

    std::optional<Key> lookup_key(std::string_view s) const {
        auto it = index_.find(s);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& lookup_string(Key k) const {
        if (k >= entries_.size()) throw Error(Errc::SchemaMismatch, "unknown dictionary key");
        return entries_[k];
    }

    bool contains(Key k) const { return k < entries_.size(); }
    size_t size() const { return entries_.size(); }

    /// Iteration in key order; used by the hash-resolution fallback scan.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (size_t k = 0; k < entries_.size(); ++k) fn(Key(k), entries_[k]);
    }

private:
    std::deque<std::string> entries_;  // deque keeps string storage stable for the views below
    std::unordered_map<std::string_view, Key> index_;
};

} // namespace snes
