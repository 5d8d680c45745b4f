#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "snes/dictionary.hpp"
#include "snes/term.hpp"

namespace snes {

/// Per-slot storage tag. IRIs and string literals are stored as dictionary
/// keys; numerics are stored inline as their 32-bit representation.
enum class SlotTag : uint8_t { IriKey = 0, StrKey = 1, Int = 2, Float = 3 };

struct Slot {
    SlotTag tag = SlotTag::IriKey;
    uint32_t value = 0;  // dictionary key (zero-extended) or numeric bits

    friend bool operator==(const Slot& a, const Slot& b) { return a.tag == b.tag && a.value == b.value; }
};

struct KeyTriple {
    Slot subject, predicate, object;

    friend bool operator==(const KeyTriple& a, const KeyTriple& b) {
        return a.subject == b.subject && a.predicate == b.predicate && a.object == b.object;
    }
};

struct KeyTripleHash {
    size_t operator()(const KeyTriple& t) const {
        uint64_t h = 1469598103934665603ULL;
        auto mix = [&](const Slot& s) {
            h = (h ^ (uint64_t(s.value) << 2 | uint64_t(s.tag))) * 1099511628211ULL;
        };
        mix(t.subject);
        mix(t.predicate);
        mix(t.object);
        return size_t(h);
    }
};

/// Optional key constraints for a store scan, one per slot position.
struct ScanMask {
    std::optional<Dictionary::Key> subject, predicate, object;
};

/// Dictionary strings are tagged with the term kind so that an IRI and a
/// string literal with the same lexical form stay distinct, in storage and
/// in 32-bit hash space.
inline std::string tagged_string(const Term& t) {
    switch (t.kind()) {
        case TermKind::Iri:       return "I" + t.lexical();
        case TermKind::StringLit: return "L" + t.lexical();
        default: throw Error(Errc::TypeMismatch, "numeric terms are stored inline, not in the dictionary");
    }
}

inline Term term_from_tagged(std::string_view s) {
    if (s.empty()) throw Error(Errc::SchemaMismatch, "empty dictionary entry");
    std::string lex(s.substr(1));
    if (s[0] == 'I') return Term::iri(std::move(lex));
    if (s[0] == 'L') return Term::str(std::move(lex));
    throw Error(Errc::SchemaMismatch, "dictionary entry lacks a kind tag");
}

/// The device-local triple store: a dictionary plus fixed-size key triplets
/// with set semantics. Iteration order is insertion order, kept
/// deterministic so simulation runs are reproducible.
class TupleStore {
public:
    /// Returns false when the triple was already present.
    bool insert(const Triple& t) {
        if (!t.well_formed()) throw Error(Errc::SyntaxError, "subject/predicate must be IRIs");
        KeyTriple kt;
        kt.subject = slot_of(t.subject);
        kt.predicate = slot_of(t.predicate);
        kt.object = slot_of(t.object);
        if (index_.contains(kt)) return false;
        index_.insert(kt);
        triples_.push_back(kt);
        return true;
    }

    size_t size() const { return triples_.size(); }
    const Dictionary& dictionary() const { return dict_; }
    const std::vector<KeyTriple>& key_triples() const { return triples_; }

    /// Yields stored triples matching every constrained slot, in store order.
    template <typename Fn>
    void scan(const ScanMask& mask, Fn&& fn) const {
        auto key_matches = [](const Slot& s, const std::optional<Dictionary::Key>& want) {
            if (!want) return true;
            return (s.tag == SlotTag::IriKey || s.tag == SlotTag::StrKey) && s.value == *want;
        };
        for (const KeyTriple& kt : triples_) {
            if (key_matches(kt.subject, mask.subject) && key_matches(kt.predicate, mask.predicate) &&
                key_matches(kt.object, mask.object))
                fn(kt);
        }
    }

    std::vector<KeyTriple> scan_all(const ScanMask& mask) const {
        std::vector<KeyTriple> out;
        scan(mask, [&](const KeyTriple& kt) { out.push_back(kt); });
        return out;
    }

    Term term_of(const Slot& s) const {
        switch (s.tag) {
            case SlotTag::IriKey:
            case SlotTag::StrKey: return term_from_tagged(dict_.lookup_string(Dictionary::Key(s.value)));
            case SlotTag::Int:    return Term::integer(std::bit_cast<int32_t>(s.value));
            case SlotTag::Float:  return Term::real(std::bit_cast<float>(s.value));
        }
        throw Error(Errc::SchemaMismatch, "bad slot tag");
    }

    Triple triple_of(const KeyTriple& kt) const {
        return Triple{term_of(kt.subject), term_of(kt.predicate), term_of(kt.object)};
    }

    /// String-view iteration: the same multiset of triples as key iteration.
    template <typename Fn>
    void for_each_triple(Fn&& fn) const {
        for (const KeyTriple& kt : triples_) fn(triple_of(kt));
    }

    std::vector<Triple> triples() const {
        std::vector<Triple> out;
        out.reserve(triples_.size());
        for_each_triple([&](const Triple& t) { out.push_back(t); });
        return out;
    }

    /// Loads dataset lines (one triple per line); returns triples inserted.
    size_t load_lines(std::istream& in) {
        size_t added = 0;
        std::string line;
        unsigned line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto t = parse_triple_line(line, line_no)) added += insert(*t) ? 1 : 0;
        }
        return added;
    }

    size_t load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::IoError, "cannot open dataset file " + path);
        return load_lines(in);
    }

private:
    Slot slot_of(const Term& t) {
        switch (t.kind()) {
            case TermKind::Iri:       return {SlotTag::IriKey, dict_.insert(tagged_string(t))};
            case TermKind::StringLit: return {SlotTag::StrKey, dict_.insert(tagged_string(t))};
            case TermKind::IntLit:    return {SlotTag::Int, std::bit_cast<uint32_t>(t.int_value())};
            case TermKind::FloatLit:  return {SlotTag::Float, std::bit_cast<uint32_t>(t.float_value())};
        }
        throw Error(Errc::SchemaMismatch, "bad term kind");
    }

    Dictionary dict_;
    std::vector<KeyTriple> triples_;
    std::unordered_set<KeyTriple, KeyTripleHash> index_;
};

} // namespace snes
