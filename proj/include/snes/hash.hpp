#pragma once

#include <array>
#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "snes/error.hpp"
#include "snes/tuple_store.hpp"

namespace snes {

/// 32-bit string hashes substitute strings during query processing and on
/// the wire. All arithmetic is 32-bit wrapping.
enum class HashAlgorithm : uint8_t {
    AdditiveKr,
    BernsteinSum,
    BernsteinXor,
    Elf,
    Fnv1,
    Fnv1a,
    JenkinsOaat,
    Larson,
    Sdbm,
};

/// Best collision/variance behaviour of the benchmarked set; used everywhere
/// strings go to 32 bits.
inline constexpr HashAlgorithm kDefaultHash = HashAlgorithm::Sdbm;

inline constexpr std::array<HashAlgorithm, 9> kAllHashAlgorithms = {
    HashAlgorithm::AdditiveKr, HashAlgorithm::BernsteinSum, HashAlgorithm::BernsteinXor,
    HashAlgorithm::Elf,        HashAlgorithm::Fnv1,         HashAlgorithm::Fnv1a,
    HashAlgorithm::JenkinsOaat, HashAlgorithm::Larson,      HashAlgorithm::Sdbm,
};

inline const char* hash_algorithm_name(HashAlgorithm a) {
    switch (a) {
        case HashAlgorithm::AdditiveKr:   return "additive-kr";
        case HashAlgorithm::BernsteinSum: return "bernstein-sum";
        case HashAlgorithm::BernsteinXor: return "bernstein-xor";
        case HashAlgorithm::Elf:          return "elf";
        case HashAlgorithm::Fnv1:         return "fnv1";
        case HashAlgorithm::Fnv1a:        return "fnv1a";
        case HashAlgorithm::JenkinsOaat:  return "jenkins-oaat";
        case HashAlgorithm::Larson:       return "larson";
        case HashAlgorithm::Sdbm:         return "sdbm";
    }
    return "?";
}

inline std::optional<HashAlgorithm> hash_algorithm_from_name(std::string_view name) {
    for (HashAlgorithm a : kAllHashAlgorithms)
        if (name == hash_algorithm_name(a)) return a;
    return std::nullopt;
}

inline uint32_t hash_bytes(HashAlgorithm alg, std::string_view bytes) {
    uint32_t h = 0;
    switch (alg) {
        case HashAlgorithm::AdditiveKr:
            for (unsigned char c : bytes) h += c;
            return h;
        case HashAlgorithm::BernsteinSum:
            h = 5381;
            for (unsigned char c : bytes) h = h * 33 + c;
            return h;
        case HashAlgorithm::BernsteinXor:
            h = 5381;
            for (unsigned char c : bytes) h = (h * 33) ^ c;
            return h;
        case HashAlgorithm::Elf:
            for (unsigned char c : bytes) {
                h = (h << 4) + c;
                if (uint32_t g = h & 0xF0000000u) h ^= g >> 24;
                h &= 0x0FFFFFFFu;
            }
            return h;
        case HashAlgorithm::Fnv1:
            h = 2166136261u;
            for (unsigned char c : bytes) {
                h *= 16777619u;
                h ^= c;
            }
            return h;
        case HashAlgorithm::Fnv1a:
            h = 2166136261u;
            for (unsigned char c : bytes) {
                h ^= c;
                h *= 16777619u;
            }
            return h;
        case HashAlgorithm::JenkinsOaat:
            for (unsigned char c : bytes) {
                h += c;
                h += h << 10;
                h ^= h >> 6;
            }
            h += h << 3;
            h ^= h >> 11;
            h += h << 15;
            return h;
        case HashAlgorithm::Larson:
            for (unsigned char c : bytes) h = h * 101 + c;
            return h;
        case HashAlgorithm::Sdbm:
            for (unsigned char c : bytes) h = c + (h << 6) + (h << 16) - h;
            return h;
    }
    throw Error(Errc::UnknownType, "bad hash algorithm");
}

/// The 32-bit comparand of a term during query processing: hash of the
/// tagged string for IRIs/literals.
inline uint32_t term_hash32(const Term& t, HashAlgorithm alg = kDefaultHash) {
    return hash_bytes(alg, tagged_string(t));
}

struct CollisionReport {
    uint64_t distinct_inputs = 0;
    uint64_t distinct_hashes = 0;
    uint64_t collisions = 0;        // distinct_inputs - distinct_hashes
    double variance_per_hash = 0.0; // population variance of elements per occupied hash value
};

/// Exact collision counts over a corpus of pairwise-distinct strings,
/// mirroring the hash study's methodology.
template <typename Range>
CollisionReport collision_report(HashAlgorithm alg, const Range& corpus) {
    std::unordered_map<uint32_t, uint32_t> buckets;
    uint64_t n = 0;
    for (const auto& s : corpus) {
        ++buckets[hash_bytes(alg, std::string_view(s))];
        ++n;
    }
    CollisionReport r;
    r.distinct_inputs = n;
    r.distinct_hashes = buckets.size();
    r.collisions = n - buckets.size();
    if (!buckets.empty()) {
        double mean = double(n) / double(buckets.size());
        double acc = 0;
        for (const auto& [h, count] : buckets) {
            double d = double(count) - mean;
            acc += d * d;
        }
        r.variance_per_hash = acc / double(buckets.size());
    }
    return r;
}

/// Bounded LRU map from hash values to dictionary keys; owned by one device.
class HashCache {
public:
    explicit HashCache(size_t capacity = 256) : capacity_(capacity) {}

    std::optional<Dictionary::Key> get(uint32_t h) {
        auto it = index_.find(h);
        if (it == index_.end()) return std::nullopt;
        order_.splice(order_.begin(), order_, it->second);
        return it->second->second;
    }

    void put(uint32_t h, Dictionary::Key key) {
        if (auto it = index_.find(h); it != index_.end()) {
            it->second->second = key;
            order_.splice(order_.begin(), order_, it->second);
            return;
        }
        order_.emplace_front(h, key);
        index_[h] = order_.begin();
        if (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
    }

    size_t size() const { return order_.size(); }
    size_t capacity() const { return capacity_; }

private:
    size_t capacity_;
    std::list<std::pair<uint32_t, Dictionary::Key>> order_;  // front = most recent
    std::unordered_map<uint32_t, std::list<std::pair<uint32_t, Dictionary::Key>>::iterator> index_;
};

/// Looks up the dictionary string whose hash is h: cache first, then a full
/// dictionary iteration. Absence means "forward the request to children".
/// dict_iterations, when given, counts entries visited by the fallback scan.
inline std::optional<std::string> resolve_hash(HashCache& cache, const TupleStore& ts, uint32_t h,
                                               uint64_t* dict_iterations = nullptr,
                                               HashAlgorithm alg = kDefaultHash) {
    const Dictionary& dict = ts.dictionary();
    if (auto key = cache.get(h)) {
        if (dict.contains(*key)) {
            const std::string& s = dict.lookup_string(*key);
            if (hash_bytes(alg, s) == h) return s;
        }
    }
    std::optional<std::string> found;
    dict.for_each([&](Dictionary::Key key, const std::string& s) {
        if (found) return;
        if (dict_iterations) ++*dict_iterations;
        if (hash_bytes(alg, s) == h) {
            cache.put(h, key);
            found = s;
        }
    });
    return found;
}

} // namespace snes
