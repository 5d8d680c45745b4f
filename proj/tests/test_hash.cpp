#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <unordered_map>

#include "snes/hash.hpp"

using namespace snes;

TEST_CASE("sdbm known values") {
    // One step of h = c + (h<<6) + (h<<16) - h from h = 0.
    CHECK(hash_bytes(HashAlgorithm::Sdbm, "") == 0);
    CHECK(hash_bytes(HashAlgorithm::Sdbm, "a") == 97);
}

TEST_CASE("published and hand-derived single-step values") {
    // FNV offset basis and the classic "a" test vectors.
    CHECK(hash_bytes(HashAlgorithm::Fnv1, "") == 2166136261u);
    CHECK(hash_bytes(HashAlgorithm::Fnv1a, "") == 2166136261u);
    CHECK(hash_bytes(HashAlgorithm::Fnv1, "a") == 0x050C5D7Eu);
    CHECK(hash_bytes(HashAlgorithm::Fnv1a, "a") == 0xE40C292Cu);
    // djb2: 5381*33 + 97 and 5381*33 ^ 97.
    CHECK(hash_bytes(HashAlgorithm::BernsteinSum, "a") == 177670u);
    CHECK(hash_bytes(HashAlgorithm::BernsteinXor, "a") == 177604u);
    CHECK(hash_bytes(HashAlgorithm::Larson, "a") == 97u);
    // Additive is the plain byte sum.
    CHECK(hash_bytes(HashAlgorithm::AdditiveKr, "sensor") == 666u);
}

TEST_CASE("determinism across calls") {
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int j = 0; j < int(rng() % 40); ++j) s += char('!' + rng() % 90);
        for (HashAlgorithm a : kAllHashAlgorithms)
            CHECK(hash_bytes(a, s) == hash_bytes(a, std::string(s)));
    }
}

TEST_CASE("name mapping is one-to-one") {
    for (HashAlgorithm a : kAllHashAlgorithms)
        CHECK(hash_algorithm_from_name(hash_algorithm_name(a)) == a);
    CHECK(!hash_algorithm_from_name("novak"));
}

TEST_CASE("collision report on a single string") {
    std::vector<std::string> corpus{"only"};
    auto r = collision_report(HashAlgorithm::Sdbm, corpus);
    CHECK(r.distinct_inputs == 1);
    CHECK(r.distinct_hashes == 1);
    CHECK(r.collisions == 0);
    CHECK(r.variance_per_hash == 0.0);
}

TEST_CASE("a constructed colliding pair counts as one collision") {
    // Birthday-search a real 32-bit collision, then feed exactly that pair.
    std::mt19937 rng(11);
    std::unordered_map<uint32_t, std::string> seen;
    std::string a, b;
    while (a.empty()) {
        std::string s;
        for (int j = 0; j < 6; ++j) s += char('a' + rng() % 26);
        uint32_t h = hash_bytes(HashAlgorithm::Sdbm, s);
        auto it = seen.find(h);
        if (it != seen.end() && it->second != s) {
            a = it->second;
            b = s;
        } else {
            seen.emplace(h, s);
        }
    }
    CHECK(hash_bytes(HashAlgorithm::Sdbm, a) == hash_bytes(HashAlgorithm::Sdbm, b));
    std::vector<std::string> corpus{a, b};
    auto r = collision_report(HashAlgorithm::Sdbm, corpus);
    CHECK(r.collisions == 1);
    CHECK(r.distinct_hashes == 1);
}

TEST_CASE("well-mixing hashes stay near the birthday expectation") {
    // 20k random strings: expectation n(n-1)/2^33 ~ 0.047, so a handful of
    // collisions would already signal a broken recurrence.
    std::mt19937 rng(20240601);
    std::vector<std::string> corpus;
    std::unordered_map<std::string, bool> dedupe;
    while (corpus.size() < 20000) {
        std::string s = "http://example.org/r/" + std::to_string(rng());
        if (!dedupe.emplace(s, true).second) continue;
        corpus.push_back(s);
    }
    for (HashAlgorithm a : {HashAlgorithm::Sdbm, HashAlgorithm::Larson, HashAlgorithm::Fnv1,
                            HashAlgorithm::BernsteinSum, HashAlgorithm::BernsteinXor}) {
        auto r = collision_report(a, corpus);
        CHECK(r.collisions <= 2);
    }
    // Additive degenerates to the byte sum: nearly everything collides.
    auto additive = collision_report(HashAlgorithm::AdditiveKr, corpus);
    CHECK(additive.collisions > 15000);
}

TEST_CASE("hash cache evicts least-recently-used entries") {
    HashCache cache(3);
    cache.put(1, 10);
    cache.put(2, 20);
    cache.put(3, 30);
    CHECK(cache.get(1) == Dictionary::Key(10));  // 1 becomes most recent
    cache.put(4, 40);                            // evicts 2
    CHECK(!cache.get(2));
    CHECK(cache.get(1) == Dictionary::Key(10));
    CHECK(cache.get(3) == Dictionary::Key(30));
    CHECK(cache.get(4) == Dictionary::Key(40));
    CHECK(cache.size() == 3);
}

TEST_CASE("resolve_hash finds stored strings and reports absence") {
    TupleStore ts;
    ts.insert({Term::iri("http://d/s"), Term::iri("http://d/p"), Term::str("reading")});
    HashCache cache;
    uint32_t h = hash_bytes(kDefaultHash, "Lreading");

    uint64_t iterations = 0;
    auto found = resolve_hash(cache, ts, h, &iterations);
    REQUIRE(found);
    CHECK(*found == "Lreading");
    CHECK(hash_bytes(kDefaultHash, *found) == h);
    CHECK(iterations > 0);

    // Second lookup is served from the cache without touching the dictionary.
    uint64_t iterations2 = 0;
    auto again = resolve_hash(cache, ts, h, &iterations2);
    REQUIRE(again);
    CHECK(iterations2 == 0);

    CHECK(!resolve_hash(cache, ts, hash_bytes(kDefaultHash, "Lnever-stored")));
}
