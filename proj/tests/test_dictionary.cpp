#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "snes/dictionary.hpp"

using namespace snes;

TEST_CASE("insert is idempotent per string") {
    Dictionary d;
    auto k1 = d.insert("x");
    auto k2 = d.insert("x");
    CHECK(k1 == k2);
    CHECK(d.size() == 1);
}

TEST_CASE("distinct strings get distinct keys") {
    Dictionary d;
    CHECK(d.insert("a") != d.insert("b"));
    CHECK(d.size() == 2);
}

TEST_CASE("lookup after insert is the identity on arbitrary bytes") {
    Dictionary d;
    std::mt19937 rng(99);
    for (int i = 0; i < 2000; ++i) {
        size_t len = 1 + rng() % 255;
        std::string s;
        for (size_t j = 0; j < len; ++j) s += char(1 + rng() % 255);  // any non-NUL byte, UTF-8 included
        auto key = d.insert(s);
        CHECK(d.lookup_string(key) == s);
        CHECK(d.lookup_key(s) == key);
    }
}

TEST_CASE("empty strings are rejected") {
    Dictionary d;
    CHECK_THROWS_AS(d.insert(""), Error);
}

TEST_CASE("capacity is 65,535 live entries") {
    Dictionary d;
    for (size_t i = 0; i < Dictionary::kMaxEntries; ++i) d.insert("s" + std::to_string(i));
    CHECK(d.size() == 65535);
    try {
        d.insert("one-too-many");
        FAIL("expected CapacityExceeded");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CapacityExceeded);
    }
    // Existing entries still resolve.
    CHECK(d.insert("s0") == d.lookup_key("s0"));
}
