#include "doctest.h"

#include <map>

#include "rotrie/small_maps.hpp"

using rotrie::BoundedDict;
using rotrie::LazyArray;
using rotrie::RandomTape;

TEST_CASE("bounded dict round trip, overwrite, delete") {
    BoundedDict d(8);
    CHECK(!d.query(3).has_value());
    CHECK(d.insert(5, 9) == BoundedDict::Insert::ok);
    CHECK(d.query(5) == 9);
    CHECK(d.insert(5, 11) == BoundedDict::Insert::ok);
    CHECK(d.query(5) == 11);
    CHECK(d.size() == 1);
    CHECK(d.erase(5));
    CHECK(!d.erase(5));
    CHECK(!d.query(5).has_value());
    CHECK(d.size() == 0);
}

TEST_CASE("bounded dict rejects the capacity+1st distinct key") {
    BoundedDict d(4);
    for (uint64_t k = 0; k < 4; ++k) CHECK(d.insert(k, k) == BoundedDict::Insert::ok);
    CHECK(d.insert(99, 1) == BoundedDict::Insert::overflow);
    CHECK(d.size() == 4);
    CHECK(!d.query(99).has_value());
    // overwriting a present key is fine at capacity
    CHECK(d.insert(2, 42) == BoundedDict::Insert::ok);
    CHECK(d.query(2) == 42);
    // freeing a slot makes room again
    CHECK(d.erase(0));
    CHECK(d.insert(99, 1) == BoundedDict::Insert::ok);
}

TEST_CASE("bounded dict matches a reference map") {
    BoundedDict d(20000);
    std::map<uint64_t, uint64_t> ref;
    auto tape = RandomTape::from_seed(123);
    for (int i = 0; i < 10000; ++i) {
        uint64_t k = tape.draw_below(300);
        switch (tape.draw_below(3)) {
            case 0: {
                uint64_t v = tape.draw_bits(32);
                d.insert(k, v);
                ref[k] = v;
                break;
            }
            case 1: {
                bool got = d.erase(k);
                CHECK(got == (ref.erase(k) > 0));
                break;
            }
            default: {
                auto got = d.query(k);
                auto it = ref.find(k);
                CHECK(got.has_value() == (it != ref.end()));
                if (got && it != ref.end()) CHECK(*got == it->second);
            }
        }
        CHECK(d.size() == ref.size());
    }
}

TEST_CASE("default bin capacity is ceil(log2 n) squared") {
    CHECK(rotrie::default_bin_capacity(uint64_t{1} << 14) == 196);
    CHECK(rotrie::default_bin_capacity(uint64_t{1} << 12) == 144);
    CHECK(rotrie::default_bin_capacity(uint64_t{1} << 8) == 64);
}

TEST_CASE("lazy array returns default before first set") {
    LazyArray<uint64_t> a(1000000, 7);
    CHECK(a.get(123456) == 7);
    a.set(5, 42);
    CHECK(a.get(5) == 42);
    CHECK(a.get(6) == 7);
    CHECK(a.initialized_count() == 1);
}

TEST_CASE("lazy array construction writes are capacity-independent") {
    namespace ins = rotrie::instrument;
    uint64_t w0 = ins::writes();
    LazyArray<uint64_t> small(1000, 0);
    uint64_t small_writes = ins::writes() - w0;
    uint64_t w1 = ins::writes();
    LazyArray<uint64_t> big(10000000, 0);
    uint64_t big_writes = ins::writes() - w1;
    CHECK(small_writes == big_writes);
    CHECK(small_writes <= 16);
}

TEST_CASE("lazy array survives adversarially pre-filled backing storage") {
    LazyArray<uint64_t> a(4096, 0);
    a.debug_poison(0xdeadbeef);
    for (size_t i = 0; i < 4096; i += 37) CHECK(a.get(i) == 0);
    a.set(99, 5);
    CHECK(a.get(99) == 5);
    for (size_t i = 0; i < 4096; i += 41)
        if (i != 99) CHECK(a.get(i) == 0);
}
