#include "doctest.h"

#include "rotrie/random_tape.hpp"

using rotrie::RandomTape;

TEST_CASE("identical (seed, label) yields identical bits") {
    auto a = RandomTape::from_seed(42);
    auto b = RandomTape::from_seed(42);
    CHECK(a.draw_bits(1) == b.draw_bits(1));
    CHECK(a.draw_bits(1) == b.draw_bits(1));
    CHECK(a.draw_bits(64) == b.draw_bits(64));
}

TEST_CASE("counter is exactly the sum of widths") {
    auto t = RandomTape::from_seed(7);
    CHECK(t.bits_consumed() == 0);
    t.draw_bits(13);
    t.draw_bits(5);
    CHECK(t.bits_consumed() == 18);
    auto u = RandomTape::from_seed(7);
    u.draw_bits(32);
    CHECK(u.bits_consumed() == 32);
}

TEST_CASE("1024 one-bit draws consume 1024 bits") {
    auto t = RandomTape::from_seed(3);
    for (int i = 0; i < 1024; ++i) t.draw_bits(1);
    CHECK(t.bits_consumed() == 1024);
}

TEST_CASE("stream identity is independent of draw chunking") {
    auto a = RandomTape::from_seed(9);
    auto b = RandomTape::from_seed(9);
    uint64_t lo = a.draw_bits(13);
    uint64_t hi = a.draw_bits(5);
    uint64_t both = b.draw_bits(18);
    CHECK(((hi << 13) | lo) == both);
}

TEST_CASE("one-bit draws are unbiased") {
    auto t = RandomTape::from_seed(2024);
    int ones = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ones += static_cast<int>(t.draw_bits(1));
    double mean = static_cast<double>(ones) / draws;
    CHECK(mean > 0.49);
    CHECK(mean < 0.51);
}

TEST_CASE("forks with distinct labels diverge") {
    auto t = RandomTape::from_seed(5);
    auto g = t.fork("g");
    auto h = t.fork("h");
    CHECK(g.draw_bits(64) != h.draw_bits(64));
    CHECK(t.bits_consumed() == 0);  // forking leaves the parent untouched
}

TEST_CASE("repeated forks with the same label agree") {
    auto t = RandomTape::from_seed(5);
    auto a = t.fork(uint64_t{7});
    auto b = t.fork(uint64_t{7});
    for (int i = 0; i < 8; ++i) CHECK(a.draw_bits(32) == b.draw_bits(32));
    CHECK(a.label_path() == b.label_path());
}

TEST_CASE("nested fork paths are distinct substreams") {
    auto t = RandomTape::from_seed(1);
    auto a = t.fork("x").fork(uint64_t{1});
    auto b = t.fork("x").fork(uint64_t{2});
    auto c = t.fork("x1");  // must not alias ("x", 1)
    CHECK(a.draw_bits(64) != b.draw_bits(64));
    CHECK(a.replay().draw_bits(64) != c.draw_bits(64));
}

TEST_CASE("draw_below covers the range and is power-of-two exact") {
    auto t = RandomTape::from_seed(11);
    for (int i = 0; i < 1000; ++i) {
        uint64_t v = t.draw_below(16);
        CHECK(v < 16);
    }
    CHECK(t.bits_consumed() == 4000);
    for (int i = 0; i < 100; ++i) CHECK(t.draw_below(1000) < 1000);
    CHECK(t.bits_consumed() == 5000);  // 10 bits per bounded draw
    CHECK(t.draw_below(1) == 0);
    CHECK(t.bits_consumed() == 5000);
}

TEST_CASE("replay resets the stream") {
    auto t = RandomTape::from_seed(77).fork("z");
    uint64_t first = t.draw_bits(64);
    t.draw_bits(64);
    auto r = t.replay();
    CHECK(r.bits_consumed() == 0);
    CHECK(r.draw_bits(64) == first);
}
