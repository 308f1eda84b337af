#include "doctest.h"

#include <array>
#include <set>

#include "rotrie/hash_kit.hpp"

using namespace rotrie;

namespace {

// independent primality oracle for the sieve
bool slow_is_prime(uint64_t v) {
    if (v < 2) return false;
    for (uint64_t d = 2; d < v; ++d)
        if (v % d == 0) return false;
    return true;
}

}  // namespace

TEST_CASE("prime enumeration matches trial division") {
    CHECK(enumerate_primes(10) == std::vector<uint64_t>{2, 3, 5, 7});
    CHECK(enumerate_primes(2) == std::vector<uint64_t>{2});

    uint64_t oracle_count = 0;
    for (uint64_t v = 2; v <= 10000; ++v)
        if (slow_is_prime(v)) ++oracle_count;
    CHECK(oracle_count == 1229);
    CHECK(enumerate_primes(10000).size() == oracle_count);

    auto few = enumerate_primes(200);
    for (uint64_t p : few) CHECK(slow_is_prime(p));
}

TEST_CASE("k-wise sampling consumes k * ceil(log2 p) bits") {
    auto tape = RandomTape::from_seed(1);
    auto h = KWiseHash::sample(tape, 2, uint64_t{1} << 10, uint64_t{1} << 10);
    CHECK(h.prime() == 1031);
    CHECK(tape.bits_consumed() == 2 * 11);
    CHECK(h.description_bits() == 2 * 11);
}

TEST_CASE("fixed-coefficient evaluation is plain polynomial arithmetic") {
    auto h = KWiseHash::from_coefficients({2, 3}, 7, 7);
    CHECK(h(1) == 5);  // (2 + 3*1) mod 7
    CHECK(h(0) == 2);
    CHECK(h(1) == 5);  // deterministic across calls
}

TEST_CASE("degree-1 map with nonzero slope permutes the field") {
    for (uint64_t c1 = 1; c1 < 7; ++c1) {
        auto h = KWiseHash::from_coefficients({3, c1}, 7, 7);
        std::set<uint64_t> image;
        for (uint64_t x = 0; x < 7; ++x) image.insert(h(x));
        CHECK(image.size() == 7);
    }
}

TEST_CASE("pair (h(0), h(1)) is exactly uniform over all coefficient pairs at p=7") {
    std::array<std::array<int, 7>, 7> counts{};
    for (uint64_t c0 = 0; c0 < 7; ++c0)
        for (uint64_t c1 = 0; c1 < 7; ++c1) {
            auto h = KWiseHash::from_coefficients({c0, c1}, 7, 7);
            counts[h(0)][h(1)]++;
        }
    for (const auto& row : counts)
        for (int c : row) CHECK(c == 1);
}

TEST_CASE("pairwise collision rate matches the range size") {
    auto master = RandomTape::from_seed(99);
    int collisions = 0;
    const int seeds = 10000;
    for (int s = 0; s < seeds; ++s) {
        auto tape = master.fork(static_cast<uint64_t>(s));
        auto h = KWiseHash::sample(tape, 2, 1 << 8, 1 << 4);
        if (h(3) == h(200)) ++collisions;
    }
    double rate = static_cast<double>(collisions) / seeds;
    CHECK(rate < 2.0 / 16.0);
    CHECK(rate > 0.5 / 16.0);
}

TEST_CASE("load-balancing hash emits exactly log2 t bits over its level schedule") {
    auto tape = RandomTape::from_seed(5);
    auto h = LoadBalancingHash::sample(tape, 1 << 8);
    int total = 0;
    for (const auto& lv : h.levels()) total += lv.bits;
    CHECK(total == 8);
    CHECK(h.levels().size() == 4);  // ceil(log2 log2 t) + 1
    CHECK(h.levels()[0].independence == 4);
    CHECK(h.levels()[1].independence == 4);
    CHECK(h.levels()[2].independence == 6);
    CHECK(h.levels()[3].independence == 8);
    for (int x = 0; x < 100; ++x) CHECK(h(x) < (1 << 8));
}

TEST_CASE("load-balancing output is the concatenation of level outputs") {
    auto tape = RandomTape::from_seed(6);
    auto h = LoadBalancingHash::sample(tape, 1 << 10);
    for (uint64_t x : {0ull, 1ull, 77ull, 1023ull, 4096ull}) {
        uint64_t manual = 0;
        for (const auto& lv : h.levels()) manual = (manual << lv.bits) | lv.h(x);
        CHECK(manual == h(x));
    }
}

TEST_CASE("load-balancing bit budget holds at t in {2^8, 2^12, 2^16}") {
    for (int lg : {8, 12, 16}) {
        auto tape = RandomTape::from_seed(7);
        auto h = LoadBalancingHash::sample(tape, uint64_t{1} << lg);
        CHECK(tape.bits_consumed() == h.description_bits());
        double bound = LoadBalancingHash::kBitBudget * lg * std::log2(static_cast<double>(lg));
        CHECK(static_cast<double>(h.description_bits()) <= bound);
    }
}

TEST_CASE("load-balancing sampling is deterministic") {
    auto t1 = RandomTape::from_seed(8);
    auto t2 = RandomTape::from_seed(8);
    auto h1 = LoadBalancingHash::sample(t1, 1 << 8);
    auto h2 = LoadBalancingHash::sample(t2, 1 << 8);
    for (uint64_t x = 0; x < 300; ++x) CHECK(h1(x) == h2(x));
}

TEST_CASE("load-balancing family keeps the max load at polylog") {
    const uint64_t t = 1 << 10;
    const uint64_t ell = 100;  // ceil(log2 t)^2
    auto master = RandomTape::from_seed(2718);
    for (int s = 0; s < 200; ++s) {
        auto tape = master.fork(static_cast<uint64_t>(s));
        auto h = LoadBalancingHash::sample(tape, t);
        std::vector<uint32_t> load(t, 0);
        uint64_t max_load = 0;
        for (uint64_t x = 0; x < t; ++x) max_load = std::max<uint64_t>(max_load, ++load[h(x)]);
        CHECK(max_load <= ell);
    }
}

TEST_CASE("prime-product sampling draws c^2 primes from the pool") {
    auto tape = RandomTape::from_seed(10);
    auto h = PrimeProductHash::sample(tape, uint64_t{1} << 16, 40, 2);
    CHECK(h.primes().size() == 4);
    for (uint64_t p : h.primes()) {
        CHECK(p <= (uint64_t{1} << 16));
        CHECK(is_prime_u64(p));
    }
    uint64_t pool = enumerate_primes_cached(uint64_t{1} << 16).size();
    CHECK(tape.bits_consumed() == 4 * static_cast<uint64_t>(ceil_log2(pool)));
    CHECK(h.description_bits() == tape.bits_consumed());
}

TEST_CASE("prime-product evaluation is reduction mod the product") {
    auto h = PrimeProductHash::from_primes({3, 5});
    CHECK(h.modulus() == 15);
    CHECK(h(17) == 2);
    CHECK(h(15) == 0);
    for (uint64_t x = 0; x < 100; ++x) CHECK(h(x) < 15);

    // brute-force injectivity of x mod 3 on {0, 5, 10}
    auto m3 = PrimeProductHash::from_primes({3});
    std::set<uint64_t> images;
    for (uint64_t x : {0ull, 5ull, 10ull}) images.insert(m3(x));
    CHECK(images == std::set<uint64_t>{0, 2, 1});
}

TEST_CASE("precondition n > u^c is enforced") {
    auto tape = RandomTape::from_seed(11);
    CHECK_THROWS_AS(PrimeProductHash::sample(tape, 1500, 40, 2), std::invalid_argument);
}

namespace {

double injectivity_failure_rate(uint64_t n, int u, int c, int seeds, int set_size,
                                uint64_t seed) {
    auto master = RandomTape::from_seed(seed);
    int failures = 0;
    for (int s = 0; s < seeds; ++s) {
        auto tape = master.fork(static_cast<uint64_t>(s));
        auto h = PrimeProductHash::sample(tape, n, u, c);
        auto kt = master.fork("k").fork(static_cast<uint64_t>(s));
        std::set<uint64_t> keys;
        while (keys.size() < static_cast<size_t>(set_size))
            keys.insert(kt.draw_bits(u));
        std::set<uint64_t> images;
        bool collided = false;
        for (uint64_t k : keys)
            if (!images.insert(h(k)).second) collided = true;
        if (collided) ++failures;
    }
    return static_cast<double>(failures) / seeds;
}

}  // namespace

TEST_CASE("prime-product injectivity failures are rare and improve with c") {
    double rate_c2 = injectivity_failure_rate(uint64_t{1} << 16, 40, 2, 200, 1 << 10, 31);
    CHECK(rate_c2 <= 0.01);
    double rate_c3 = injectivity_failure_rate(uint64_t{1} << 16, 16, 3, 100, 1 << 8, 32);
    double rate_c2_same = injectivity_failure_rate(uint64_t{1} << 16, 16, 2, 100, 1 << 8, 32);
    CHECK(rate_c3 <= rate_c2_same + 1e-9);
}
