#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "rotrie/random_tape.hpp"

namespace rotrie {

inline int ceil_log2(uint64_t v) {
    assert(v >= 1);
    return (v <= 1) ? 0 : 64 - std::countl_zero(v - 1);
}

inline bool is_prime_u64(uint64_t v) {
    if (v < 2) return false;
    for (uint64_t d = 2; d * d <= v; ++d)
        if (v % d == 0) return false;
    return true;
}

inline uint64_t smallest_prime_at_least(uint64_t v) {
    if (v <= 2) return 2;
    uint64_t p = v | 1;
    while (!is_prime_u64(p)) p += 2;
    return p;
}

// All primes <= limit, sorted. Sieve of Eratosthenes.
inline std::vector<uint64_t> enumerate_primes(uint64_t limit) {
    assert(limit >= 2);
    std::vector<bool> composite(limit + 1, false);
    std::vector<uint64_t> out;
    for (uint64_t p = 2; p <= limit; ++p) {
        if (composite[p]) continue;
        out.push_back(p);
        for (uint64_t q = p * p; q <= limit; q += p) composite[q] = true;
    }
    return out;
}

// Shared sieve results; group tables re-request the same limits constantly.
inline const std::vector<uint64_t>& enumerate_primes_cached(uint64_t limit) {
    static std::mutex mu;
    static std::map<uint64_t, std::unique_ptr<std::vector<uint64_t>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[limit];
    if (!slot) slot = std::make_unique<std::vector<uint64_t>>(enumerate_primes(limit));
    return *slot;
}

// Degree-(k-1) polynomial over GF(p), reduced into [range]. Describing one
// costs exactly k * ceil(log2 p) tape bits.
class KWiseHash {
public:
    static KWiseHash sample(RandomTape& tape, int k, uint64_t domain, uint64_t range) {
        assert(k >= 2 && k % 2 == 0);
        uint64_t p = smallest_prime_at_least(domain < 2 ? 2 : domain);
        if (p < range) p = smallest_prime_at_least(range);
        std::vector<uint64_t> c(static_cast<size_t>(k));
        for (auto& ci : c) ci = tape.draw_below(p);
        return KWiseHash(std::move(c), p, range);
    }

    static KWiseHash from_coefficients(std::vector<uint64_t> coeffs, uint64_t p, uint64_t range) {
        return KWiseHash(std::move(coeffs), p, range);
    }

    uint64_t operator()(uint64_t x) const {
        unsigned __int128 acc = 0;
        for (size_t i = c_.size(); i-- > 0;) acc = (acc * x + c_[i]) % p_;
        return reduce(static_cast<uint64_t>(acc));
    }

    uint64_t prime() const { return p_; }
    int independence() const { return static_cast<int>(c_.size()); }
    uint64_t range() const { return range_; }
    uint64_t description_bits() const {
        return static_cast<uint64_t>(c_.size()) * static_cast<uint64_t>(ceil_log2(p_));
    }

private:
    KWiseHash(std::vector<uint64_t> c, uint64_t p, uint64_t range)
        : c_(std::move(c)), p_(p), range_(range) {
        assert(!c_.empty() && range_ >= 1 && p_ >= range_);
    }

    uint64_t reduce(uint64_t v) const {
        if (range_ == p_) return v;
        int w = ceil_log2(p_);
        return static_cast<uint64_t>((static_cast<unsigned __int128>(v) * range_) >> w);
    }

    std::vector<uint64_t> c_;
    uint64_t p_;
    uint64_t range_;
};

// Gradually-increasing-independence family mapping [t^2] -> [t], t a power
// of two. Level i contributes the next block of output bits (high bits from
// level 1) using independence 2*ceil((4/3)^i); block i has
// max(1, ceil((3/4)^i log2 t)) bits, clamped so the blocks sum to log2 t.
class LoadBalancingHash {
public:
    // Documented bit-budget constant: description_bits() <= kBitBudget * log2(t) * log2(log2(t)).
    static constexpr double kBitBudget = 20.0;

    static LoadBalancingHash sample(RandomTape& tape, uint64_t t) {
        assert(t >= 4 && (t & (t - 1)) == 0);
        int out_bits = ceil_log2(t);
        int level_count = ceil_log2(static_cast<uint64_t>(out_bits)) + 1;
        uint64_t domain = t * t;

        LoadBalancingHash h;
        h.t_ = t;
        int remaining = out_bits;
        uint64_t num = 1, den = 1;  // (3/4)^i and (4/3)^i share these powers
        for (int i = 1; i <= level_count; ++i) {
            num *= 3;
            den *= 4;
            int formula = static_cast<int>((num * static_cast<uint64_t>(out_bits) + den - 1) / den);
            if (formula < 1) formula = 1;
            int bits = formula < remaining ? formula : remaining;
            remaining -= bits;
            int k = static_cast<int>(2 * ((den + num - 1) / num));
            h.levels_.push_back(Level{bits, k, KWiseHash::sample(tape, k, domain, uint64_t{1} << bits)});
        }
        assert(remaining == 0);
        return h;
    }

    uint64_t operator()(uint64_t x) const {
        uint64_t out = 0;
        for (const auto& lv : levels_) out = (out << lv.bits) | lv.h(x);
        return out;
    }

    struct Level {
        int bits;
        int independence;
        KWiseHash h;
    };

    uint64_t range() const { return t_; }
    uint64_t domain() const { return t_ * t_; }
    const std::vector<Level>& levels() const { return levels_; }
    uint64_t description_bits() const {
        uint64_t total = 0;
        for (const auto& lv : levels_) total += lv.h.description_bits();
        return total;
    }

private:
    uint64_t t_ = 0;
    std::vector<Level> levels_;
};

// Universe-reduction hash h(x) = x mod (p_1 ... p_{c^2}) with the p_i drawn
// uniformly (with replacement) from the primes <= floor(n^(2/c)).
class PrimeProductHash {
public:
    static PrimeProductHash sample(RandomTape& tape, uint64_t n, int key_bits, int c) {
        assert(c >= 2);
        check_precondition(n, key_bits, c);
        uint64_t limit = integer_root(static_cast<unsigned __int128>(n) * n, c);
        const auto& pool = enumerate_primes_cached(limit);
        PrimeProductHash h;
        h.bits_per_draw_ = ceil_log2(pool.size());
        for (int i = 0; i < c * c; ++i) h.primes_.push_back(pool[tape.draw_below(pool.size())]);
        h.finish();
        return h;
    }

    static PrimeProductHash from_primes(std::vector<uint64_t> primes) {
        PrimeProductHash h;
        h.primes_ = std::move(primes);
        h.finish();
        return h;
    }

    uint64_t operator()(uint64_t x) const {
        return static_cast<uint64_t>(x % modulus_);
    }

    unsigned __int128 modulus() const { return modulus_; }
    const std::vector<uint64_t>& primes() const { return primes_; }
    uint64_t description_bits() const { return primes_.size() * bits_per_draw_; }

    static void check_precondition(uint64_t n, int key_bits, int c) {
        // requires n > u^c for key width u
        long double pow = 1.0L;
        for (int i = 0; i < c; ++i) pow *= static_cast<long double>(key_bits);
        if (static_cast<long double>(n) <= pow)
            throw std::invalid_argument("prime-product hash: need n > u^c");
    }

    static uint64_t integer_root(unsigned __int128 v, int c) {
        // floor(v^(1/c)) by binary search
        auto pow_leq = [](uint64_t base, int c, unsigned __int128 v) {
            unsigned __int128 acc = 1;
            for (int i = 0; i < c; ++i) {
                if (base != 0 && acc > v / base) return false;
                acc *= base;
            }
            return acc <= v;
        };
        uint64_t lo = 1, hi = uint64_t{1} << 63;
        while (lo < hi) {
            uint64_t mid = lo + (hi - lo + 1) / 2;
            if (pow_leq(mid, c, v)) lo = mid; else hi = mid - 1;
        }
        return lo;
    }

private:
    void finish() {
        modulus_ = 1;
        for (uint64_t p : primes_) modulus_ *= p;
        assert(modulus_ > 1);
    }

    std::vector<uint64_t> primes_;
    unsigned __int128 modulus_ = 1;
    uint64_t bits_per_draw_ = 0;
};

}  // namespace rotrie
