#pragma once

#include <array>
#include <bit>
#include <cassert>
#include <cstdint>
#include <string>
#include <string_view>

namespace rotrie {

// splitmix64 finalizer; full-avalanche 64-bit mixer
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic bit stream with exact consumed-bit accounting.
//
// A tape is identified by a 256-bit seed plus a path of fork labels; two
// tapes with the same (seed, label path) yield the same bit stream no matter
// how the draws are chunked. The stream itself is a keyed counter-mode
// generator: block i is a mix of (key, i), so no state is precomputed and
// draws stay lazy.
class RandomTape {
public:
    static RandomTape from_seed(uint64_t seed) {
        std::array<uint64_t, 4> words{};
        uint64_t s = seed;
        for (auto& w : words) w = mix64(s += 0x9e3779b97f4a7c15ull);
        return RandomTape(words, "");
    }

    static RandomTape from_seed_words(const std::array<uint64_t, 4>& words) {
        return RandomTape(words, "");
    }

    // k uniform bits, 1 <= k <= 64; counter advances by exactly k
    uint64_t draw_bits(int k) {
        assert(k >= 1 && k <= 64);
        uint64_t pos = counter_;
        counter_ += static_cast<uint64_t>(k);
        uint64_t bi = pos >> 6;
        int off = static_cast<int>(pos & 63);
        uint64_t v = block(bi) >> off;
        int have = 64 - off;
        if (have < k) v |= block(bi + 1) << have;
        if (k < 64) v &= (uint64_t{1} << k) - 1;
        return v;
    }

    // Uniform-ish value in [0, bound) from exactly ceil(log2(bound)) bits.
    // Exact for powers of two; otherwise reduced by multiply-shift so the
    // consumed-bit count stays fixed.
    uint64_t draw_below(uint64_t bound) {
        assert(bound >= 1);
        if (bound == 1) return 0;
        int w = 64 - std::countl_zero(bound - 1);
        uint64_t v = draw_bits(w);
        if ((bound & (bound - 1)) == 0) return v;
        return static_cast<uint64_t>((static_cast<unsigned __int128>(v) * bound) >> w);
    }

    RandomTape fork(std::string_view label) const {
        std::string child = label_;
        child += '/';
        child += label;
        return RandomTape(seed_, child);
    }

    RandomTape fork(uint64_t label) const {
        return fork(std::string_view(std::to_string(label)));
    }

    // Fresh tape with the same identity (seed, label path), counter 0.
    RandomTape replay() const { return RandomTape(seed_, label_); }

    uint64_t bits_consumed() const { return counter_; }
    const std::string& label_path() const { return label_; }

private:
    RandomTape(const std::array<uint64_t, 4>& seed, std::string label)
        : seed_(seed), label_(std::move(label)) {
        uint64_t k0 = 0x6a09e667f3bcc909ull;
        uint64_t k1 = 0xbb67ae8584caa73bull;
        for (uint64_t w : seed_) {
            k0 = mix64(k0 ^ w);
            k1 = mix64(k1 + w + 0x9e3779b97f4a7c15ull);
        }
        for (unsigned char ch : label_) {
            k0 = mix64(k0 ^ ch);
            k1 = mix64((k1 << 7 | k1 >> 57) + ch);
        }
        key0_ = k0;
        key1_ = k1;
    }

    uint64_t block(uint64_t i) const {
        return mix64(mix64(key0_ ^ (i * 0x9e3779b97f4a7c15ull)) + key1_);
    }

    std::array<uint64_t, 4> seed_;
    std::string label_;
    uint64_t key0_ = 0;
    uint64_t key1_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace rotrie
