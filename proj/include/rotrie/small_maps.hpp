#pragma once

#include <bit>
#include <cassert>
#include <cstdint>
#include <memory>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "rotrie/instrument.hpp"
#include "rotrie/random_tape.hpp"

namespace rotrie {

// Default bin/proxy capacity: ceil(log2(n))^2.
inline uint32_t default_bin_capacity(uint64_t n) {
    uint64_t lg = (n <= 1) ? 1 : static_cast<uint64_t>(std::bit_width(n - 1));
    return static_cast<uint32_t>(lg * lg);
}

// Bounded flat dictionary of up to `capacity` word-sized key/value pairs.
// Stands in for a constant-time small dictionary; at these capacities a
// linear scan over a flat buffer is the whole implementation.
class BoundedDict {
public:
    enum class Insert { ok, overflow };

    explicit BoundedDict(uint32_t capacity) : cap_(capacity) {}

    Insert insert(uint64_t key, uint64_t value) {
        for (auto& e : kv_) {
            if (e.first == key) {
                e.second = value;
                return Insert::ok;
            }
        }
        if (kv_.size() >= cap_) return Insert::overflow;
        kv_.emplace_back(key, value);
        return Insert::ok;
    }

    std::optional<uint64_t> query(uint64_t key) const {
        for (const auto& e : kv_)
            if (e.first == key) return e.second;
        return std::nullopt;
    }

    bool erase(uint64_t key) {
        for (size_t i = 0; i < kv_.size(); ++i) {
            if (kv_[i].first == key) {
                kv_[i] = kv_.back();
                kv_.pop_back();
                return true;
            }
        }
        return false;
    }

    uint32_t size() const { return static_cast<uint32_t>(kv_.size()); }
    uint32_t capacity() const { return cap_; }
    bool full() const { return kv_.size() >= cap_; }
    const std::vector<std::pair<uint64_t, uint64_t>>& entries() const { return kv_; }

private:
    uint32_t cap_;
    std::vector<std::pair<uint64_t, uint64_t>> kv_;
};

// Array with O(1)-write construction via the back-reference trick: a slot i
// is initialized iff when_[i] < top_ and stack_[when_[i]] == i, which holds
// only for slots that went through set(). The backing storage is allocated
// uninitialized and never bulk-filled.
template <class T>
class LazyArray {
    static_assert(std::is_trivially_copyable_v<T>);

public:
    LazyArray(size_t capacity, T default_value)
        : cap_(capacity),
          def_(default_value),
          value_(std::make_unique_for_overwrite<T[]>(capacity)),
          when_(std::make_unique_for_overwrite<size_t[]>(capacity)),
          stack_(std::make_unique_for_overwrite<size_t[]>(capacity)) {
        instrument::count_writes(6);  // members of this object, independent of cap
    }

    T get(size_t i) const {
        assert(i < cap_);
        return initialized(i) ? value_[i] : def_;
    }

    void set(size_t i, T v) {
        assert(i < cap_);
        if (!initialized(i)) {
            when_[i] = top_;
            stack_[top_] = i;
            ++top_;
            instrument::count_writes(3);
        }
        value_[i] = v;
        instrument::count_writes(1);
    }

    size_t capacity() const { return cap_; }
    size_t initialized_count() const { return top_; }

    // Test hook: overwrite the raw backing (not the bookkeeping fields of
    // this object) with garbage, as an adversarially pre-filled allocation.
    void debug_poison(uint64_t seed) {
        uint64_t s = seed;
        for (size_t i = 0; i < cap_; ++i) {
            s = mix64(s + 0x9e3779b97f4a7c15ull);
            when_[i] = static_cast<size_t>(s);
            unsigned char junk[sizeof(T)];
            for (size_t b = 0; b < sizeof(T); ++b) junk[b] = static_cast<unsigned char>(s >> (8 * (b % 8)));
            __builtin_memcpy(&value_[i], junk, sizeof(T));
        }
        // stack_ entries below top_ stay valid; everything above is garbage anyway
        for (size_t i = top_; i < cap_; ++i) {
            s = mix64(s ^ i);
            stack_[i] = static_cast<size_t>(s);
        }
    }

private:
    bool initialized(size_t i) const {
        size_t w = when_[i];
        return w < top_ && stack_[w] == i;
    }

    size_t cap_;
    T def_;
    std::unique_ptr<T[]> value_;
    std::unique_ptr<size_t[]> when_;
    std::unique_ptr<size_t[]> stack_;
    size_t top_ = 0;
};

}  // namespace rotrie
