#pragma once

#include <cassert>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace rotrie {

enum class OpStatus {
    ok,
    failed_bin_overflow,  // a bin/proxy dictionary rejected an insert
    failed_alloc,         // node allocator exhausted its budget
    failed_collision,     // large-universe wrapper: hash collision between live keys
    space_failure,        // amplified trie: overflow count reached its space bound
};

struct LeafRecord {
    uint64_t key;
    uint64_t value;
    bool tombstone;
};

struct RecordView {
    uint64_t key;
    uint64_t value;
    bool live;
};

// Fixed-width digit decomposition of a key, most significant digit first.
struct DigitPath {
    int depth;
    int digit_bits;

    static DigitPath for_keys(int key_bits, int digit_bits) {
        assert(digit_bits >= 1 && key_bits >= 1);
        return DigitPath{(key_bits + digit_bits - 1) / digit_bits, digit_bits};
    }

    uint64_t digit(uint64_t key, int t) const {
        int shift = (depth - 1 - t) * digit_bits;
        return (key >> shift) & ((uint64_t{1} << digit_bits) - 1);
    }
};

// Post-failure op log; keeps answers correct once a structure has failed.
struct SideLog {
    struct Entry {
        uint64_t key;
        uint64_t value;
        bool is_delete;
    };
    std::vector<Entry> entries;

    // latest op on `key`, if any: value or tombstone
    std::optional<std::optional<uint64_t>> lookup(uint64_t key) const {
        for (size_t i = entries.size(); i-- > 0;) {
            if (entries[i].key == key) {
                if (entries[i].is_delete) return std::optional<uint64_t>{};
                return std::optional<uint64_t>{entries[i].value};
            }
        }
        return std::nullopt;
    }
};

}  // namespace rotrie
