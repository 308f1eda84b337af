#pragma once

#include <cstdint>

namespace rotrie::instrument {

// Word-write counter for the data plane (bins, node tables, stores).
// Constant-time-initialization claims are checked by snapshotting this
// around construction. Hash-family coefficient storage is out of scope.
inline thread_local uint64_t data_writes = 0;

inline void count_writes(uint64_t n = 1) { data_writes += n; }
inline uint64_t writes() { return data_writes; }

}  // namespace rotrie::instrument
