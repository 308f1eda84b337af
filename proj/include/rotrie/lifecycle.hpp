#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "rotrie/random_tape.hpp"
#include "rotrie/trie_common.hpp"

namespace rotrie {

// Phase/rebuild wrapper. Operation sequences are broken into phases of
// 2 * capacity ops; at a phase boundary the live records migrate into a
// fresh instance, a bounded number per operation, and tombstones are dropped
// on the way. Same-capacity rebuilds replay the same tape substream (random
// bits are not redrawn); a resize rebuild forks a substream keyed by the new
// capacity, unless fresh_bits_on_resize is off.
//
// During migration, writes go to the shadow instance, deletes to both, and
// queries consult the shadow before the active instance.
template <class Inner>
class PhasedDict {
public:
    using Factory = std::function<Inner(uint64_t capacity, RandomTape tape)>;

    struct Options {
        uint64_t phase_ops_factor = 2;  // phase length = factor * capacity
        int migrate_per_op = 4;
        bool fresh_bits_on_resize = true;
        uint64_t min_capacity = 16;
    };

    PhasedDict(uint64_t capacity, RandomTape master, Factory factory, Options opt = {})
        : master_(std::move(master)),
          factory_(std::move(factory)),
          opt_(opt),
          capacity_(capacity),
          active_(make_instance(capacity)) {}

    void insert(uint64_t key, uint64_t value) {
        if (!lookup(key)) ++live_;
        if (shadow_) shadow_->insert(key, value);
        else active_.insert(key, value);
        after_op();
    }

    bool erase(uint64_t key) {
        bool hit = false;
        if (shadow_) hit = shadow_->erase(key);
        hit = active_.erase(key) || hit;
        if (hit) --live_;
        after_op();
        return hit;
    }

    std::optional<uint64_t> query(uint64_t key) {
        auto out = lookup(key);
        after_op();
        return out;
    }

    uint64_t live_size() const { return live_; }
    uint64_t capacity() const { return capacity_; }
    bool migrating() const { return shadow_.has_value(); }
    int migration_steps_last_op() const { return last_migration_steps_; }
    uint64_t rebuild_count() const { return rebuilds_; }
    const Inner& active() const { return active_; }

    enum class ResizeEvent { none, rebuild_started };

    // Starts a rebuild when the live size crosses 2x (grow) or 1/4 (shrink)
    // of the capacity at the last rebuild.
    ResizeEvent resize_check() {
        if (shadow_) return ResizeEvent::none;
        if (live_ > 2 * capacity_) {
            start_rebuild(capacity_ * 2);
            return ResizeEvent::rebuild_started;
        }
        if (capacity_ > opt_.min_capacity && live_ < capacity_ / 4) {
            uint64_t halved = std::max(opt_.min_capacity, capacity_ / 2);
            start_rebuild(halved);
            return ResizeEvent::rebuild_started;
        }
        return ResizeEvent::none;
    }

private:
    Inner make_instance(uint64_t capacity) {
        uint64_t label = opt_.fresh_bits_on_resize ? capacity : 0;
        // inner structures get headroom so live <= 2 * capacity stays light
        return factory_(4 * capacity, master_.fork("cap").fork(label));
    }

    std::optional<uint64_t> lookup(uint64_t key) const {
        if (shadow_) {
            if (auto v = shadow_->query(key)) return v;
        }
        return active_.query(key);
    }

    void after_op() {
        ++ops_since_rebuild_;
        last_migration_steps_ = 0;
        if (shadow_) {
            migrate_steps();
        } else if (resize_check() == ResizeEvent::none &&
                   ops_since_rebuild_ >= opt_.phase_ops_factor * capacity_) {
            start_rebuild(capacity_);
        }
    }

    void start_rebuild(uint64_t new_capacity) {
        capacity_ = new_capacity;
        ops_since_rebuild_ = 0;
        ++rebuilds_;
        shadow_.emplace(make_instance(new_capacity));
        cursor_ = 0;
        if (active_.failed()) {
            // slow path: the active instance is already in its failed state,
            // so a full immediate migration is acceptable
            for (const auto& [k, v] : active_.snapshot_live())
                if (!shadow_->query(k)) shadow_->insert(k, v);
            finish_rebuild();
        }
    }

    void migrate_steps() {
        int moved = 0;
        while (moved < opt_.migrate_per_op && cursor_ < active_.record_count()) {
            RecordView rec = active_.record_at(cursor_++);
            if (!rec.live) continue;
            if (!shadow_->query(rec.key)) {
                shadow_->insert(rec.key, rec.value);
                ++moved;
            }
            active_.erase(rec.key);  // each record lives in exactly one instance
        }
        last_migration_steps_ = moved;
        if (cursor_ >= active_.record_count() && moved < opt_.migrate_per_op)
            finish_rebuild();
    }

    void finish_rebuild() {
        active_ = std::move(*shadow_);
        shadow_.reset();
        cursor_ = 0;
    }

    RandomTape master_;
    Factory factory_;
    Options opt_;
    uint64_t capacity_;
    Inner active_;
    std::optional<Inner> shadow_;
    size_t cursor_ = 0;
    uint64_t live_ = 0;
    uint64_t ops_since_rebuild_ = 0;
    uint64_t rebuilds_ = 0;
    int last_migration_steps_ = 0;
};

}  // namespace rotrie
