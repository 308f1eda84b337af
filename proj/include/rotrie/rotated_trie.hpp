#pragma once

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "rotrie/random_tape.hpp"
#include "rotrie/small_maps.hpp"
#include "rotrie/trie_common.hpp"

namespace rotrie {

// Ball-to-bin map of the rotated trie: ball (s, c) lands in bin (c + r_s) mod n.
inline uint64_t phi(uint64_t rotation, uint64_t child_index, uint64_t n) {
    assert((n & (n - 1)) == 0);
    return (child_index + rotation) & (n - 1);
}

// f-ary radix trie whose per-node arrays are randomly rotated and overlaid
// into a single array of n bins, each bin a BoundedDict keyed by source node
// id. Rotations are drawn lazily, one per node, on the node's first ball.
//
// Correctness survives a bin overflow: the trie latches a failed flag and
// routes subsequent writes through a side log (the timeliness guarantee is
// what is lost, matching the failure model).
class RotatedTrie {
public:
    RotatedTrie(uint64_t n, uint64_t fanout, int key_bits, RandomTape tape,
                uint32_t bin_capacity = 0)
        : n_(n),
          fanout_(fanout),
          path_(DigitPath::for_keys(key_bits, ceil_log2(fanout))),
          ell_(bin_capacity ? bin_capacity : default_bin_capacity(n)),
          tape_(std::move(tape)),
          bins_(n, 0),
          node_budget_(2 * static_cast<uint64_t>(path_.depth) * n + 16) {
        assert((n & (n - 1)) == 0 && (fanout & (fanout - 1)) == 0 && fanout <= n);
        nodes_.push_back(Node{0, false});  // root
        instrument::count_writes(2);
    }

    OpStatus insert(uint64_t key, uint64_t value) {
        if (failed_) return log_insert(key, value);
        uint64_t cur = 0;
        for (int t = 0; t < path_.depth; ++t) {
            uint64_t c = path_.digit(key, t);
            BoundedDict& bin = bin_for(cur, c);
            ++probes_;
            auto pv = bin.query(cur);
            bool leaf_level = (t == path_.depth - 1);
            if (pv) {
                if (leaf_level) {
                    LeafRecord& rec = records_[decode_index(*pv)];
                    if (rec.tombstone) ++live_;
                    rec.value = value;
                    rec.tombstone = false;
                    return OpStatus::ok;
                }
                cur = decode_index(*pv);
                continue;
            }
            if (leaf_level) {
                records_.push_back(LeafRecord{key, value, false});
                if (bin.insert(cur, encode_leaf(records_.size() - 1)) == BoundedDict::Insert::overflow) {
                    records_.pop_back();
                    return fail(OpStatus::failed_bin_overflow, key, value);
                }
                note_ball(bin);
                ++live_;
                return OpStatus::ok;
            }
            if (nodes_.size() >= node_budget_)
                return fail(OpStatus::failed_alloc, key, value);
            nodes_.push_back(Node{0, false});
            uint64_t child = nodes_.size() - 1;
            if (bin.insert(cur, encode_child(child)) == BoundedDict::Insert::overflow) {
                nodes_.pop_back();
                return fail(OpStatus::failed_bin_overflow, key, value);
            }
            note_ball(bin);
            cur = child;
        }
        return OpStatus::ok;  // unreachable
    }

    std::optional<uint64_t> query(uint64_t key) const {
        if (failed_) {
            if (auto logged = log_.lookup(key)) return *logged;
        }
        uint64_t cur = 0;
        for (int t = 0; t < path_.depth; ++t) {
            if (!nodes_[cur].rotation_drawn) return std::nullopt;
            uint64_t j = phi(nodes_[cur].rotation, path_.digit(key, t), n_);
            uint64_t slot = bins_.get(j);
            if (slot == 0) return std::nullopt;
            ++probes_;
            auto pv = dicts_[slot - 1].query(cur);
            if (!pv) return std::nullopt;
            if (t == path_.depth - 1) {
                const LeafRecord& rec = records_[decode_index(*pv)];
                return rec.tombstone ? std::nullopt : std::optional<uint64_t>(rec.value);
            }
            cur = decode_index(*pv);
        }
        return std::nullopt;
    }

    bool erase(uint64_t key) {
        if (failed_) {
            if (!query(key)) return false;
            log_.entries.push_back({key, 0, true});
            --live_;
            return true;
        }
        uint64_t cur = 0;
        for (int t = 0; t < path_.depth; ++t) {
            if (!nodes_[cur].rotation_drawn) return false;
            uint64_t j = phi(nodes_[cur].rotation, path_.digit(key, t), n_);
            uint64_t slot = bins_.get(j);
            if (slot == 0) return false;
            ++probes_;
            auto pv = dicts_[slot - 1].query(cur);
            if (!pv) return false;
            if (t == path_.depth - 1) {
                LeafRecord& rec = records_[decode_index(*pv)];
                if (rec.tombstone) return false;
                rec.tombstone = true;
                --live_;
                return true;
            }
            cur = decode_index(*pv);
        }
        return false;
    }

    uint64_t max_load() const { return max_load_; }
    uint64_t ball_count() const { return balls_; }
    uint64_t bin_load(uint64_t j) const {
        uint64_t slot = bins_.get(j);
        return slot == 0 ? 0 : dicts_[slot - 1].size();
    }
    bool failed() const { return failed_; }
    OpStatus failure() const { return failure_; }
    uint64_t live_size() const { return live_; }
    uint64_t bits_consumed() const { return tape_.bits_consumed(); }
    uint64_t total_probes() const { return probes_; }
    uint64_t node_count() const { return nodes_.size(); }

    size_t record_count() const { return records_.size(); }
    RecordView record_at(size_t i) const {
        const LeafRecord& r = records_[i];
        return RecordView{r.key, r.value, !r.tombstone};
    }

    std::vector<std::pair<uint64_t, uint64_t>> snapshot_live() const {
        std::unordered_map<uint64_t, std::optional<uint64_t>> state;
        for (const auto& r : records_)
            if (!r.tombstone) state[r.key] = r.value;
        for (const auto& e : log_.entries) {
            if (e.is_delete) state[e.key] = std::nullopt;
            else state[e.key] = e.value;
        }
        std::vector<std::pair<uint64_t, uint64_t>> out;
        for (const auto& [k, v] : state)
            if (v) out.emplace_back(k, *v);
        return out;
    }

private:
    struct Node {
        uint64_t rotation;
        bool rotation_drawn;
    };

    static uint64_t encode_leaf(uint64_t idx) { return (idx << 2) | 1; }
    static uint64_t encode_child(uint64_t idx) { return (idx << 2) | 2; }
    static uint64_t decode_index(uint64_t payload) { return payload >> 2; }

    BoundedDict& bin_for(uint64_t node, uint64_t c) {
        Node& nd = nodes_[node];
        if (!nd.rotation_drawn) {
            nd.rotation = tape_.draw_below(n_);
            nd.rotation_drawn = true;
        }
        uint64_t j = phi(nd.rotation, c, n_);
        uint64_t slot = bins_.get(j);
        if (slot == 0) {
            dicts_.emplace_back(ell_);
            bins_.set(j, dicts_.size());
            slot = dicts_.size();
        }
        return dicts_[slot - 1];
    }

    void note_ball(const BoundedDict& bin) {
        ++balls_;
        max_load_ = std::max<uint64_t>(max_load_, bin.size());
    }

    OpStatus fail(OpStatus why, uint64_t key, uint64_t value) {
        failed_ = true;
        failure_ = why;
        log_insert(key, value);
        return why;
    }

    OpStatus log_insert(uint64_t key, uint64_t value) {
        if (!query(key)) ++live_;
        log_.entries.push_back({key, value, false});
        return failure_;
    }

    uint64_t n_;
    uint64_t fanout_;
    DigitPath path_;
    uint32_t ell_;
    RandomTape tape_;
    LazyArray<uint64_t> bins_;  // bin index -> dict slot + 1
    std::deque<BoundedDict> dicts_;
    std::vector<Node> nodes_;
    std::deque<LeafRecord> records_;
    uint64_t node_budget_;
    uint64_t balls_ = 0;
    uint64_t max_load_ = 0;
    uint64_t live_ = 0;
    bool failed_ = false;
    OpStatus failure_ = OpStatus::ok;
    SideLog log_;
    mutable uint64_t probes_ = 0;
};

}  // namespace rotrie
