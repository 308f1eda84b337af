#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "rotrie/random_tape.hpp"
#include "rotrie/small_maps.hpp"
#include "rotrie/trie_common.hpp"
#include "rotrie/rotated_trie.hpp"

namespace rotrie {

// Plain (non-rotated) f-ary trie holding the residual digit paths of
// overflow balls, keyed by (source node, digits from the overflow point).
// Leaves hold indices into the owner's record store.
class OverflowTrie {
public:
    explicit OverflowTrie(uint64_t fanout) : fanout_(fanout) {}

    // Walks/creates the path; returns the leaf slot and counts new edges.
    uint64_t* ensure_path(uint64_t source, const uint64_t* digits, int count,
                          uint64_t& new_edges) {
        int64_t* slot = root_slot(source);
        for (int i = 0; i < count - 1; ++i) {
            if (*slot < 0) {
                nodes_.emplace_back(fanout_, int64_t{-1});
                *slot = static_cast<int64_t>(nodes_.size() - 1);
                ++new_edges;
            }
            slot = &nodes_[static_cast<size_t>(*slot)][digits[i]];
        }
        if (*slot < 0) ++new_edges;  // leaf edge about to be set by caller
        return reinterpret_cast<uint64_t*>(slot);
    }

    // Leaf payload for (source, digits), if the full path exists.
    std::optional<uint64_t> find(uint64_t source, const uint64_t* digits, int count,
                                 uint64_t& probes) const {
        auto it = roots_.find(source);
        if (it == roots_.end()) return std::nullopt;
        int64_t slot = it->second;
        for (int i = 0; i < count - 1; ++i) {
            ++probes;
            if (slot < 0) return std::nullopt;
            slot = nodes_[static_cast<size_t>(slot)][digits[i]];
        }
        ++probes;
        if (slot < 0) return std::nullopt;
        return static_cast<uint64_t>(slot);
    }

    size_t node_count() const { return nodes_.size(); }

private:
    int64_t* root_slot(uint64_t source) {
        auto [it, fresh] = roots_.try_emplace(source, int64_t{-1});
        return &it->second;
    }

    uint64_t fanout_;
    std::unordered_map<uint64_t, int64_t> roots_;
    std::deque<std::vector<int64_t>> nodes_;
};

// Rotated trie with fanout n^(eps/5), spilling bin overflows into a plain
// overflow trie Q. A query falls through to Q exactly when it misses at a
// full bin; a ball is diverted to Q only when its bin was full, so the rule
// is sound. Once q (the overflow-ball count) reaches n / fanout, the
// space-failure flag latches; answers stay correct.
class AmplifiedTrie {
public:
    AmplifiedTrie(uint64_t n, double eps, int key_bits, RandomTape tape,
                  uint32_t bin_capacity = 0)
        : n_(n),
          fanout_(fanout_for(n, eps)),
          path_(DigitPath::for_keys(key_bits, ceil_log2(fanout_for(n, eps)))),
          ell_(bin_capacity ? bin_capacity : default_bin_capacity(n)),
          overflow_threshold_(n / fanout_for(n, eps)),
          tape_(std::move(tape)),
          bins_(n, 0),
          q_trie_(fanout_for(n, eps)),
          node_budget_(2 * static_cast<uint64_t>(path_.depth) * n + 16) {
        assert((n & (n - 1)) == 0);
        nodes_.push_back(Node{0, false});
        instrument::count_writes(2);
    }

    static uint64_t fanout_for(uint64_t n, double eps) {
        assert(eps > 0.0 && eps <= 1.0);
        int lg = ceil_log2(n);
        int fbits = static_cast<int>(std::ceil(eps / 5.0 * lg - 1e-9));
        if (fbits < 1) fbits = 1;
        return uint64_t{1} << fbits;
    }

    OpStatus insert(uint64_t key, uint64_t value) {
        if (failed_) return log_insert(key, value);
        uint64_t cur = 0;
        uint64_t digits[64];
        for (int t = 0; t < path_.depth; ++t) digits[t] = path_.digit(key, t);
        for (int t = 0; t < path_.depth; ++t) {
            BoundedDict& bin = bin_for(cur, digits[t]);
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
            if (bin.full()) return divert_to_q(cur, digits + t, path_.depth - t, key, value);
            if (leaf_level) {
                records_.push_back(LeafRecord{key, value, false});
                bin.insert(cur, encode_leaf(records_.size() - 1));
                note_ball(bin);
                ++live_;
                return OpStatus::ok;
            }
            if (nodes_.size() >= node_budget_)
                return fail(OpStatus::failed_alloc, key, value);
            nodes_.push_back(Node{0, false});
            uint64_t child = nodes_.size() - 1;
            bin.insert(cur, encode_child(child));
            note_ball(bin);
            cur = child;
        }
        return OpStatus::ok;
    }

    std::optional<uint64_t> query(uint64_t key) const {
        if (failed_) {
            if (auto logged = log_.lookup(key)) return *logged;
        }
        uint64_t cur = 0;
        uint64_t digits[64];
        for (int t = 0; t < path_.depth; ++t) digits[t] = path_.digit(key, t);
        for (int t = 0; t < path_.depth; ++t) {
            const BoundedDict* bin = peek_bin(cur, digits[t]);
            ++probes_;
            auto pv = bin ? bin->query(cur) : std::nullopt;
            if (!pv) {
                if (bin && bin->full()) {
                    auto loc = q_trie_.find(cur, digits + t, path_.depth - t, probes_);
                    if (!loc) return std::nullopt;
                    const LeafRecord& rec = records_[*loc];
                    return rec.tombstone ? std::nullopt : std::optional<uint64_t>(rec.value);
                }
                return std::nullopt;
            }
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
        LeafRecord* rec = locate(key);
        if (!rec || rec->tombstone) return false;
        rec->tombstone = true;
        --live_;
        return true;
    }

    uint64_t overflow_count() const { return q_; }
    bool space_failed() const { return space_failed_; }
    uint64_t overflow_threshold() const { return overflow_threshold_; }
    uint64_t fanout() const { return fanout_; }
    uint64_t max_load() const { return max_load_; }
    uint64_t ball_count() const { return balls_; }
    bool failed() const { return failed_; }
    uint64_t live_size() const { return live_; }
    uint64_t bits_consumed() const { return tape_.bits_consumed(); }
    uint64_t total_probes() const { return probes_; }

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

    // Audit: every live key resolves through exactly one of base path or Q.
    bool audit_paths() const {
        for (const auto& r : records_) {
            if (r.tombstone) continue;
            bool base = false, via_q = false;
            resolve_kind(r.key, base, via_q);
            if (base == via_q) return false;
        }
        return true;
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

    const BoundedDict* peek_bin(uint64_t node, uint64_t c) const {
        const Node& nd = nodes_[node];
        if (!nd.rotation_drawn) return nullptr;
        uint64_t slot = bins_.get(phi(nd.rotation, c, n_));
        return slot == 0 ? nullptr : &dicts_[slot - 1];
    }

    OpStatus divert_to_q(uint64_t source, const uint64_t* digits, int count,
                         uint64_t key, uint64_t value) {
        uint64_t new_edges = 0;
        uint64_t* leaf = q_trie_.ensure_path(source, digits, count, new_edges);
        probes_ += static_cast<uint64_t>(count);
        int64_t slot = static_cast<int64_t>(*leaf);
        if (slot >= 0) {
            LeafRecord& rec = records_[static_cast<uint64_t>(slot)];
            if (rec.tombstone) ++live_;
            rec.value = value;
            rec.tombstone = false;
        } else {
            records_.push_back(LeafRecord{key, value, false});
            *leaf = records_.size() - 1;
            ++live_;
        }
        q_ += new_edges;
        if (q_ >= overflow_threshold_) space_failed_ = true;
        return space_failed_ ? OpStatus::space_failure : OpStatus::ok;
    }

    LeafRecord* locate(uint64_t key) {
        uint64_t cur = 0;
        uint64_t digits[64];
        for (int t = 0; t < path_.depth; ++t) digits[t] = path_.digit(key, t);
        for (int t = 0; t < path_.depth; ++t) {
            const BoundedDict* bin = peek_bin(cur, digits[t]);
            ++probes_;
            auto pv = bin ? bin->query(cur) : std::nullopt;
            if (!pv) {
                if (bin && bin->full()) {
                    auto loc = q_trie_.find(cur, digits + t, path_.depth - t, probes_);
                    if (loc) return &records_[*loc];
                }
                return nullptr;
            }
            if (t == path_.depth - 1) return &records_[decode_index(*pv)];
            cur = decode_index(*pv);
        }
        return nullptr;
    }

    void resolve_kind(uint64_t key, bool& base, bool& via_q) const {
        uint64_t cur = 0;
        uint64_t digits[64];
        for (int t = 0; t < path_.depth; ++t) digits[t] = path_.digit(key, t);
        for (int t = 0; t < path_.depth; ++t) {
            const BoundedDict* bin = peek_bin(cur, digits[t]);
            auto pv = bin ? bin->query(cur) : std::nullopt;
            if (!pv) {
                if (bin && bin->full()) {
                    uint64_t scratch = 0;
                    auto loc = q_trie_.find(cur, digits + t, path_.depth - t, scratch);
                    via_q = loc && !records_[*loc].tombstone;
                }
                return;
            }
            if (t == path_.depth - 1) {
                base = !records_[decode_index(*pv)].tombstone;
                return;
            }
            cur = decode_index(*pv);
        }
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
    uint64_t overflow_threshold_;
    RandomTape tape_;
    LazyArray<uint64_t> bins_;
    std::deque<BoundedDict> dicts_;
    std::vector<Node> nodes_;
    std::deque<LeafRecord> records_;
    OverflowTrie q_trie_;
    uint64_t node_budget_;
    uint64_t q_ = 0;
    uint64_t balls_ = 0;
    uint64_t max_load_ = 0;
    uint64_t live_ = 0;
    bool failed_ = false;
    bool space_failed_ = false;
    OpStatus failure_ = OpStatus::ok;
    SideLog log_;
    mutable uint64_t probes_ = 0;
};

}  // namespace rotrie
