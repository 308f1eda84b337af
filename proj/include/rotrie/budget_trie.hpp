#pragma once

#include <algorithm>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "rotrie/hash_kit.hpp"
#include "rotrie/random_tape.hpp"
#include "rotrie/small_maps.hpp"
#include "rotrie/trie_common.hpp"

namespace rotrie {

// Ball-to-bin map of the budget trie: ball (s, c) goes to group
// (c + a_s) mod f, bin b_s within the group.
inline uint64_t psi(uint64_t a_s, uint64_t b_s, uint64_t c, uint64_t n, uint64_t f) {
    assert((n & (n - 1)) == 0 && (f & (f - 1)) == 0);
    return ((c + a_s) & (f - 1)) * (n / f) + b_s;
}

// Rotated trie variant with fanout n^(1/4) whose entire random-bit budget is
// two hash functions drawn up front: a_i = g(i) from a k-independent family
// and b_i = h(i) from the gradually-increasing-independence family. Child
// subtrees live in capacity-ell proxy dictionaries until they accumulate ell
// keys; the insert that would exceed the proxy materializes a real node and
// routes downward, with the proxy's contents staying put (the Dual state).
class BudgetTrie {
public:
    // Documented constant: bits_used() <= kBitsConstant * log2(n) * log2(log2(n)).
    static constexpr double kBitsConstant = 16.0;

    struct MaterializeEvent {
        uint64_t node;
        uint32_t proxy_entries;
    };

    BudgetTrie(uint64_t n, int key_bits, RandomTape tape, uint32_t bin_capacity = 0,
               int k_independence = 8)
        : n_(n),
          fanout_(fanout_for(n)),
          group_size_(n / fanout_for(n)),
          path_(DigitPath::for_keys(key_bits, ceil_log2(fanout_for(n)))),
          ell_(bin_capacity ? bin_capacity : default_bin_capacity(n)),
          bins_(n, 0) {
        assert(n >= 16 && (n & (n - 1)) == 0);
        RandomTape gt = tape.fork("g");
        RandomTape ht = tape.fork("h");
        g_ = KWiseHash::sample(gt, k_independence, n, fanout_);
        h_ = LoadBalancingHash::sample(ht, group_size_);
        uint64_t per_node = std::max<uint64_t>(ell_, 1);
        node_budget_ = std::min<uint64_t>(
            n, 4 * static_cast<uint64_t>(path_.depth) * n / per_node + 8);
        nodes_.push_back(Node{(*g_)(0), (*h_)(0)});  // root
        instrument::count_writes(2);
    }

    static uint64_t fanout_for(uint64_t n) {
        int lg = ceil_log2(n);
        return uint64_t{1} << ((lg + 3) / 4);
    }

    OpStatus insert(uint64_t key, uint64_t value) { return insert_impl(key, value, false); }

    // Rejecting variant: on failure the key is not stored and the failed
    // flag stays clear, so the structure continues as though the insertion
    // never happened.
    OpStatus insert_strict(uint64_t key, uint64_t value) { return insert_impl(key, value, true); }

    std::optional<uint64_t> query(uint64_t key) const {
        if (failed_) {
            if (auto logged = log_.lookup(key)) return *logged;
        }
        const LeafRecord* rec = locate(key);
        if (!rec || rec->tombstone) return std::nullopt;
        return rec->value;
    }

    bool erase(uint64_t key) {
        if (failed_) {
            if (!query(key)) return false;
            log_.entries.push_back({key, 0, true});
            --live_;
            return true;
        }
        LeafRecord* rec = const_cast<LeafRecord*>(locate(key));
        if (!rec || rec->tombstone) return false;
        rec->tombstone = true;
        --live_;
        return true;
    }

    uint64_t bits_used() const { return g_->description_bits() + h_->description_bits(); }
    uint64_t fanout() const { return fanout_; }
    uint64_t group_size() const { return group_size_; }
    uint64_t max_load() const { return max_load_; }
    uint64_t ball_count() const { return balls_; }
    uint64_t live_size() const { return live_; }
    bool failed() const { return failed_; }
    OpStatus failure() const { return failure_; }
    uint64_t total_probes() const { return probes_; }
    size_t node_count() const { return nodes_.size(); }
    const std::vector<MaterializeEvent>& materialize_events() const { return events_; }

    std::vector<uint64_t> group_census() const {
        std::vector<uint64_t> census(fanout_, 0);
        for (size_t i = 0; i < dicts_.size(); ++i)
            census[dict_bins_[i] / group_size_] += dicts_[i].size();
        return census;
    }

    // A materialized node contributes at most one ball per group.
    bool audit_one_ball_per_group() const {
        std::unordered_set<uint64_t> seen;
        for (size_t i = 0; i < dicts_.size(); ++i) {
            uint64_t group = dict_bins_[i] / group_size_;
            for (const auto& e : dicts_[i].entries())
                if (!seen.insert(group * n_ + e.first).second) return false;
        }
        return true;
    }

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

    // Logical content bits: every stored field at its natural width. The
    // lazily initialized backing arrays reserve address space but hold no
    // information until written, so only touched entries are counted.
    uint64_t space_bits(int key_bits, int value_bits) const {
        uint64_t lg = static_cast<uint64_t>(ceil_log2(n_));
        uint64_t bits = 0;
        bits += records_.size() * static_cast<uint64_t>(key_bits + value_bits + 1);
        for (const auto& d : dicts_) bits += d.size() * (3 * lg + 2);
        for (const auto& z : proxies_) bits += z.size() * static_cast<uint64_t>(key_bits + lg);
        bits += nodes_.size() * lg;
        bits += 24 * 64;  // fixed header fields
        return bits;
    }

private:
    struct Node {
        uint64_t a;
        uint64_t b;
    };

    static constexpr uint64_t kLeaf = 1, kProxy = 2, kDual = 3;
    static uint64_t encode_leaf(uint64_t idx) { return (idx << 2) | kLeaf; }
    static uint64_t encode_proxy(uint64_t pid) { return (pid << 2) | kProxy; }
    static uint64_t encode_dual(uint64_t pid, uint64_t child) {
        return (((child << 30) | pid) << 2) | kDual;
    }
    static uint64_t decode_proxy(uint64_t payload) {
        return (payload >> 2) & ((uint64_t{1} << 30) - 1);
    }
    static uint64_t decode_dual_child(uint64_t payload) { return payload >> 32; }

    OpStatus insert_impl(uint64_t key, uint64_t value, bool strict) {
        if (failed_) return log_insert(key, value);
        uint64_t cur = 0;
        for (int t = 0; t < path_.depth; ++t) {
            uint64_t c = path_.digit(key, t);
            uint64_t j = psi(nodes_[cur].a, nodes_[cur].b, c, n_, fanout_);
            BoundedDict& bin = bin_at(j);
            ++probes_;
            auto pv = bin.query(cur);
            bool leaf_level = (t == path_.depth - 1);
            if (!pv) {
                if (leaf_level) {
                    records_.push_back(LeafRecord{key, value, false});
                    if (bin.insert(cur, encode_leaf(records_.size() - 1)) ==
                        BoundedDict::Insert::overflow) {
                        records_.pop_back();
                        return reject(OpStatus::failed_bin_overflow, key, value, strict);
                    }
                    note_ball(bin);
                    ++live_;
                    return OpStatus::ok;
                }
                if (bin.full()) return reject(OpStatus::failed_bin_overflow, key, value, strict);
                proxies_.emplace_back(ell_);
                uint64_t pid = proxies_.size() - 1;
                records_.push_back(LeafRecord{key, value, false});
                proxies_[pid].insert(key, records_.size() - 1);
                ++probes_;
                bin.insert(cur, encode_proxy(pid));
                note_ball(bin);
                ++live_;
                return OpStatus::ok;
            }
            uint64_t tag = *pv & 3;
            if (tag == kLeaf) {
                LeafRecord& rec = records_[*pv >> 2];
                if (rec.tombstone) ++live_;
                rec.value = value;
                rec.tombstone = false;
                return OpStatus::ok;
            }
            uint64_t pid = decode_proxy(*pv);
            BoundedDict& z = proxies_[pid];
            ++probes_;
            if (auto loc = z.query(key)) {
                LeafRecord& rec = records_[*loc];
                if (rec.tombstone) ++live_;
                rec.value = value;
                rec.tombstone = false;
                return OpStatus::ok;
            }
            if (tag == kProxy) {
                if (!z.full()) {
                    records_.push_back(LeafRecord{key, value, false});
                    z.insert(key, records_.size() - 1);
                    ++live_;
                    return OpStatus::ok;
                }
                // proxy holds exactly ell entries: materialize the child node
                if (nodes_.size() >= node_budget_)
                    return reject(OpStatus::failed_alloc, key, value, strict);
                nodes_.push_back(Node{(*g_)(nodes_.size()), (*h_)(nodes_.size())});
                uint64_t child = nodes_.size() - 1;
                events_.push_back(MaterializeEvent{child, z.size()});
                bin.insert(cur, encode_dual(pid, child));
                cur = child;
                continue;
            }
            cur = decode_dual_child(*pv);  // Dual: proxy missed, descend
        }
        return OpStatus::ok;
    }

    OpStatus reject(OpStatus why, uint64_t key, uint64_t value, bool strict) {
        if (strict) return why;
        return fail(why, key, value);
    }

    BoundedDict& bin_at(uint64_t j) {
        uint64_t slot = bins_.get(j);
        if (slot == 0) {
            dicts_.emplace_back(ell_);
            dict_bins_.push_back(j);
            bins_.set(j, dicts_.size());
            slot = dicts_.size();
        }
        return dicts_[slot - 1];
    }

    const LeafRecord* locate(uint64_t key) const {
        uint64_t cur = 0;
        for (int t = 0; t < path_.depth; ++t) {
            uint64_t c = path_.digit(key, t);
            uint64_t j = psi(nodes_[cur].a, nodes_[cur].b, c, n_, fanout_);
            uint64_t slot = bins_.get(j);
            if (slot == 0) return nullptr;
            ++probes_;
            auto pv = dicts_[slot - 1].query(cur);
            if (!pv) return nullptr;
            uint64_t tag = *pv & 3;
            if (tag == kLeaf) return &records_[*pv >> 2];
            ++probes_;
            if (auto loc = proxies_[decode_proxy(*pv)].query(key)) return &records_[*loc];
            if (tag == kProxy) return nullptr;
            cur = decode_dual_child(*pv);
        }
        return nullptr;
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
    uint64_t group_size_;
    DigitPath path_;
    uint32_t ell_;
    LazyArray<uint64_t> bins_;
    std::optional<KWiseHash> g_;
    std::optional<LoadBalancingHash> h_;
    std::deque<BoundedDict> dicts_;
    std::vector<uint64_t> dict_bins_;
    std::deque<BoundedDict> proxies_;
    std::vector<Node> nodes_;
    std::deque<LeafRecord> records_;
    std::vector<MaterializeEvent> events_;
    uint64_t node_budget_;
    uint64_t balls_ = 0;
    uint64_t max_load_ = 0;
    uint64_t live_ = 0;
    bool failed_ = false;
    OpStatus failure_ = OpStatus::ok;
    SideLog log_;
    mutable uint64_t probes_ = 0;
};

// Large-universe front end: keys of up to 64 bits are reduced by a
// prime-product hash; the inner budget trie maps the hashed key to a record
// holding the full key, which every answer verifies. A hash collision
// between distinct live keys is the (latched) failure mode; answers stay
// correct through the side log.
class BudgetTrieLargeU {
public:
    BudgetTrieLargeU(uint64_t n, int key_bits, int c, const RandomTape& tape)
        : hash_(sample_hash(n, key_bits, c, tape)),
          inner_(n, inner_key_bits(hash_), tape.fork("trie")) {}

    BudgetTrieLargeU(PrimeProductHash hash, uint64_t n, const RandomTape& tape)
        : hash_(std::move(hash)),
          inner_(n, inner_key_bits(hash_), tape.fork("trie")) {}

    OpStatus insert(uint64_t key, uint64_t value) {
        if (failed_) return log_insert(key, value);
        uint64_t hx = hash_(key);
        ++probes_;
        if (auto idx = inner_.query(hx)) {
            LeafRecord& rec = records_[*idx];
            if (rec.key == key) {
                if (rec.tombstone) ++live_;
                rec.value = value;
                rec.tombstone = false;
                return OpStatus::ok;
            }
            if (rec.tombstone) {
                rec = LeafRecord{key, value, false};
                ++live_;
                return OpStatus::ok;
            }
            return fail(key, value);  // live collision
        }
        records_.push_back(LeafRecord{key, value, false});
        OpStatus st = inner_.insert(hx, records_.size() - 1);
        ++live_;
        return st;
    }

    std::optional<uint64_t> query(uint64_t key) const {
        if (failed_) {
            if (auto logged = log_.lookup(key)) return *logged;
        }
        ++probes_;
        auto idx = inner_.query(hash_(key));
        if (!idx) return std::nullopt;
        const LeafRecord& rec = records_[*idx];
        if (rec.key != key || rec.tombstone) return std::nullopt;
        return rec.value;
    }

    bool erase(uint64_t key) {
        if (failed_) {
            if (!query(key)) return false;
            log_.entries.push_back({key, 0, true});
            --live_;
            return true;
        }
        ++probes_;
        auto idx = inner_.query(hash_(key));
        if (!idx) return false;
        LeafRecord& rec = records_[*idx];
        if (rec.key != key || rec.tombstone) return false;
        rec.tombstone = true;
        --live_;
        return true;
    }

    uint64_t bits_used() const { return hash_.description_bits() + inner_.bits_used(); }
    bool failed() const { return failed_ || inner_.failed(); }
    bool collision_failed() const { return failed_; }
    uint64_t live_size() const { return live_; }
    uint64_t max_load() const { return inner_.max_load(); }
    uint64_t total_probes() const { return probes_ + inner_.total_probes(); }
    const PrimeProductHash& hash() const { return hash_; }
    const BudgetTrie& inner() const { return inner_; }

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
    static PrimeProductHash sample_hash(uint64_t n, int key_bits, int c,
                                        const RandomTape& tape) {
        RandomTape ht = tape.fork("uhash");
        return PrimeProductHash::sample(ht, n, key_bits, c);
    }

    static int inner_key_bits(const PrimeProductHash& h) {
        unsigned __int128 m = h.modulus() - 1;
        int bits = 0;
        while (m > 0) {
            ++bits;
            m >>= 1;
        }
        return std::min(std::max(bits, 8), 64);
    }

    OpStatus fail(uint64_t key, uint64_t value) {
        failed_ = true;
        log_insert(key, value);
        return OpStatus::failed_collision;
    }

    OpStatus log_insert(uint64_t key, uint64_t value) {
        if (!query(key)) ++live_;
        log_.entries.push_back({key, value, false});
        return OpStatus::failed_collision;
    }

    PrimeProductHash hash_;
    BudgetTrie inner_;
    std::deque<LeafRecord> records_;
    uint64_t live_ = 0;
    bool failed_ = false;
    SideLog log_;
    mutable uint64_t probes_ = 0;
};

}  // namespace rotrie
