#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "rotrie/amplified_trie.hpp"
#include "rotrie/budget_trie.hpp"
#include "rotrie/hash_kit.hpp"

namespace rotrie {

// Target failure probability schedule; group counts depend on log2(1/p(n)).
struct PSchedule {
    enum class Kind { poly, subexp };
    Kind kind = Kind::poly;
    double param = 2.0;

    double log2_inv(uint64_t n) const {
        double lg = std::log2(static_cast<double>(n));
        if (kind == Kind::poly) return param * lg;
        return std::pow(static_cast<double>(n), 1.0 - param) * std::log2(std::exp(1.0));
    }

    // "poly:2" -> n^-2, "subexp:0.5" -> exp(-n^0.5)
    static PSchedule parse(const std::string& s) {
        auto colon = s.find(':');
        std::string name = s.substr(0, colon);
        double v = (colon == std::string::npos) ? 2.0 : std::stod(s.substr(colon + 1));
        if (name == "poly") return PSchedule{Kind::poly, v};
        if (name == "subexp") return PSchedule{Kind::subexp, v};
        throw std::invalid_argument("unknown p-schedule: " + s);
    }
};

struct ManySetsConfig {
    double delta = 0.75;        // per-set size cap n^delta (delta = 2 * eps)
    int small_cutoff_exp = 2;   // sets with a_i <= log2(n)^exp live in the backyard
    PSchedule p;
    int key_bits = 0;           // defaults to 2*log2(n)
    int value_bits = 0;         // defaults to 2*log2(n)
    uint64_t max_sets = 0;      // defaults to n / (3*log2(n))
    double backyard_eps = 0.5;
    int pph_c = 2;
    uint64_t rebuild_ops_factor = 4;  // rebuild a set after factor*max(a,16) ops

    static ManySetsConfig defaults(uint64_t n) {
        ManySetsConfig cfg;
        int lg = ceil_log2(n);
        cfg.key_bits = 2 * lg;
        cfg.value_bits = 2 * lg;
        cfg.max_sets = std::max<uint64_t>(1, n / (3 * static_cast<uint64_t>(lg)));
        return cfg;
    }

    void validate(uint64_t n) const {
        double eps = delta / 2.0;
        double l2p = p.log2_inv(n);
        double upper = std::pow(static_cast<double>(n), 1.0 - eps) * std::log2(std::exp(1.0));
        double lower = std::log2(std::log2(static_cast<double>(n)));
        if (l2p > upper || l2p < lower)
            throw std::invalid_argument("p(n) schedule outside [exp(-n^(1-eps)), 1/polylog n]");
        if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("delta in (0,1) required");
        if (key_bits < 1 || key_bits > 48) throw std::invalid_argument("key_bits in [1,48]");
        if (value_bits < 1 || value_bits > 40) throw std::invalid_argument("value_bits in [1,40]");
        int set_bits = std::max(1, ceil_log2(max_sets));
        if (key_bits + set_bits > 62)
            throw std::invalid_argument("key_bits + log2(max_sets) must fit a word");
    }
};

// Greedy least-loaded partitioner; ties break toward the lowest group index.
class GreedyPartitioner {
public:
    explicit GreedyPartitioner(uint64_t groups) : load_(groups, 0) {}

    uint64_t assign(uint64_t weight) {
        uint64_t best = 0;
        for (uint64_t k = 1; k < load_.size(); ++k)
            if (load_[k] < load_[best]) best = k;
        load_[best] += weight;
        return best;
    }

    void release(uint64_t group, uint64_t weight) { load_[group] -= weight; }
    uint64_t load(uint64_t group) const { return load_[group]; }
    uint64_t max_load() const {
        uint64_t m = 0;
        for (uint64_t v : load_) m = std::max(m, v);
        return m;
    }
    uint64_t total() const {
        uint64_t s = 0;
        for (uint64_t v : load_) s += v;
        return s;
    }
    size_t size() const { return load_.size(); }

private:
    std::vector<uint64_t> load_;
};

// Many dynamically-sized sets behind one aggregate structure. Each large-
// enough set i keeps its records contiguously in a storage array B_i and
// routes queries through a skeleton A_i (a budget trie over reduced-width
// key hashes). Sets in the same (category, group) share one random-bit
// sequence. Hash collisions, skeleton rejections, and small sets fall back
// to a single backyard dictionary; every record still occupies its B_i slot
// so a set rebuild can pull its backyard residents back in.
class ManySets {
public:
    // Documented constants.
    static constexpr double kBackyardConstant = 2.0;   // |T| <= C * n/loglog n
    static constexpr double kSpaceConstant = 16.0;     // criterion-9 budget factor
    static constexpr double kGroupSumConstant = 4.0;   // group load <= C * n/t_j
    static constexpr double kCategoryBitsConstant = 32.0;

    ManySets(ManySetsConfig cfg, uint64_t n, RandomTape tape)
        : cfg_(fill_defaults(cfg, n)),
          n_(n),
          llog_(std::log2(std::log2(static_cast<double>(n)))),
          set_bits_(std::max(1, ceil_log2(cfg_.max_sets))),
          by_key_bits_(cfg_.key_bits + set_bits_),
          by_value_bits_(cfg_.value_bits + ceil_log2(n) + 2),
          tape_(std::move(tape)),
          backyard_(backyard_capacity(n), cfg_.backyard_eps, by_key_bits_,
                    tape_.fork("backyard")),
          categories_(64),
          cat_backyard_(64, 0) {
        assert((n & (n - 1)) == 0 && n >= 64);
        cfg_.validate(n);
        sets_.resize(cfg_.max_sets);
        small_cutoff_ = 1;
        double lg = std::log2(static_cast<double>(n));
        small_cutoff_ = static_cast<uint64_t>(std::pow(lg, cfg_.small_cutoff_exp));
        set_cap_ = static_cast<uint64_t>(std::pow(static_cast<double>(n), cfg_.delta));
    }

    void insert(uint64_t set, uint64_t key, uint64_t value) {
        check_args(set, key, value);
        SetState& st = state(set);
        Resolution r = resolve(st, set, key);
        if (r.found) {
            Rec& rec = st.storage[r.index];
            rec.value = value;
            if (rec.in_backyard) by_update(set, key, value, r.index);
            note_op(set, st);
            return;
        }
        if (live_total_ >= n_) throw std::invalid_argument("aggregate capacity exceeded");
        if (st.storage.size() >= set_cap_) throw std::invalid_argument("per-set capacity n^delta exceeded");
        uint64_t idx = st.storage.size();
        if (st.category < 0) {
            st.storage.push_back(Rec{key, value, true});
            by_add(set, st, key, value, idx);
        } else {
            uint64_t hx = st.hash(key);
            uint64_t s0 = st.skeleton->total_probes();
            auto hit = st.skeleton->query(hx);
            OpStatus put = OpStatus::failed_bin_overflow;
            if (!hit) put = st.skeleton->insert_strict(hx, idx);
            probes_ += st.skeleton->total_probes() - s0;
            bool to_backyard = hit.has_value() || put != OpStatus::ok;
            st.storage.push_back(Rec{key, value, to_backyard});
            if (to_backyard) by_add(set, st, key, value, idx);
        }
        ++live_total_;
        note_op(set, st);
    }

    std::optional<uint64_t> query(uint64_t set, uint64_t key) const {
        if (set >= cfg_.max_sets || !sets_[set]) return std::nullopt;
        const SetState& st = *sets_[set];
        Resolution r = resolve(st, set, key);
        if (!r.found) return std::nullopt;
        return st.storage[r.index].value;
    }

    bool erase(uint64_t set, uint64_t key) {
        if (set >= cfg_.max_sets || !sets_[set]) return false;
        SetState& st = *sets_[set];
        Resolution r = resolve(st, set, key);
        if (!r.found) return false;
        Rec rec = st.storage[r.index];
        if (rec.in_backyard) {
            by_remove(set, st, rec.key);
        } else {
            uint64_t s0 = st.skeleton->total_probes();
            st.skeleton->erase(st.hash(rec.key));
            probes_ += st.skeleton->total_probes() - s0;
        }
        uint64_t last = st.storage.size() - 1;
        if (r.index != last) {
            Rec moved = st.storage[last];
            st.storage[r.index] = moved;
            if (moved.in_backyard) {
                by_update(set, moved.key, moved.value, r.index);
            } else {
                uint64_t s0 = st.skeleton->total_probes();
                st.skeleton->insert(st.hash(moved.key), r.index);
                probes_ += st.skeleton->total_probes() - s0;
            }
        }
        st.storage.pop_back();
        --live_total_;
        note_op(set, st);
        return true;
    }

    uint64_t backyard_size() const { return backyard_live_; }
    uint64_t live_total() const { return live_total_; }
    uint64_t set_size(uint64_t set) const {
        return (set < sets_.size() && sets_[set]) ? sets_[set]->storage.size() : 0;
    }
    int64_t set_category(uint64_t set) const { return sets_[set] ? sets_[set]->category : -1; }
    uint64_t set_group(uint64_t set) const { return sets_[set] ? sets_[set]->group : 0; }
    uint64_t set_skeletal_size(uint64_t set) const { return sets_[set] ? sets_[set]->a : 0; }
    std::string set_tape_label(uint64_t set) const {
        return sets_[set] ? sets_[set]->tape_label : std::string();
    }
    uint64_t rebuild_events() const { return rebuilds_; }
    uint64_t small_cutoff() const { return small_cutoff_; }
    bool partition_feasible() const { return partition_feasible_; }
    uint64_t total_probes() const { return probes_; }
    uint64_t rebuild_probes() const { return rebuild_probes_; }
    const AmplifiedTrie& backyard() const { return backyard_; }

    uint64_t t_param(uint64_t category) const {
        double t = llog_ * llog_ * cfg_.p.log2_inv(n_) / static_cast<double>(category);
        return static_cast<uint64_t>(std::ceil(t));
    }

    std::vector<uint64_t> category_backyard() const { return cat_backyard_; }
    uint64_t category_backyard_max() const {
        uint64_t m = 0;
        for (uint64_t v : cat_backyard_) m = std::max(m, v);
        return m;
    }
    std::vector<uint64_t> category_random_bits() const {
        std::vector<uint64_t> out(categories_.size(), 0);
        for (size_t j = 0; j < categories_.size(); ++j)
            if (categories_[j]) out[j] = categories_[j]->rand_bits;
        return out;
    }

    // Exact logical-bit accounting: storage arrays + skeletons + backyard
    // (padded to its n/loglog n floor) + group tables.
    uint64_t space_bits() const {
        uint64_t bits = 0;
        uint64_t lg = static_cast<uint64_t>(ceil_log2(n_));
        for (const auto& sp : sets_) {
            if (!sp) continue;
            bits += sp->storage.size() *
                    static_cast<uint64_t>(cfg_.key_bits + cfg_.value_bits + 1);
            if (sp->skeleton)
                bits += sp->skeleton->space_bits(sp->hash_width,
                                                 static_cast<int>(sp->category) + 3);
            bits += 4 * 64;  // per-set directory entry
        }
        uint64_t pad_floor = static_cast<uint64_t>(
            std::ceil(static_cast<double>(n_) / llog_));
        bits += std::max(backyard_live_, pad_floor) *
                static_cast<uint64_t>(by_key_bits_ + by_value_bits_);
        for (const auto& cat : categories_) {
            if (!cat) continue;
            bits += 64 * (2 + cat->partition.size());
            for (const auto& g : cat->groups)
                if (g) bits += g->bits;
        }
        bits += lg * 8 + 24 * 64;
        return bits;
    }

    // Audit: each live record resolves through exactly one route, matching
    // its in_backyard flag.
    bool audit_single_resolution() const {
        for (uint64_t set = 0; set < sets_.size(); ++set) {
            if (!sets_[set]) continue;
            const SetState& st = *sets_[set];
            for (uint64_t idx = 0; idx < st.storage.size(); ++idx) {
                const Rec& rec = st.storage[idx];
                bool in_skel = false;
                if (st.skeleton) {
                    auto hit = st.skeleton->query(st.hash(rec.key));
                    in_skel = hit && *hit == idx;
                }
                bool in_by = backyard_.query(by_key(set, rec.key)).has_value();
                if (in_skel == in_by) return false;
                if (rec.in_backyard != in_by) return false;
            }
        }
        return true;
    }

private:
    struct Rec {
        uint64_t key;
        uint64_t value;
        bool in_backyard;
    };

    struct SetState {
        std::vector<Rec> storage;              // B_i
        std::optional<BudgetTrie> skeleton;    // A_i
        std::optional<PrimeProductHash> pph;
        int hash_width = 0;
        uint64_t a = 0;                        // skeletal size
        int64_t category = -1;                 // -1: backyard mode
        uint64_t group = 0;
        uint64_t ops_since_rebuild = 0;
        std::string tape_label;

        uint64_t hash(uint64_t key) const {
            uint64_t wide = (*pph)(key);
            return hash_width >= 64 ? wide : (wide & ((uint64_t{1} << hash_width) - 1));
        }
    };

    struct GroupState {
        RandomTape proto;
        PrimeProductHash pph;
        uint64_t bits = 0;
        bool bits_counted = false;
    };

    struct CategoryState {
        GreedyPartitioner partition;
        std::vector<std::unique_ptr<GroupState>> groups;
        uint64_t rand_bits = 0;
        explicit CategoryState(uint64_t t) : partition(t), groups(t) {}
    };

    static ManySetsConfig fill_defaults(ManySetsConfig cfg, uint64_t n) {
        ManySetsConfig d = ManySetsConfig::defaults(n);
        if (cfg.key_bits == 0) cfg.key_bits = d.key_bits;
        if (cfg.value_bits == 0) cfg.value_bits = d.value_bits;
        if (cfg.max_sets == 0) cfg.max_sets = d.max_sets;
        return cfg;
    }

    static uint64_t backyard_capacity(uint64_t n) { return n; }

    void check_args(uint64_t set, uint64_t key, uint64_t value) const {
        if (set >= cfg_.max_sets) throw std::invalid_argument("set index beyond max_sets");
        if (cfg_.key_bits < 64 && (key >> cfg_.key_bits) != 0)
            throw std::invalid_argument("key wider than configured");
        if (cfg_.value_bits < 64 && (value >> cfg_.value_bits) != 0)
            throw std::invalid_argument("value wider than configured");
    }

    SetState& state(uint64_t set) {
        if (!sets_[set]) sets_[set] = std::make_unique<SetState>();
        return *sets_[set];
    }

    struct Resolution {
        bool found;
        uint64_t index;
    };

    Resolution resolve(const SetState& st, uint64_t set, uint64_t key) const {
        if (st.skeleton) {
            uint64_t s0 = st.skeleton->total_probes();
            auto hit = st.skeleton->query(st.hash(key));
            probes_ += st.skeleton->total_probes() - s0;
            if (hit && *hit < st.storage.size() && st.storage[*hit].key == key &&
                !st.storage[*hit].in_backyard)
                return Resolution{true, *hit};
        }
        uint64_t b0 = backyard_.total_probes();
        auto v = backyard_.query(by_key(set, key));
        probes_ += backyard_.total_probes() - b0;
        if (v) return Resolution{true, *v >> cfg_.value_bits};
        return Resolution{false, 0};
    }

    uint64_t by_key(uint64_t set, uint64_t key) const {
        return (set << cfg_.key_bits) | key;
    }
    uint64_t by_val(uint64_t value, uint64_t index) const {
        return (index << cfg_.value_bits) | value;
    }

    uint64_t record_category(const SetState& st) const {
        uint64_t a = std::max<uint64_t>(st.a, 1);
        return static_cast<uint64_t>(63 - std::countl_zero(a));
    }

    void by_add(uint64_t set, SetState& st, uint64_t key, uint64_t value, uint64_t idx) {
        uint64_t b0 = backyard_.total_probes();
        backyard_.insert(by_key(set, key), by_val(value, idx));
        probes_ += backyard_.total_probes() - b0;
        ++backyard_live_;
        ++cat_backyard_[record_category(st)];
    }

    void by_update(uint64_t set, uint64_t key, uint64_t value, uint64_t idx) {
        uint64_t b0 = backyard_.total_probes();
        backyard_.insert(by_key(set, key), by_val(value, idx));
        probes_ += backyard_.total_probes() - b0;
    }

    void by_remove(uint64_t set, SetState& st, uint64_t key) {
        uint64_t b0 = backyard_.total_probes();
        backyard_.erase(by_key(set, key));
        probes_ += backyard_.total_probes() - b0;
        --backyard_live_;
        --cat_backyard_[record_category(st)];
    }

    void note_op(uint64_t set, SetState& st) {
        ++st.ops_since_rebuild;
        uint64_t size = st.storage.size();
        bool grew = size > 2 * st.a;
        bool shrank = 2 * size < st.a;
        bool stale = st.ops_since_rebuild > cfg_.rebuild_ops_factor * std::max<uint64_t>(st.a, 16);
        if (grew || shrank || stale) rebuild_set(set, st);
    }

    void rebuild_set(uint64_t set, SetState& st) {
        uint64_t p0 = probes_;
        st.ops_since_rebuild = 0;
        ++rebuilds_;
        // pull this set's backyard residents back in
        for (auto& rec : st.storage) {
            if (rec.in_backyard) {
                by_remove(set, st, rec.key);
                rec.in_backyard = false;
            }
        }
        if (st.category >= 0)
            categories_[st.category]->partition.release(st.group, st.a);
        st.a = st.storage.size();
        if (st.a <= small_cutoff_) {
            st.skeleton.reset();
            st.pph.reset();
            st.category = -1;
            st.tape_label.clear();
            for (uint64_t idx = 0; idx < st.storage.size(); ++idx) {
                Rec& rec = st.storage[idx];
                rec.in_backyard = true;
                by_add(set, st, rec.key, rec.value, idx);
            }
        } else {
            uint64_t j = static_cast<uint64_t>(63 - std::countl_zero(st.a));
            st.category = static_cast<int64_t>(j);
            CategoryState& cat = category(j);
            st.group = cat.partition.assign(st.a);
            if (cat.partition.load(st.group) >
                static_cast<uint64_t>(kGroupSumConstant * n_ / cat.partition.size()))
                partition_feasible_ = false;
            GroupState& gs = group(j, st.group);
            st.pph = gs.pph;
            st.hash_width = hash_width_for(j);
            RandomTape skel_tape = gs.proto.fork("skel");
            st.tape_label = skel_tape.label_path();
            st.skeleton.emplace(skeleton_capacity(j), st.hash_width, std::move(skel_tape));
            if (!gs.bits_counted) {
                gs.bits = gs.pph.description_bits() + st.skeleton->bits_used();
                gs.bits_counted = true;
                cat.rand_bits += gs.bits;
            }
            for (uint64_t idx = 0; idx < st.storage.size(); ++idx) {
                Rec& rec = st.storage[idx];
                uint64_t hx = st.hash(rec.key);
                uint64_t s0 = st.skeleton->total_probes();
                bool taken = st.skeleton->query(hx).has_value();
                OpStatus put = taken ? OpStatus::failed_bin_overflow
                                     : st.skeleton->insert_strict(hx, idx);
                probes_ += st.skeleton->total_probes() - s0;
                if (taken || put != OpStatus::ok) {
                    rec.in_backyard = true;
                    by_add(set, st, rec.key, rec.value, idx);
                }
            }
        }
        rebuild_probes_ += probes_ - p0;
        probes_ = p0;  // rebuild work is accounted separately
    }

    CategoryState& category(uint64_t j) {
        if (!categories_[j]) categories_[j] = std::make_unique<CategoryState>(t_param(j));
        return *categories_[j];
    }

    GroupState& group(uint64_t j, uint64_t k) {
        CategoryState& cat = *categories_[j];
        if (!cat.groups[k]) {
            RandomTape proto = tape_.fork("R").fork(j).fork(k);
            RandomTape ht = proto.fork("uh");
            uint64_t quality = pph_quality(j);
            auto pph = PrimeProductHash::sample(ht, quality, cfg_.key_bits, cfg_.pph_c);
            cat.groups[k] = std::make_unique<GroupState>(
                GroupState{std::move(proto), std::move(pph)});
        }
        return *cat.groups[k];
    }

    int hash_width_for(uint64_t j) const { return static_cast<int>(std::min<uint64_t>(3 * (j + 1), 48)); }

    uint64_t skeleton_capacity(uint64_t j) const {
        uint64_t cap = uint64_t{1} << std::min<uint64_t>(j + 4, 26);
        return std::max<uint64_t>(cap, 16);
    }

    uint64_t pph_quality(uint64_t j) const {
        // prime pool [quality^(2/c)]; kept above the n > u^c precondition
        uint64_t q = uint64_t{1} << std::min<uint64_t>(2 * (j + 1), 22);
        long double need = 1.0L;
        for (int i = 0; i < cfg_.pph_c; ++i) need *= cfg_.key_bits;
        while (static_cast<long double>(q) <= need) q <<= 1;
        return q;
    }

    ManySetsConfig cfg_;
    uint64_t n_;
    double llog_;
    int set_bits_;
    int by_key_bits_;
    int by_value_bits_;
    RandomTape tape_;
    AmplifiedTrie backyard_;
    std::vector<std::unique_ptr<SetState>> sets_;
    std::vector<std::unique_ptr<CategoryState>> categories_;
    std::vector<uint64_t> cat_backyard_;
    uint64_t small_cutoff_ = 1;
    uint64_t set_cap_ = 0;
    uint64_t live_total_ = 0;
    uint64_t backyard_live_ = 0;
    uint64_t rebuilds_ = 0;
    bool partition_feasible_ = true;
    mutable uint64_t probes_ = 0;
    uint64_t rebuild_probes_ = 0;
};

}  // namespace rotrie
