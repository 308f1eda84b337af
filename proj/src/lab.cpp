#include "rotrie/lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "rotrie/amplified_trie.hpp"
#include "rotrie/budget_trie.hpp"
#include "rotrie/manysets.hpp"
#include "rotrie/rotated_trie.hpp"

namespace rotrie::lab {

std::string to_string(Structure s) {
    switch (s) {
        case Structure::rotated: return "rotated";
        case Structure::amplified: return "amplified";
        case Structure::budget: return "budget";
        case Structure::budget_large_u: return "budget-large-u";
        case Structure::manysets: return "manysets";
    }
    return "?";
}

std::string to_string(Workload w) {
    switch (w) {
        case Workload::random_fill: return "random-fill";
        case Workload::adversarial_prefix: return "adversarial-prefix";
        case Workload::mixed_ops: return "mixed-ops";
    }
    return "?";
}

Structure parse_structure(const std::string& s) {
    if (s == "rotated") return Structure::rotated;
    if (s == "amplified") return Structure::amplified;
    if (s == "budget") return Structure::budget;
    if (s == "budget-large-u") return Structure::budget_large_u;
    if (s == "manysets") return Structure::manysets;
    throw std::invalid_argument("unknown structure: " + s);
}

Workload parse_workload(const std::string& s) {
    if (s == "random-fill") return Workload::random_fill;
    if (s == "adversarial-prefix") return Workload::adversarial_prefix;
    if (s == "mixed-ops") return Workload::mixed_ops;
    throw std::invalid_argument("unknown workload: " + s);
}

uint64_t probe_quantile(const std::vector<uint64_t>& hist, double q) {
    uint64_t total = 0;
    for (uint64_t c : hist) total += c;
    if (total == 0) return 0;
    uint64_t want = static_cast<uint64_t>(std::ceil(q * static_cast<double>(total)));
    if (want == 0) want = 1;
    uint64_t seen = 0;
    for (size_t i = 0; i < hist.size(); ++i) {
        seen += hist[i];
        if (seen >= want) return i;
    }
    return hist.size() - 1;
}

namespace {

const char* failure_name(OpStatus st) {
    switch (st) {
        case OpStatus::ok: return "none";
        case OpStatus::failed_bin_overflow: return "bin-overflow";
        case OpStatus::failed_alloc: return "alloc";
        case OpStatus::failed_collision: return "collision";
        case OpStatus::space_failure: return "space";
    }
    return "?";
}

int key_bits_for(Structure s, const ExperimentSpec& spec) {
    int lg = ceil_log2(spec.n);
    if (s == Structure::budget_large_u) return spec.key_bits_u;
    return 2 * lg;
}

class RotatedAdapter : public DictUnderTest {
public:
    RotatedAdapter(const ExperimentSpec& spec, RandomTape tape)
        : trie_(spec.n, spec.n, key_bits_for(Structure::rotated, spec), std::move(tape),
                spec.ell) {}
    void insert(uint64_t k, uint64_t v) override { trie_.insert(k, v); }
    bool erase(uint64_t k) override { return trie_.erase(k); }
    std::optional<uint64_t> query(uint64_t k) override { return trie_.query(k); }
    uint64_t total_probes() const override { return trie_.total_probes(); }
    void fill_stats(TrialRecord& rec) const override {
        rec.max_load = trie_.max_load();
        rec.ball_count = trie_.ball_count();
        rec.bin0_load = trie_.bin_load(0);
        rec.bits_used = trie_.bits_consumed();
        if (trie_.failed()) rec.failure_kind = failure_name(trie_.failure());
    }

private:
    RotatedTrie trie_;
};

class AmplifiedAdapter : public DictUnderTest {
public:
    AmplifiedAdapter(const ExperimentSpec& spec, RandomTape tape)
        : trie_(spec.n, spec.eps, key_bits_for(Structure::amplified, spec), std::move(tape),
                spec.ell) {}
    void insert(uint64_t k, uint64_t v) override { trie_.insert(k, v); }
    bool erase(uint64_t k) override { return trie_.erase(k); }
    std::optional<uint64_t> query(uint64_t k) override { return trie_.query(k); }
    uint64_t total_probes() const override { return trie_.total_probes(); }
    void fill_stats(TrialRecord& rec) const override {
        rec.max_load = trie_.max_load();
        rec.ball_count = trie_.ball_count();
        rec.overflow_q = trie_.overflow_count();
        rec.bits_used = trie_.bits_consumed();
        if (trie_.space_failed()) rec.failure_kind = "space";
        else if (trie_.failed()) rec.failure_kind = "alloc";
    }

private:
    AmplifiedTrie trie_;
};

class BudgetAdapter : public DictUnderTest {
public:
    BudgetAdapter(const ExperimentSpec& spec, RandomTape tape)
        : trie_(spec.n, key_bits_for(Structure::budget, spec), std::move(tape), spec.ell,
                spec.kwise_k) {}
    void insert(uint64_t k, uint64_t v) override { trie_.insert(k, v); }
    bool erase(uint64_t k) override { return trie_.erase(k); }
    std::optional<uint64_t> query(uint64_t k) override { return trie_.query(k); }
    uint64_t total_probes() const override { return trie_.total_probes(); }
    void fill_stats(TrialRecord& rec) const override {
        rec.max_load = trie_.max_load();
        rec.ball_count = trie_.ball_count();
        rec.bits_used = trie_.bits_used();
        auto census = trie_.group_census();
        for (uint64_t g : census) rec.group_max = std::max(rec.group_max, g);
        if (trie_.failed()) rec.failure_kind = failure_name(trie_.failure());
    }

private:
    BudgetTrie trie_;
};

class BudgetLargeUAdapter : public DictUnderTest {
public:
    BudgetLargeUAdapter(const ExperimentSpec& spec, RandomTape tape)
        : trie_(spec.n, spec.key_bits_u, spec.pph_c, tape) {}
    void insert(uint64_t k, uint64_t v) override { trie_.insert(k, v); }
    bool erase(uint64_t k) override { return trie_.erase(k); }
    std::optional<uint64_t> query(uint64_t k) override { return trie_.query(k); }
    uint64_t total_probes() const override { return trie_.total_probes(); }
    void fill_stats(TrialRecord& rec) const override {
        rec.max_load = trie_.max_load();
        rec.bits_used = trie_.bits_used();
        if (trie_.collision_failed()) rec.failure_kind = "collision";
        else if (trie_.failed()) rec.failure_kind = "bin-overflow";
    }

private:
    BudgetTrieLargeU trie_;
};

class ManySetsAdapter : public DictUnderTest {
public:
    ManySetsAdapter(const ExperimentSpec& spec, RandomTape tape)
        : cfg_(make_cfg(spec)), ms_(cfg_, spec.n, std::move(tape)), sets_(spec.sets) {}

    static ManySetsConfig make_cfg(const ExperimentSpec& spec) {
        ManySetsConfig cfg = ManySetsConfig::defaults(spec.n);
        cfg.p = PSchedule::parse(spec.p_schedule);
        cfg.backyard_eps = spec.eps;
        cfg.pph_c = spec.pph_c;
        if (spec.sets > cfg.max_sets) cfg.max_sets = spec.sets;
        return cfg;
    }

    // packed key: (set << key_bits) | x
    void insert(uint64_t k, uint64_t v) override {
        ms_.insert(split_set(k), split_key(k), v & value_mask());
    }
    bool erase(uint64_t k) override { return ms_.erase(split_set(k), split_key(k)); }
    std::optional<uint64_t> query(uint64_t k) override {
        return ms_.query(split_set(k), split_key(k));
    }
    uint64_t total_probes() const override { return ms_.total_probes(); }
    void fill_stats(TrialRecord& rec) const override {
        rec.backyard_size = ms_.backyard_size();
        rec.cat_backyard_max = ms_.category_backyard_max();
        rec.space_bits = ms_.space_bits();
        uint64_t max_cat = 0;
        for (uint64_t b : ms_.category_random_bits()) max_cat = std::max(max_cat, b);
        rec.bits_used = ms_.backyard().bits_consumed() + max_cat;
        if (!ms_.partition_feasible()) rec.failure_kind = "space";
    }

    const ManySets& inner() const { return ms_; }
    int key_bits() const { return cfg_.key_bits; }

private:
    uint64_t split_set(uint64_t k) const { return (k >> cfg_.key_bits) % sets_; }
    uint64_t split_key(uint64_t k) const {
        return k & ((uint64_t{1} << cfg_.key_bits) - 1);
    }
    uint64_t value_mask() const { return (uint64_t{1} << cfg_.value_bits) - 1; }

    ManySetsConfig cfg_;
    ManySets ms_;
    uint64_t sets_;
};

class FaultyAdapter : public DictUnderTest {
public:
    FaultyAdapter(std::unique_ptr<DictUnderTest> inner, uint64_t drop_every)
        : inner_(std::move(inner)), drop_every_(drop_every) {}
    void insert(uint64_t k, uint64_t v) override {
        if (++count_ % drop_every_ == 0) return;  // drops the op
        inner_->insert(k, v);
    }
    bool erase(uint64_t k) override { return inner_->erase(k); }
    std::optional<uint64_t> query(uint64_t k) override { return inner_->query(k); }
    uint64_t total_probes() const override { return inner_->total_probes(); }
    void fill_stats(TrialRecord& rec) const override { inner_->fill_stats(rec); }

private:
    std::unique_ptr<DictUnderTest> inner_;
    uint64_t drop_every_;
    uint64_t count_ = 0;
};

void bump_hist(std::vector<uint64_t>* hist, uint64_t probes) {
    if (!hist) return;
    uint64_t bucket = std::min<uint64_t>(probes, 511);
    if (hist->size() <= bucket) hist->resize(bucket + 1, 0);
    (*hist)[bucket]++;
}

// n distinct uniform keys of the given width
std::vector<uint64_t> distinct_keys(RandomTape& tape, uint64_t count, int key_bits) {
    std::unordered_set<uint64_t> seen;
    std::vector<uint64_t> keys;
    keys.reserve(count);
    while (keys.size() < count) {
        uint64_t k = tape.draw_bits(key_bits);
        if (seen.insert(k).second) keys.push_back(k);
    }
    return keys;
}

// keys sharing a fixed high-half prefix, distinct low halves
std::vector<uint64_t> adversarial_keys(RandomTape& tape, uint64_t count, int key_bits) {
    int low = key_bits / 2;
    uint64_t prefix = tape.draw_bits(key_bits - low) << low;
    std::unordered_set<uint64_t> seen;
    std::vector<uint64_t> keys;
    keys.reserve(count);
    uint64_t cap = (low >= 64) ? ~uint64_t{0} : (uint64_t{1} << low);
    while (keys.size() < count && keys.size() < cap) {
        uint64_t k = prefix | tape.draw_bits(low);
        if (seen.insert(k).second) keys.push_back(k);
    }
    return keys;
}

template <class F>
void parallel_trials(uint64_t trials, F&& body) {
    unsigned hw = std::thread::hardware_concurrency();
    unsigned workers = std::min<uint64_t>(hw ? hw : 4, trials);
    if (workers <= 1) {
        for (uint64_t t = 0; t < trials; ++t) body(t);
        return;
    }
    std::atomic<uint64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (uint64_t t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) body(t);
        });
    }
    for (auto& th : pool) th.join();
}

TrialRecord base_record(const ExperimentSpec& spec, uint64_t trial) {
    TrialRecord rec;
    rec.seed = spec.seed + trial;
    rec.structure = to_string(spec.structure);
    rec.n = spec.n;
    return rec;
}

RandomTape trial_tape(const ExperimentSpec& spec, uint64_t trial) {
    return RandomTape::from_seed(spec.seed).fork("trial").fork(trial);
}

}  // namespace

std::unique_ptr<DictUnderTest> make_dict(Structure s, const ExperimentSpec& spec,
                                         RandomTape tape) {
    switch (s) {
        case Structure::rotated: return std::make_unique<RotatedAdapter>(spec, std::move(tape));
        case Structure::amplified:
            return std::make_unique<AmplifiedAdapter>(spec, std::move(tape));
        case Structure::budget: return std::make_unique<BudgetAdapter>(spec, std::move(tape));
        case Structure::budget_large_u:
            return std::make_unique<BudgetLargeUAdapter>(spec, std::move(tape));
        case Structure::manysets:
            return std::make_unique<ManySetsAdapter>(spec, std::move(tape));
    }
    throw std::invalid_argument("bad structure");
}

std::unique_ptr<DictUnderTest> make_faulty(std::unique_ptr<DictUnderTest> inner,
                                           uint64_t drop_every) {
    return std::make_unique<FaultyAdapter>(std::move(inner), drop_every);
}

// ---- load-dist / overflow ---------------------------------------------------

namespace {

std::vector<uint64_t> workload_keys(const ExperimentSpec& spec, int key_bits) {
    RandomTape wt = RandomTape::from_seed(spec.seed).fork("workload");
    uint64_t count = spec.fill ? spec.fill : spec.n;
    if (spec.workload == Workload::adversarial_prefix)
        return adversarial_keys(wt, count, key_bits);
    return distinct_keys(wt, count, key_bits);
}

std::vector<TrialRecord> run_fill_experiment(const ExperimentSpec& spec) {
    int key_bits = key_bits_for(spec.structure, spec);
    std::vector<uint64_t> keys = workload_keys(spec, key_bits);
    std::vector<TrialRecord> out(spec.trials);
    parallel_trials(spec.trials, [&](uint64_t t) {
        TrialRecord rec = base_record(spec, t);
        auto dict = make_dict(spec.structure, spec, trial_tape(spec, t));
        for (uint64_t i = 0; i < keys.size(); ++i) {
            uint64_t before = dict->total_probes();
            dict->insert(keys[i], i);
            bump_hist(&rec.probe_hist, dict->total_probes() - before);
        }
        rec.op_count = keys.size();
        dict->fill_stats(rec);
        out[t] = std::move(rec);
    });
    return out;
}

}  // namespace

std::vector<TrialRecord> run_load_dist(const ExperimentSpec& spec) {
    return run_fill_experiment(spec);
}

std::vector<TrialRecord> run_overflow(const ExperimentSpec& spec) {
    ExperimentSpec s = spec;
    s.structure = Structure::amplified;
    return run_fill_experiment(s);
}

std::vector<TrialRecord> run_bits(const ExperimentSpec& spec) {
    std::vector<TrialRecord> out(spec.trials);
    parallel_trials(spec.trials, [&](uint64_t t) {
        TrialRecord rec = base_record(spec, t);
        rec.structure = to_string(Structure::budget);
        BudgetTrie trie(spec.n, 2 * ceil_log2(spec.n), trial_tape(spec, t), spec.ell,
                        spec.kwise_k);
        rec.bits_used = trie.bits_used();
        out[t] = std::move(rec);
    });
    return out;
}

std::vector<TrialRecord> run_injectivity(const ExperimentSpec& spec) {
    uint64_t set_size = spec.fill ? spec.fill : 1024;
    std::vector<TrialRecord> out(spec.trials);
    parallel_trials(spec.trials, [&](uint64_t t) {
        TrialRecord rec = base_record(spec, t);
        rec.structure = "pph";
        RandomTape tape = trial_tape(spec, t);
        RandomTape ht = tape.fork("hash");
        PrimeProductHash h = PrimeProductHash::sample(ht, spec.n, spec.key_bits_u, spec.pph_c);
        rec.bits_used = h.description_bits();
        RandomTape kt = tape.fork("keys");
        std::vector<uint64_t> keys = distinct_keys(kt, set_size, spec.key_bits_u);
        std::vector<uint64_t> images(keys.size());
        for (size_t i = 0; i < keys.size(); ++i) images[i] = h(keys[i]);
        std::sort(images.begin(), images.end());
        uint64_t collisions = 0;
        for (size_t i = 1; i < images.size(); ++i)
            if (images[i] == images[i - 1]) ++collisions;
        rec.set_size = set_size;
        rec.collisions = collisions;
        rec.op_count = set_size;
        if (collisions > 0) rec.failure_kind = "collision";
        out[t] = std::move(rec);
    });
    return out;
}

std::vector<TrialRecord> run_manysets(const ExperimentSpec& spec) {
    std::vector<TrialRecord> out(spec.trials);
    parallel_trials(spec.trials, [&](uint64_t t) {
        TrialRecord rec = base_record(spec, t);
        ExperimentSpec s = spec;
        s.structure = Structure::manysets;
        ManySetsAdapter dict(s, trial_tape(spec, t));
        uint64_t target = spec.fill ? spec.fill : spec.n - spec.n / 8;
        RandomTape kt = RandomTape::from_seed(spec.seed).fork("mskeys").fork(t);
        int kb = dict.key_bits();
        uint64_t ops = 0;
        while (dict.inner().live_total() < target) {
            uint64_t set = kt.draw_below(spec.sets);
            uint64_t key = kt.draw_bits(kb);
            uint64_t before = dict.total_probes();
            dict.insert((set << kb) | key, kt.draw_bits(32));
            bump_hist(&rec.probe_hist, dict.total_probes() - before);
            ++ops;
        }
        rec.op_count = ops;
        dict.fill_stats(rec);
        double llog = std::log2(std::log2(static_cast<double>(spec.n)));
        double lg = std::log2(static_cast<double>(spec.n));
        double per_key = 0;
        for (uint64_t i = 0; i < spec.sets; ++i) {
            uint64_t sz = dict.inner().set_size(i);
            if (sz > 0)
                per_key += static_cast<double>(sz) *
                           (2.0 * lg * 2.0 +
                            ManySets::kSpaceConstant * std::log2(static_cast<double>(sz)));
        }
        rec.space_budget_bits = static_cast<uint64_t>(
            per_key + ManySets::kSpaceConstant * static_cast<double>(spec.n) * lg / llog);
        out[t] = std::move(rec);
    });
    return out;
}

// ---- mixed-ops / fuzz -------------------------------------------------------

void mixed_ops_trial(DictUnderTest& dict, uint64_t ops, uint64_t live_cap,
                     int key_bits, RandomTape tape, std::vector<uint64_t>* hist,
                     std::vector<FuzzOp>* trace, uint64_t* mismatches) {
    std::unordered_map<uint64_t, uint64_t> oracle;
    std::vector<uint64_t> live;
    std::unordered_map<uint64_t, size_t> pos;
    uint64_t bad = 0;

    auto remember = [&](uint64_t k, uint64_t v) {
        if (!oracle.count(k)) {
            pos[k] = live.size();
            live.push_back(k);
        }
        oracle[k] = v;
    };
    auto forget = [&](uint64_t k) {
        auto it = pos.find(k);
        if (it == pos.end()) return;
        size_t i = it->second;
        live[i] = live.back();
        pos[live[i]] = i;
        live.pop_back();
        pos.erase(it);
        oracle.erase(k);
    };

    for (uint64_t i = 0; i < ops; ++i) {
        uint64_t r = tape.draw_below(100);
        uint64_t before = dict.total_probes();
        if (r < 45 && oracle.size() < live_cap) {
            uint64_t k = tape.draw_bits(key_bits);
            uint64_t v = tape.draw_bits(32);
            if (trace) trace->push_back({FuzzOp::Kind::insert, 0, k, v});
            dict.insert(k, v);
            remember(k, v);
        } else if (r < 75 && !live.empty()) {
            uint64_t k = (tape.draw_below(10) < 8)
                             ? live[tape.draw_below(live.size())]
                             : tape.draw_bits(key_bits);
            if (trace) trace->push_back({FuzzOp::Kind::erase, 0, k, 0});
            bool got = dict.erase(k);
            bool want = oracle.count(k) > 0;
            if (got != want) ++bad;
            forget(k);
        } else {
            uint64_t k = (!live.empty() && tape.draw_below(2) == 0)
                             ? live[tape.draw_below(live.size())]
                             : tape.draw_bits(key_bits);
            if (trace) trace->push_back({FuzzOp::Kind::query, 0, k, 0});
            auto got = dict.query(k);
            auto it = oracle.find(k);
            bool want = it != oracle.end();
            if (got.has_value() != want || (want && *got != it->second)) ++bad;
        }
        bump_hist(hist, dict.total_probes() - before);
    }
    // full sweep: every oracle key answers with its value
    for (const auto& [k, v] : oracle) {
        auto got = dict.query(k);
        if (!got || *got != v) ++bad;
    }
    if (mismatches) *mismatches = bad;
}

namespace {

uint64_t replay_mismatches(DictUnderTest& dict, const std::vector<FuzzOp>& ops) {
    std::unordered_map<uint64_t, uint64_t> oracle;
    uint64_t bad = 0;
    for (const auto& op : ops) {
        switch (op.kind) {
            case FuzzOp::Kind::insert:
                dict.insert(op.key, op.value);
                oracle[op.key] = op.value;
                break;
            case FuzzOp::Kind::erase: {
                bool got = dict.erase(op.key);
                if (got != (oracle.count(op.key) > 0)) ++bad;
                oracle.erase(op.key);
                break;
            }
            case FuzzOp::Kind::query: {
                auto got = dict.query(op.key);
                auto it = oracle.find(op.key);
                bool want = it != oracle.end();
                if (got.has_value() != want || (want && *got != it->second)) ++bad;
                break;
            }
        }
    }
    for (const auto& [k, v] : oracle) {
        auto got = dict.query(k);
        if (!got || *got != v) ++bad;
    }
    return bad;
}

// greedy chunk-removal minimization of a failing op sequence
std::vector<FuzzOp> minimize_ops(
    const std::vector<FuzzOp>& ops,
    const std::function<std::unique_ptr<DictUnderTest>()>& fresh) {
    auto fails = [&](const std::vector<FuzzOp>& seq) {
        auto dict = fresh();
        return replay_mismatches(*dict, seq) > 0;
    };
    std::vector<FuzzOp> cur = ops;
    size_t chunk = cur.size() / 2;
    while (chunk >= 1) {
        bool removed_any = false;
        for (size_t start = 0; start + 1 <= cur.size() && cur.size() > 1;) {
            std::vector<FuzzOp> trial;
            trial.reserve(cur.size());
            size_t end = std::min(cur.size(), start + chunk);
            trial.insert(trial.end(), cur.begin(), cur.begin() + start);
            trial.insert(trial.end(), cur.begin() + end, cur.end());
            if (!trial.empty() && fails(trial)) {
                cur = std::move(trial);
                removed_any = true;
            } else {
                start += chunk;
            }
        }
        if (chunk == 1 && !removed_any) break;
        chunk = std::max<size_t>(1, chunk / 2);
        if (chunk == 1 && removed_any) chunk = std::max<size_t>(1, cur.size() / 2);
    }
    return cur;
}

}  // namespace

FuzzResult run_fuzz(const ExperimentSpec& spec,
                    std::function<std::unique_ptr<DictUnderTest>(RandomTape)> dict_factory) {
    if (!dict_factory) {
        dict_factory = [&spec](RandomTape tape) {
            return make_dict(spec.structure, spec, std::move(tape));
        };
    }
    int key_bits = key_bits_for(spec.structure, spec);
    if (spec.structure == Structure::manysets)
        key_bits = 2 * ceil_log2(spec.n) + ceil_log2(std::max<uint64_t>(spec.sets, 2));
    uint64_t ops = spec.ops ? spec.ops : 100000;
    uint64_t live_cap = spec.n / 2;

    FuzzResult result;
    result.records.resize(spec.trials);
    std::vector<std::vector<FuzzOp>> failing(spec.trials);
    parallel_trials(spec.trials, [&](uint64_t t) {
        TrialRecord rec = base_record(spec, t);
        auto dict = dict_factory(trial_tape(spec, t));
        std::vector<FuzzOp> trace;
        uint64_t bad = 0;
        mixed_ops_trial(*dict, ops, live_cap, key_bits,
                        RandomTape::from_seed(spec.seed).fork("ops").fork(t),
                        &rec.probe_hist, &trace, &bad);
        rec.op_count = ops;
        rec.mismatches = bad;
        dict->fill_stats(rec);
        if (bad > 0) failing[t] = std::move(trace);
        result.records[t] = std::move(rec);
    });
    for (uint64_t t = 0; t < spec.trials; ++t) {
        if (!failing[t].empty()) {
            result.pass = false;
            auto fresh = [&, t]() { return dict_factory(trial_tape(spec, t)); };
            result.counterexample = minimize_ops(failing[t], fresh);
            break;
        }
    }
    return result;
}

// ---- CSV --------------------------------------------------------------------

namespace {

const std::vector<std::string> kCommonColumns = {
    "seed",         "structure", "n",         "max_load",   "overflow_q",
    "backyard_size", "bits_used", "failure_kind", "op_count", "probe_hist"};

std::vector<std::string> with_extras(std::initializer_list<const char*> extras) {
    std::vector<std::string> cols = kCommonColumns;
    for (const char* e : extras) cols.emplace_back(e);
    return cols;
}

std::string hist_to_string(const std::vector<uint64_t>& hist) {
    std::string out;
    for (size_t i = 0; i < hist.size(); ++i) {
        if (i) out += '|';
        out += std::to_string(hist[i]);
    }
    return out.empty() ? "0" : out;
}

uint64_t field_value(const TrialRecord& r, const std::string& col) {
    if (col == "seed") return r.seed;
    if (col == "n") return r.n;
    if (col == "max_load") return r.max_load;
    if (col == "overflow_q") return r.overflow_q;
    if (col == "backyard_size") return r.backyard_size;
    if (col == "bits_used") return r.bits_used;
    if (col == "op_count") return r.op_count;
    if (col == "ball_count") return r.ball_count;
    if (col == "bin0_load") return r.bin0_load;
    if (col == "group_max") return r.group_max;
    if (col == "set_size") return r.set_size;
    if (col == "collisions") return r.collisions;
    if (col == "space_bits") return r.space_bits;
    if (col == "space_budget_bits") return r.space_budget_bits;
    if (col == "cat_backyard_max") return r.cat_backyard_max;
    if (col == "mismatches") return r.mismatches;
    throw std::invalid_argument("unknown column " + col);
}

}  // namespace

const std::vector<std::string>& csv_columns(const std::string& subcommand) {
    static const std::unordered_map<std::string, std::vector<std::string>> table = {
        {"load-dist", with_extras({"ball_count", "bin0_load", "group_max"})},
        {"overflow", with_extras({"ball_count"})},
        {"bits", with_extras({})},
        {"injectivity", with_extras({"set_size", "collisions"})},
        {"manysets", with_extras({"space_bits", "space_budget_bits", "cat_backyard_max"})},
        {"fuzz", with_extras({"mismatches"})},
    };
    auto it = table.find(subcommand);
    if (it == table.end()) throw std::invalid_argument("unknown subcommand " + subcommand);
    return it->second;
}

void write_csv(std::ostream& out, const std::string& subcommand,
               std::vector<TrialRecord> records) {
    const auto& cols = csv_columns(subcommand);
    std::sort(records.begin(), records.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.seed < b.seed; });
    for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : records) {
        for (size_t i = 0; i < cols.size(); ++i) {
            if (i) out << ',';
            if (cols[i] == "structure") out << r.structure;
            else if (cols[i] == "failure_kind") out << r.failure_kind;
            else if (cols[i] == "probe_hist") out << hist_to_string(r.probe_hist);
            else out << field_value(r, cols[i]);
        }
        out << '\n';
    }
}

// ---- thresholds ---------------------------------------------------------------

uint64_t probe_bound(Structure s) {
    switch (s) {
        case Structure::rotated: return 16;
        case Structure::amplified: return 64;
        case Structure::budget: return 48;
        case Structure::budget_large_u: return 80;
        case Structure::manysets: return 160;
    }
    return 0;
}

std::string check_thresholds(const std::string& subcommand, const ExperimentSpec& spec,
                             const std::vector<TrialRecord>& records) {
    std::ostringstream why;
    uint64_t ell = spec.ell ? spec.ell : default_bin_capacity(spec.n);
    if (subcommand == "load-dist") {
        for (const auto& r : records) {
            if (r.max_load > ell) {
                why << "max_load " << r.max_load << " > ell " << ell << " at seed " << r.seed;
                return why.str();
            }
            if (spec.structure == Structure::budget && r.ball_count > 0) {
                uint64_t f = BudgetTrie::fanout_for(spec.n);
                double bound = 4.0 * static_cast<double>(r.ball_count) / static_cast<double>(f);
                if (static_cast<double>(r.group_max) > bound) {
                    why << "group_max " << r.group_max << " > " << bound << " at seed " << r.seed;
                    return why.str();
                }
            }
        }
    } else if (subcommand == "overflow") {
        uint64_t threshold = spec.n / AmplifiedTrie::fanout_for(spec.n, spec.eps);
        std::vector<uint64_t> qs;
        for (const auto& r : records) {
            if (r.overflow_q >= threshold) {
                why << "overflow_q " << r.overflow_q << " >= " << threshold << " at seed "
                    << r.seed;
                return why.str();
            }
            qs.push_back(r.overflow_q);
        }
        std::sort(qs.begin(), qs.end());
        if (!qs.empty() && qs[qs.size() / 2] != 0) {
            why << "median overflow_q " << qs[qs.size() / 2] << " != 0";
            return why.str();
        }
    } else if (subcommand == "bits") {
        double lg = std::log2(static_cast<double>(spec.n));
        double bound = BudgetTrie::kBitsConstant * lg * std::log2(lg);
        for (const auto& r : records) {
            if (static_cast<double>(r.bits_used) > bound) {
                why << "bits_used " << r.bits_used << " > " << bound;
                return why.str();
            }
            if (r.bits_used != records.front().bits_used) {
                why << "bits_used differs across seeds";
                return why.str();
            }
        }
    } else if (subcommand == "injectivity") {
        uint64_t failures = 0;
        for (const auto& r : records)
            if (r.collisions > 0) ++failures;
        double rate = records.empty() ? 0.0
                                      : static_cast<double>(failures) /
                                            static_cast<double>(records.size());
        if (rate > 0.01) {
            why << "injectivity failure rate " << rate << " > 0.01";
            return why.str();
        }
    } else if (subcommand == "manysets") {
        double llog = std::log2(std::log2(static_cast<double>(spec.n)));
        double by_bound = ManySets::kBackyardConstant * static_cast<double>(spec.n) / llog;
        double cat_bound =
            ManySets::kBackyardConstant * static_cast<double>(spec.n) / (llog * llog);
        for (const auto& r : records) {
            if (static_cast<double>(r.backyard_size) > by_bound) {
                why << "backyard " << r.backyard_size << " > " << by_bound << " at seed "
                    << r.seed;
                return why.str();
            }
            if (static_cast<double>(r.cat_backyard_max) > cat_bound) {
                why << "category backyard " << r.cat_backyard_max << " > " << cat_bound
                    << " at seed " << r.seed;
                return why.str();
            }
            if (r.space_bits > r.space_budget_bits) {
                why << "space " << r.space_bits << " > budget " << r.space_budget_bits
                    << " at seed " << r.seed;
                return why.str();
            }
        }
    } else if (subcommand == "fuzz") {
        for (const auto& r : records) {
            if (r.mismatches > 0) {
                why << r.mismatches << " oracle mismatches at seed " << r.seed;
                return why.str();
            }
        }
    }
    return {};
}

}  // namespace rotrie::lab
