#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rotrie/random_tape.hpp"

namespace rotrie::lab {

enum class Structure { rotated, amplified, budget, budget_large_u, manysets };
enum class Workload { random_fill, adversarial_prefix, mixed_ops };

std::string to_string(Structure s);
std::string to_string(Workload w);
Structure parse_structure(const std::string& s);
Workload parse_workload(const std::string& s);

struct ExperimentSpec {
    Structure structure = Structure::rotated;
    uint64_t n = 1 << 12;
    uint64_t trials = 10;
    uint64_t seed = 1;
    Workload workload = Workload::random_fill;
    double eps = 0.5;          // amplified / backyard exponent
    int pph_c = 2;             // prime-product parameter
    int key_bits_u = 40;       // large-universe key width
    uint64_t ops = 0;          // mixed-ops length (0: default)
    uint64_t sets = 32;        // many-sets set count
    std::string p_schedule = "poly:2";
    uint32_t ell = 0;          // bin capacity override (0: default)
    int kwise_k = 8;
    uint64_t fill = 0;         // fill target for load workloads (0: default)
};

struct TrialRecord {
    uint64_t seed = 0;
    std::string structure;
    uint64_t n = 0;
    uint64_t max_load = 0;
    uint64_t overflow_q = 0;
    uint64_t backyard_size = 0;
    uint64_t bits_used = 0;
    std::string failure_kind = "none";
    uint64_t op_count = 0;
    std::vector<uint64_t> probe_hist;
    // subcommand-specific extras (all exact counts)
    uint64_t ball_count = 0;
    uint64_t bin0_load = 0;
    uint64_t group_max = 0;
    uint64_t set_size = 0;
    uint64_t collisions = 0;
    uint64_t space_bits = 0;
    uint64_t space_budget_bits = 0;
    uint64_t cat_backyard_max = 0;
    uint64_t mismatches = 0;
};

// p99.9 over a per-operation probe histogram
uint64_t probe_quantile(const std::vector<uint64_t>& hist, double q);

// Uniform dictionary view over the four key/value structures.
class DictUnderTest {
public:
    virtual ~DictUnderTest() = default;
    virtual void insert(uint64_t key, uint64_t value) = 0;
    virtual bool erase(uint64_t key) = 0;
    virtual std::optional<uint64_t> query(uint64_t key) = 0;
    virtual uint64_t total_probes() const = 0;
    virtual void fill_stats(TrialRecord& rec) const = 0;
};

std::unique_ptr<DictUnderTest> make_dict(Structure s, const ExperimentSpec& spec,
                                         RandomTape tape);

// Mutation-testing hook: silently drops every `drop_every`-th insert.
std::unique_ptr<DictUnderTest> make_faulty(std::unique_ptr<DictUnderTest> inner,
                                           uint64_t drop_every);

// ---- experiment runners ---------------------------------------------------

std::vector<TrialRecord> run_load_dist(const ExperimentSpec& spec);
std::vector<TrialRecord> run_overflow(const ExperimentSpec& spec);
std::vector<TrialRecord> run_bits(const ExperimentSpec& spec);
std::vector<TrialRecord> run_injectivity(const ExperimentSpec& spec);
std::vector<TrialRecord> run_manysets(const ExperimentSpec& spec);

struct FuzzOp {
    enum class Kind { insert, erase, query } kind;
    uint64_t set;
    uint64_t key;
    uint64_t value;
};

struct FuzzResult {
    bool pass = true;
    std::vector<FuzzOp> counterexample;  // minimized, empty when pass
    std::vector<TrialRecord> records;
};

FuzzResult run_fuzz(const ExperimentSpec& spec,
                    std::function<std::unique_ptr<DictUnderTest>(RandomTape)> dict_factory = {});

// ---- CSV ------------------------------------------------------------------

const std::vector<std::string>& csv_columns(const std::string& subcommand);
void write_csv(std::ostream& out, const std::string& subcommand,
               std::vector<TrialRecord> records);

// Built-in acceptance thresholds shared by the CLI (exit code 2) and the
// acceptance suite. Returns an empty string when all thresholds hold.
std::string check_thresholds(const std::string& subcommand, const ExperimentSpec& spec,
                             const std::vector<TrialRecord>& records);

// Documented per-structure bounds on the 99.9th-percentile per-op probe count.
uint64_t probe_bound(Structure s);

// mixed-ops workload generator (shared with tests); keeps the live set near
// live_cap and directs deletes at present keys
void mixed_ops_trial(DictUnderTest& dict, uint64_t ops, uint64_t live_cap,
                     int key_bits, RandomTape tape, std::vector<uint64_t>* hist,
                     std::vector<FuzzOp>* trace, uint64_t* mismatches);

}  // namespace rotrie::lab
