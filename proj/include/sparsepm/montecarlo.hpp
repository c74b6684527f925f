#pragma once

#include <cstdint>
#include <vector>

#include "sparsepm/bounds.hpp"
#include "sparsepm/codec.hpp"

namespace sparsepm {

struct SimPointConfig {
    int k = 16;
    double p = 0.11;        // resolved crossover probability
    double epsilon = 1e-3;
    std::int64_t trials = 10000;
    std::uint64_t master_seed = 1;
    int d_max = 12;
    Rule rule = Rule::wmad_lookahead;
    FeedbackMode feedback = FeedbackMode::sparse;
    int threads = 1;
};

struct TrialRecord {
    int tau = 0;
    int eta = 0;
    std::vector<int> d_list;               // bits per feedback packet; d_list[0] = K
    std::vector<std::uint8_t> comm_start;  // block began in the communication phase
    bool error = false;
    int comm_time = 0;  // symbols sent while the pre-symbol state was communication
    int conf_time = 0;
    std::int64_t wall_ns = 0;  // encode + decode + planning, RNG and I/O excluded
};

struct SummaryStats {
    std::int64_t trials = 0;
    double rate = 0.0;  // K / mean(tau)
    double mean_tau = 0.0;
    double mean_eta = 0.0;
    double mean_d_all = 0.0;    // all packets, systematic included
    double mean_d_exsys = 0.0;  // excluding the systematic packet
    double mean_d_comm = 0.0;   // non-systematic packets whose block began in comm phase
    double fer = 0.0;
    double tau_ci95 = 0.0;
    double eta_ci95 = 0.0;
    double rate_ci95 = 0.0;  // delta method from the tau CI
    double ns_per_1000_symbols = 0.0;
};

// One full session against a seeded BSC; noise is a deterministic function of
// (master_seed, trial_index), so any execution order reproduces it.
TrialRecord run_trial(const SimPointConfig& cfg, std::uint64_t trial_index);

SummaryStats aggregate(const std::vector<TrialRecord>& records, int k);

// Runs cfg.trials trials across cfg.threads workers; records come back in
// trial order regardless of scheduling.
std::vector<TrialRecord> run_point(const SimPointConfig& cfg);

}  // namespace sparsepm
