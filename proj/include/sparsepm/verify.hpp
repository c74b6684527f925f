#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsepm/partition.hpp"
#include "sparsepm/rng.hpp"

namespace sparsepm {

struct DriftReport {
    double drift;  // exact E[U_theta(t+1) - U_theta(t) | y^t], bits
    double slack;  // drift - C
};

// Exact one-step drift of the true-message log-likelihood ratio, expanded
// over every (member, outcome) pair via the four-case posterior update.
// No Jensen bounding. Throws on members with value >= 1 - 1e-15.
DriftReport exact_drift(const GroupedPosterior& state, const BinaryPartition& part,
                        const ChannelParams& ch);

// Drift and per-outcome U-increments of the leading member under a singleton
// partition, conditioned on it being the true message. The increments are
// +-C2 and the drift (q - p) C2 = C1, up to rounding.
struct SingletonDrift {
    double drift;
    double up_step;    // confirming outcome
    double down_step;  // disconfirming outcome
};
SingletonDrift singleton_member_drift(const GroupedPosterior& state, const BinaryPartition& part,
                                      const ChannelParams& ch);

// Jensen-slack polynomial from the drift proof. The printed form in the
// source carries a sign typo in the trailing product (its own next line
// requires the + below); this is the algebraically consistent version:
//
//   f = [D(1-2R)(1+d) + rho(1+d)]/(1-rho) - D(2D + (1-2R)(1+d))
//
// Nonnegative over D^2 <= (2/5) rho, R in [0,1], d in [0, rho].
double f_jensen(double delta, double r, double small_delta, double rho);

struct CheckResult {
    std::string name;
    std::int64_t instances;
    double worst;      // worst observed slack / deviation / margin
    double tolerance;  // pass iff worst >= -tolerance
    bool pass;
};

// Random-instance generators shared by the checks and the tests.
GroupedPosterior random_instance(TrialRng& rng, const ChannelParams& ch, int max_m);
BinaryPartition random_wmad_partition(TrialRng& rng, const GroupedPosterior& state,
                                      double delta_band_lo = 0.0);

// WMAD-compliant random instances: exact drift must stay >= C.
CheckResult check_wmad_implies_C(std::int64_t trials, std::uint64_t seed);

// Singleton identities: drift C1, |U-step| C2, both to 1e-12.
CheckResult check_singleton_identities(std::int64_t trials, std::uint64_t seed);

// U-increments never exceed C2 for any partition and outcome.
CheckResult check_increment_cap(std::int64_t trials, std::uint64_t seed);

// f over the worst-case substitution grid, breakpoints included exactly.
CheckResult grid_check_f();

// Joint (Delta, R, delta, rho) sampling of f, guarding the reduction itself.
CheckResult spot_check_f_joint(std::int64_t trials, std::uint64_t seed);

// Block update vs sequential composition; worst relative deviation.
CheckResult check_block_identity(std::int64_t trials, int d_max, std::uint64_t seed);

// Per-message conditional drift E[U_i(t+1) - U_i(t) | theta = i] > 0 on
// WMAD-compliant instances, including |Delta| near the 1/3 boundary.
CheckResult check_constraint_11(std::int64_t trials, std::uint64_t seed);

std::vector<CheckResult> run_all_checks(std::int64_t trials, std::uint64_t seed);

// Informational probe past the WMAD boundary: returns the most negative drift
// slack found among partitions violating the rule by a small margin.
double adversarial_slack_probe(std::int64_t trials, std::uint64_t seed);

}  // namespace sparsepm
