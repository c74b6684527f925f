#pragma once

#include <optional>
#include <vector>

#include "sparsepm/partition.hpp"
#include "sparsepm/posterior.hpp"

namespace sparsepm {

/**
 * A planned block of D transmissions: 2^D bins of group slices, where bin k
 * carries label k (D bits, MSB first, bit j transmitted at step j). Budgets:
 *
 *   delta_k        = bin_mass[k] - 2^-D
 *   delta_max_bin  = delta_max_total * 2^-D   (cap on every |delta_k|)
 *   rho_min[j]     lower bound on the median posterior after j received bits
 *   delta_max_total^2 <= (2/5) rho_min[j] for every j
 *
 * delta_max_total is deflated by 1/(1 + sqrt(0.4 rho_min)), which makes the
 * realized bit-slice Delta -- whose normalizer shrinks as the posterior
 * updates -- provably WMAD-compliant for every received prefix, not only at
 * plan time.
 */
struct PartitionPlan {
    int d = 1;
    std::vector<SliceSet> bins;
    std::vector<double> bin_mass;
    std::vector<double> delta_k;
    double gamma = 0.0;
    double rho_gamma_planned = 0.0;
    std::vector<int> h_schedule;           // h_1..h_{D-1}
    std::vector<double> rho_min_schedule;  // j = 0..D-1
    double delta_max_total = 0.0;
    double delta_max_bin = 0.0;

    friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

struct GammaSearchResult {
    double gamma = 0.0;
    double rho_gamma = 0.0;            // candidate group value (planned crossing value)
    double delta_max_tentative = 0.0;  // Delta'_max
    std::vector<int> h_schedule;
    std::vector<double> rho_min_schedule;  // includes j = 0 (current true median)
};

/**
 * Threshold search: walks candidate group values downward from the median.
 * A candidate value v implies gamma(v) = cumulative mass through v's group,
 * reduced by a 2^D v reserve (so an integer allocation can overshoot
 * gamma 2^-D in every bin and still cover the threshold with members of
 * value >= v) and capped at 1 - sqrt(0.4 rho_om) (so the cap on Delta'_max
 * never binds). For each step j the smallest h_j with
 *
 *     gamma * sum_{z<=h} C(j,z) q^(j-z) p^z >= (1 + Delta'_max) / 2
 *
 * yields rho_min(j) = 2^j q^(j-h) p^h v / (1 + Delta'_max). The search keeps
 * the candidate maximizing min_j rho_min(j) and stops at the first decrease,
 * testing each distinct group value once.
 */
std::optional<GammaSearchResult> search_gamma_h(const GroupedPosterior& state, int d,
                                                const ChannelParams& ch);

struct BinAllocation {
    std::vector<SliceSet> bins;
    std::vector<double> bin_mass;
    std::vector<double> crossing_value;  // value at each bin's gamma-crossing member
};

/**
 * Greedy descending allocation. Items above the planned crossing value are
 * spread least-filled-first below gamma 2^-D (a bin may overshoot only via
 * its own crossing item); once every bin has crossed, remaining items level
 * the bins toward 2^-D. Equal-value runs are placed in bulk, reproducing the
 * one-at-a-time least-filled order with ties broken by bin index.
 * Returns nullopt if some |delta_k| ends above delta_max_bin or some bin's
 * gamma-crossing value falls below rho_gamma_planned.
 */
std::optional<BinAllocation> allocate_bins(const GroupedPosterior& state, int d, double gamma,
                                           double delta_max_bin, double rho_gamma_planned);

/**
 * Full planner: a single attempt per D, from Dmax down to 2 (skipping D
 * where one message already pigeonholes a bin), then the always-feasible
 * D = 1 plan wrapping build_sead_partition.
 */
PartitionPlan plan_block(const GroupedPosterior& state, const ChannelParams& ch, int d_max);

// S0 of the bit-slice partition at step j: bins whose label has 0 there.
SliceSet step_s0(const PartitionPlan& plan, int j);

// Index of the bin whose slices contain the tracked message.
std::uint32_t find_bin(const PartitionPlan& plan, const TrackedMessage& tracked);

/**
 * Independent safety oracle: for every step j and every received prefix,
 * computes the true posterior, the true median and the true bit-slice Delta,
 * returning max over all of (Delta^2 - 0.4 rho_om). A sound plan yields a
 * non-positive result. Enumeration is exponential in D; capped at enum_cap.
 */
double enumerate_realized_delta(const PartitionPlan& plan, const GroupedPosterior& state,
                                const ChannelParams& ch, int enum_cap = 8);

// Asserts every PartitionPlan invariant against the state; throws on violation.
void validate_plan(const PartitionPlan& plan, const GroupedPosterior& state);

}  // namespace sparsepm
