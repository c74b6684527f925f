#pragma once

#include "sparsepm/posterior.hpp"

namespace sparsepm {

/**
 * Binary partition of the message space, stored as group slices.
 * P0 = (1 + Delta) / 2 and P1 = (1 - Delta) / 2 by construction.
 */
struct BinaryPartition {
    SliceSet s0;
    SliceSet s1;
    double p0 = 0.0;
    double p1 = 0.0;
    double delta = 0.0;
    double min_s0_value = 0.0;  // smallest member value inside S0
};

// Derives masses, Delta and min-S0 from an explicit S0; S1 is the complement.
BinaryPartition make_partition(const GroupedPosterior& state, SliceSet s0);

// 0 <= Delta < min_{i in S0} rho_i
bool check_sed(const GroupedPosterior& state, const BinaryPartition& part);

// -min rho < Delta <= min rho over S0 (two-sided relaxation of SED)
bool check_sead(const GroupedPosterior& state, const BinaryPartition& part);

// Delta^2 <= (2/5) * rho_om; the tolerance does not depend on S0's contents.
bool check_wmad(const GroupedPosterior& state, const BinaryPartition& part);

/**
 * Single-symbol partition for the communication phase: greedy largest-first
 * fill of S0 up to mass 1/2 (a prefix of the descending member order,
 * splitting the boundary group if needed), then at most one boundary move
 * while SEAD fails. The result is asserted to pass both SEAD and WMAD.
 */
BinaryPartition build_sead_partition(const GroupedPosterior& state);

// Lighter-set greedy oriented to Delta >= 0; used by the `sed` rule. Always
// satisfies SEAD; satisfies SED except on states where no SED partition
// exists (e.g. odd uniform states, where Delta equals the minimum exactly).
BinaryPartition build_sed_partition(const GroupedPosterior& state);

// Confirmation-phase partition: S0 = the single leading message. Requires a
// member with value >= 0.5; its U-increment is then exactly +-C2.
BinaryPartition singleton_partition(const GroupedPosterior& state);

}  // namespace sparsepm
