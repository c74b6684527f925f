#pragma once

#include <cmath>

namespace sparsepm {

/**
 * BSC parameterization plus the information constants every other module
 * consumes. All logarithms are base 2 (values in bits).
 *
 *   C  = 1 + p log2 p + q log2 q     channel capacity
 *   C2 = log2(q/p)                   largest one-step log-likelihood jump
 *   C1 = (q - p) C2                  confirmation-phase drift
 */
struct ChannelParams {
    double p;   // crossover probability, 0 < p < 0.5
    double q;   // 1 - p
    double C;
    double C1;
    double C2;
    double log2_p;
    double log2_q;
};

// Capacity of a BSC as a standalone function (used by the bisection solver).
double bsc_capacity(double p);

// Builds the parameter block; throws std::domain_error outside (0, 0.5).
ChannelParams make_channel(double p);

// Inverse of bsc_capacity on (0, 0.5): finds p with |C(p) - target| <= 1e-12.
// Capacity is strictly decreasing in p on this interval, so bisection suffices.
double solve_p_for_capacity(double c_target);

}  // namespace sparsepm
