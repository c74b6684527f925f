#pragma once

#include "sparsepm/channel.hpp"

namespace sparsepm {

/**
 * Achievable expected-blocklength bounds for sequential transmission, used as
 * acceptance oracles for the simulator. All in channel symbols; M = 2^K.
 */
struct BoundsReport {
    double tau_com;
    double tau_conf;
    double tau_prime_com;
    double tau_binomial_com;
    double tau_b;                  // K + tau_binomial_com + tau_conf
    double rate_lower_uniform;     // K / (tau_prime_com + tau_conf)
    double rate_lower_systematic;  // K / tau_b
};

double tau_com(int k, const ChannelParams& ch, double eps);
double tau_conf(const ChannelParams& ch, double eps);
double tau_prime_com(int k, const ChannelParams& ch, double eps);
double tau_binomial_com(int k, const ChannelParams& ch, double eps);
double tau_b(int k, const ChannelParams& ch, double eps);

BoundsReport bounds_report(int k, const ChannelParams& ch, double eps);

}  // namespace sparsepm
