#include "sparsepm/channel.hpp"

#include <stdexcept>
#include <string>

namespace sparsepm {

double bsc_capacity(double p) {
    const double q = 1.0 - p;
    return 1.0 + p * std::log2(p) + q * std::log2(q);
}

ChannelParams make_channel(double p) {
    if (!(p > 0.0)) {
        throw std::domain_error("make_channel: p must be > 0 (got " + std::to_string(p) + ")");
    }
    if (!(p < 0.5)) {
        throw std::domain_error("make_channel: p must be < 0.5 (got " + std::to_string(p) + ")");
    }
    ChannelParams ch;
    ch.p = p;
    ch.q = 1.0 - p;
    ch.log2_p = std::log2(p);
    ch.log2_q = std::log2(ch.q);
    ch.C = 1.0 + p * ch.log2_p + ch.q * ch.log2_q;
    ch.C2 = ch.log2_q - ch.log2_p;
    ch.C1 = (ch.q - p) * ch.C2;
    return ch;
}

double solve_p_for_capacity(double c_target) {
    if (!(c_target > 0.0 && c_target < 1.0)) {
        throw std::domain_error("solve_p_for_capacity: target must be in (0, 1)");
    }
    double lo = 1e-15;          // capacity ~1 here
    double hi = 0.5 - 1e-15;    // capacity ~0 here
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = bsc_capacity(mid);
        if (std::abs(c - c_target) <= 1e-13) return mid;
        if (c > c_target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace sparsepm
