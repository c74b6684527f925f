#pragma once

// Brute-force per-message posterior tracker for K <= 12: the independent
// oracle the grouped representation is checked against.

#include <cmath>
#include <cstdint>
#include <vector>

#include "sparsepm/partition.hpp"
#include "sparsepm/posterior.hpp"

namespace dense {

using sparsepm::ChannelParams;
using sparsepm::GroupedPosterior;
using sparsepm::Message;
using sparsepm::SliceSet;

inline std::size_t index_of(const Message& m) {
    std::size_t idx = 0;
    for (const auto b : m) idx = (idx << 1) | b;
    return idx;
}

inline Message message_of(std::size_t idx, int k) {
    Message m(k);
    for (int i = 0; i < k; ++i) m[i] = (idx >> (k - 1 - i)) & 1u;
    return m;
}

struct DenseOracle {
    int k;
    ChannelParams ch;
    Message y_sys;
    std::vector<double> rho;

    DenseOracle(int k_, const ChannelParams& ch_, const Message& ys) : k(k_), ch(ch_), y_sys(ys) {
        rho.resize(std::size_t(1) << k);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            const int h = sparsepm::hamming_distance(message_of(i, k), y_sys);
            rho[i] = std::pow(ch.p, h) * std::pow(ch.q, k - h);
        }
        normalize();
    }

    void normalize() {
        double t = 0.0;
        for (const double v : rho) t += v;
        for (double& v : rho) v /= t;
    }

    // S0 membership mask from slices against the grouped state.
    std::vector<bool> mask_of(const GroupedPosterior& st, const SliceSet& s0) const {
        std::vector<bool> in(rho.size(), false);
        for (const auto& sl : s0) {
            for (const auto& r : st.resolve_slice(sl)) {
                for (sparsepm::bigcount o = r.lo; o < r.hi; ++o) {
                    const Message m = sparsepm::unrank({r.root_class, o}, y_sys);
                    in[index_of(m)] = true;
                }
            }
        }
        return in;
    }

    void update(const std::vector<bool>& s0, int y) {
        for (std::size_t i = 0; i < rho.size(); ++i) {
            const bool agrees = s0[i] == (y == 0);
            rho[i] *= agrees ? ch.q : ch.p;
        }
        normalize();
    }

    std::size_t argmax() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < rho.size(); ++i) {
            if (rho[i] > rho[best]) best = i;
        }
        return best;
    }

    double median() const {
        std::vector<double> v = rho;
        std::sort(v.begin(), v.end(), std::greater<double>());
        double cum = 0.0;
        for (const double x : v) {
            cum += x;
            if (cum >= 0.5) return x;
        }
        return v.back();
    }

    // Max |grouped member value - dense value| over all messages.
    double max_abs_diff(const GroupedPosterior& st) const {
        double worst = 0.0;
        for (std::uint32_t g = 0; g < st.groups().size(); ++g) {
            const auto ranges =
                st.resolve_slice(sparsepm::GroupSlice{g, 0, st.groups()[g].count});
            for (const auto& r : ranges) {
                for (sparsepm::bigcount o = r.lo; o < r.hi; ++o) {
                    const Message m = sparsepm::unrank({r.root_class, o}, y_sys);
                    worst = std::max(worst,
                                     std::abs(st.groups()[g].value - rho[index_of(m)]));
                }
            }
        }
        return worst;
    }
};

}  // namespace dense
