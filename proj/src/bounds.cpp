#include "sparsepm/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsepm {

namespace {

// 2^-C2 = p/q; geometric tail shared by every bound:
// 2^-C2 (1 - eps/(1-eps) 2^-C2) / (1 - 2^-C2).
double tail_factor(const ChannelParams& ch, double eps) {
    const double r = ch.p / ch.q;
    return r * (1.0 - (eps / (1.0 - eps)) * r) / (1.0 - r);
}

// log2(2^K - 1) without overflow for large K.
double log2_m_minus_1(int k) {
    return k + std::log1p(-std::exp2(static_cast<double>(-k))) / M_LN2;
}

void check_eps(double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::domain_error("bounds: eps out of (0, 0.5)");
}

}  // namespace

double tau_com(int k, const ChannelParams& ch, double eps) {
    check_eps(eps);
    return log2_m_minus_1(k) / ch.C + ch.C2 / ch.C + (ch.C2 / ch.C) * tail_factor(ch, eps);
}

double tau_conf(const ChannelParams& ch, double eps) {
    check_eps(eps);
    const double steps = std::ceil(std::log2((1.0 - eps) / eps) / ch.C2);
    return (ch.C2 / ch.C1) * (steps - tail_factor(ch, eps));
}

double tau_prime_com(int k, const ChannelParams& ch, double eps) {
    check_eps(eps);
    const double degraded = std::log2(2.0 * ch.q) / (ch.q * ch.C);
    return log2_m_minus_1(k) / ch.C + degraded * (1.0 + tail_factor(ch, eps));
}

double tau_binomial_com(int k, const ChannelParams& ch, double eps) {
    check_eps(eps);
    if (k < 1 || k > 1024) throw std::domain_error("tau_binomial_com: K out of [1, 1024]");
    const double lp = std::log(ch.p);
    const double lq = std::log(ch.q);
    const double lgk = std::lgamma(k + 1.0);
    const double degraded = std::log2(2.0 * ch.q) / (ch.q * ch.C);

    // Compensated left-to-right sum over the binomial weights with rho < 1/2.
    double sum = 0.0, comp = 0.0;
    for (int h = 0; h <= k; ++h) {
        const double log_rho = h * lp + (k - h) * lq;  // natural log of p^h q^(K-h)
        const double rho = std::exp(log_rho);
        if (!(rho < 0.5)) continue;
        const double weight = std::exp(lgk - std::lgamma(h + 1.0) - std::lgamma(k - h + 1.0) +
                                       log_rho);  // binom(K,h) * rho
        const double log2_odds = std::log1p(-rho) / M_LN2 - log_rho / M_LN2;
        const double term = (log2_odds / ch.C + degraded) * weight;
        const double t = sum + term;
        if (std::abs(sum) >= std::abs(term)) {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    return sum + comp + degraded * tail_factor(ch, eps);
}

double tau_b(int k, const ChannelParams& ch, double eps) {
    return k + tau_binomial_com(k, ch, eps) + tau_conf(ch, eps);
}

BoundsReport bounds_report(int k, const ChannelParams& ch, double eps) {
    BoundsReport r;
    r.tau_com = tau_com(k, ch, eps);
    r.tau_conf = tau_conf(ch, eps);
    r.tau_prime_com = tau_prime_com(k, ch, eps);
    r.tau_binomial_com = tau_binomial_com(k, ch, eps);
    r.tau_b = k + r.tau_binomial_com + r.tau_conf;
    r.rate_lower_uniform = k / (r.tau_prime_com + r.tau_conf);
    r.rate_lower_systematic = k / r.tau_b;
    return r;
}

}  // namespace sparsepm
