#pragma once

// Independent high-precision evaluation path for the channel constants and the
// closed-form bounds. MPFR at 256 bits, test-only.

#include <mpfr.h>

#include <cmath>
#include <cstdint>

namespace oracle {

constexpr mpfr_prec_t kPrec = 256;

class Real {
public:
    Real() { mpfr_init2(v, kPrec); }
    explicit Real(double x) {
        mpfr_init2(v, kPrec);
        mpfr_set_d(v, x, MPFR_RNDN);
    }
    Real(const Real& o) {
        mpfr_init2(v, kPrec);
        mpfr_set(v, o.v, MPFR_RNDN);
    }
    Real& operator=(const Real& o) {
        mpfr_set(v, o.v, MPFR_RNDN);
        return *this;
    }
    ~Real() { mpfr_clear(v); }

    double to_double() const { return mpfr_get_d(v, MPFR_RNDN); }

    friend Real operator+(const Real& a, const Real& b) {
        Real r;
        mpfr_add(r.v, a.v, b.v, MPFR_RNDN);
        return r;
    }
    friend Real operator-(const Real& a, const Real& b) {
        Real r;
        mpfr_sub(r.v, a.v, b.v, MPFR_RNDN);
        return r;
    }
    friend Real operator*(const Real& a, const Real& b) {
        Real r;
        mpfr_mul(r.v, a.v, b.v, MPFR_RNDN);
        return r;
    }
    friend Real operator/(const Real& a, const Real& b) {
        Real r;
        mpfr_div(r.v, a.v, b.v, MPFR_RNDN);
        return r;
    }
    friend Real log2(const Real& a) {
        Real r;
        mpfr_log2(r.v, a.v, MPFR_RNDN);
        return r;
    }
    friend Real exp2(const Real& a) {
        Real r;
        mpfr_exp2(r.v, a.v, MPFR_RNDN);
        return r;
    }
    friend Real ceil(const Real& a) {
        Real r;
        mpfr_ceil(r.v, a.v);
        return r;
    }
    friend Real pow_ui(const Real& a, unsigned long e) {
        Real r;
        mpfr_pow_ui(r.v, a.v, e, MPFR_RNDN);
        return r;
    }
    friend bool operator<(const Real& a, const Real& b) { return mpfr_cmp(a.v, b.v) < 0; }
    friend bool operator>(const Real& a, const Real& b) { return mpfr_cmp(a.v, b.v) > 0; }

    mpfr_t v;
};

struct Consts {
    Real q, C, C1, C2;
};

inline Consts consts(double p) {
    Real P(p);
    Real one(1.0);
    Consts c;
    c.q = one - P;
    c.C = one + P * log2(P) + c.q * log2(c.q);
    c.C2 = log2(c.q / P);
    c.C1 = (c.q - P) * c.C2;
    return c;
}

inline double capacity(double p) { return consts(p).C.to_double(); }

// Bisection on the 256-bit capacity; independent of the library's solver.
inline double solve_p(double c_target) {
    double lo = 1e-15, hi = 0.5 - 1e-15;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (capacity(mid) > c_target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Shared geometric tail: 2^-C2 (1 - eps/(1-eps) 2^-C2) / (1 - 2^-C2).
inline Real tail(const Consts& c, double eps) {
    Real r = exp2(Real(0.0) - c.C2);
    Real E(eps);
    Real one(1.0);
    return r * (one - E / (one - E) * r) / (one - r);
}

inline Real log2_m_minus_1(int k) {
    Real m = exp2(Real(static_cast<double>(k))) - Real(1.0);
    return log2(m);
}

inline double tau_com(int k, double p, double eps) {
    const Consts c = consts(p);
    return (log2_m_minus_1(k) / c.C + c.C2 / c.C + (c.C2 / c.C) * tail(c, eps)).to_double();
}

inline double tau_conf(double p, double eps) {
    const Consts c = consts(p);
    Real E(eps);
    Real one(1.0);
    Real steps = ceil(log2((one - E) / E) / c.C2);
    return ((c.C2 / c.C1) * (steps - tail(c, eps))).to_double();
}

inline double tau_prime_com(int k, double p, double eps) {
    const Consts c = consts(p);
    Real one(1.0);
    Real degraded = log2(Real(2.0) * c.q) / (c.q * c.C);
    return (log2_m_minus_1(k) / c.C + degraded * (one + tail(c, eps))).to_double();
}

inline double tau_binomial_com(int k, double p, double eps) {
    const Consts c = consts(p);
    Real P(p);
    Real one(1.0);
    Real half(0.5);
    Real degraded = log2(Real(2.0) * c.q) / (c.q * c.C);
    Real sum(0.0);
    for (int h = 0; h <= k; ++h) {
        Real rho = pow_ui(P, static_cast<unsigned long>(h)) *
                   pow_ui(c.q, static_cast<unsigned long>(k - h));
        if (!(rho < half)) continue;
        // binom(K, h) exactly
        Real w(1.0);
        for (int i = 1; i <= h; ++i) {
            w = w * Real(static_cast<double>(k - h + i)) / Real(static_cast<double>(i));
        }
        sum = sum + (log2((one - rho) / rho) / c.C + degraded) * w * rho;
    }
    return (sum + degraded * tail(c, eps)).to_double();
}

inline double tau_b(int k, double p, double eps) {
    return k + tau_binomial_com(k, p, eps) + tau_conf(p, eps);
}

}  // namespace oracle
