#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpfr_oracle.hpp"
#include "sparsepm/channel.hpp"

using namespace sparsepm;

TEST_CASE("constants at p = 1/4") {
    const ChannelParams ch = make_channel(0.25);
    // C2 = log2(3), C1 = log2(3)/2 exactly; C from the entropy closed form.
    CHECK(ch.C2 == doctest::Approx(std::log2(3.0)).epsilon(1e-15));
    CHECK(ch.C1 == doctest::Approx(0.5 * std::log2(3.0)).epsilon(1e-15));
    CHECK(ch.C == doctest::Approx(0.18872187554086713).epsilon(1e-13));
}

TEST_CASE("construction rejects the boundary") {
    CHECK_THROWS_AS(make_channel(0.0), std::domain_error);
    CHECK_THROWS_AS(make_channel(0.5), std::domain_error);
    CHECK_THROWS_AS(make_channel(-0.1), std::domain_error);
    CHECK_THROWS_AS(make_channel(0.75), std::domain_error);
}

TEST_CASE("capacity vanishes toward p = 1/2") {
    const ChannelParams ch = make_channel(0.499999);
    CHECK(ch.C > 0.0);
    CHECK(ch.C < 1e-10);
}

TEST_CASE("constants match the 256-bit oracle on the p grid") {
    for (int i = 1; i <= 45; ++i) {
        const double p = i / 100.0;
        const ChannelParams ch = make_channel(p);
        const oracle::Consts oc = oracle::consts(p);
        CHECK(std::abs(ch.C - oc.C.to_double()) <= 1e-12);
        CHECK(std::abs(ch.C1 - oc.C1.to_double()) <= 1e-12);
        CHECK(std::abs(ch.C2 - oc.C2.to_double()) <= 1e-12);
        // Algebraic identity to machine precision.
        CHECK(std::abs(ch.C1 - (ch.q - ch.p) * ch.C2) <= 1e-15);
        // Ordering C <= C1 <= C2.
        CHECK(ch.C <= ch.C1);
        CHECK(ch.C1 <= ch.C2);
    }
}

TEST_CASE("solve_p_for_capacity hits the oracle targets") {
    // Round trip of make_channel at p = 1/4.
    const double c25 = make_channel(0.25).C;
    CHECK(std::abs(solve_p_for_capacity(c25) - 0.25) <= 1e-10);

    // Bisection oracle values (256-bit) for the two headline capacities.
    const double p50 = solve_p_for_capacity(0.50);
    const double p75 = solve_p_for_capacity(0.75);
    CHECK(p50 == doctest::Approx(0.11002786443835955).epsilon(1e-9));
    CHECK(p75 == doctest::Approx(0.041692690273656696).epsilon(1e-9));
    CHECK(std::abs(bsc_capacity(p50) - 0.50) <= 1e-12);
    CHECK(std::abs(bsc_capacity(p75) - 0.75) <= 1e-12);
    CHECK(std::abs(p50 - oracle::solve_p(0.50)) <= 1e-12);
    CHECK(std::abs(p75 - oracle::solve_p(0.75)) <= 1e-12);
}

TEST_CASE("round trip and monotonicity on the grid") {
    double prev = 2.0;
    for (int i = 1; i <= 45; ++i) {
        const double p = i / 100.0;
        const double c = bsc_capacity(p);
        CHECK(c < prev);  // strictly decreasing in p
        prev = c;
        CHECK(std::abs(solve_p_for_capacity(c) - p) <= 1e-10);
    }
}

TEST_CASE("solver rejects out-of-range targets") {
    CHECK_THROWS_AS(solve_p_for_capacity(0.0), std::domain_error);
    CHECK_THROWS_AS(solve_p_for_capacity(1.0), std::domain_error);
}
