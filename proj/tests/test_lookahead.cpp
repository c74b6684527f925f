#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sparsepm/lookahead.hpp"
#include "sparsepm/rng.hpp"
#include "sparsepm/verify.hpp"

using namespace sparsepm;

namespace {

GroupedPosterior make(std::initializer_list<std::pair<double, int>> entries, double p = 0.1) {
    std::vector<std::pair<double, bigcount>> e;
    for (const auto& [v, n] : entries) e.push_back({v, static_cast<bigcount>(n)});
    return GroupedPosterior::from_values(e, make_channel(p));
}

// Independent brute-force over the same candidate set: every candidate value
// with every valid h schedule (found by plain linear scan, no early stop).
// Used to validate the planner's keep-the-max / stop-at-first-decrease logic.
struct OracleBest {
    bool found = false;
    double score = -1.0;
    double gamma = 0.0;
    double v = 0.0;
};

OracleBest oracle_search(const GroupedPosterior& st, int d, const ChannelParams& ch) {
    const MedianInfo med = st.median_value();
    const double dwmad = std::sqrt(0.4 * med.value);
    const double cap = 1.0 - dwmad;
    const double bpow = std::ldexp(1.0, d);

    OracleBest best;
    double cum = 0.0;
    for (std::size_t i = 0; i < st.groups().size(); ++i) {
        const double v = st.groups()[i].value;
        const double before = cum;
        cum += v * to_double(st.groups()[i].count);
        if (i < med.group || v <= 0.0) continue;
        if (before >= cap) break;
        const double reserve = std::min(bpow * v, 0.25 * (cum - before));
        double gamma = std::min(cum - reserve, cap);
        gamma = std::max(gamma, before + v);
        if (!(gamma > 0.5)) continue;
        const double dmax = std::min(dwmad, 1.0 - gamma);
        if (!(dmax > 0.0)) continue;
        const double target = 0.5 * (1.0 + dmax);
        double score = med.value;
        bool ok = true;
        for (int j = 1; j < d && ok; ++j) {
            int hj = -1;
            for (int h = 0; h <= j; ++h) {
                double tail = 0.0;
                for (int z = 0; z <= h; ++z) {
                    double b = 1.0;
                    for (int t = 1; t <= z; ++t) b = b * (j - z + t) / t;
                    tail += b * std::pow(ch.q, j - z) * std::pow(ch.p, z);
                }
                if (gamma * tail >= target) {
                    hj = h;
                    break;
                }
            }
            if (hj < 0) {
                ok = false;
                break;
            }
            score = std::min(score,
                             std::ldexp(1.0, j) * std::pow(ch.q, j - hj) * std::pow(ch.p, hj) *
                                 v / (1.0 + dmax));
        }
        if (!ok) {
            if (best.found) break;  // mirror the production stop rule
            continue;
        }
        if (!best.found || score > best.score) {
            best = OracleBest{true, score, gamma, v};
        } else if (score < best.score) {
            break;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("h-search convention: inclusive threshold, disagreement exponent") {
    // gamma = 0.6, Delta'_max = 0.2, p = 0.1, j = 1: the z = 0 tail gives
    // 0.6 * 0.9 = 0.54 < 0.6 so h_1 = 0 fails; the full sum gives exactly
    // 0.6 >= 0.6 so h_1 = 1 (inclusive boundary).
    const double gamma = 0.6, target = 0.5 * (1.0 + 0.2);
    CHECK(gamma * 0.9 < target);
    CHECK(gamma * (0.9 + 0.1) >= target);
    // With gamma at the lower limit (1+Delta)/2, h_j = j always works.
    CHECK(target * 1.0 >= target);
}

TEST_CASE("search matches the exhaustive candidate/h oracle") {
    // Spec case: uniform M=16, D=2, p=0.1.
    {
        const ChannelParams ch = make_channel(0.1);
        const auto st = make({{1.0 / 16, 16}});
        const auto got = search_gamma_h(st, 2, ch);
        const auto want = oracle_search(st, 2, ch);
        REQUIRE(got.has_value());
        REQUIRE(want.found);
        CHECK(got->gamma == doctest::Approx(want.gamma).epsilon(1e-12));
        CHECK(got->rho_gamma == want.v);
        double got_score = got->rho_min_schedule[0];
        for (const double r : got->rho_min_schedule) got_score = std::min(got_score, r);
        CHECK(got_score == doctest::Approx(want.score).epsilon(1e-12));
    }
    // Random states, several block sizes.
    int compared = 0;
    for (int i = 0; i < 400; ++i) {
        TrialRng rng(41, i);
        const ChannelParams ch = make_channel(0.01 + 0.45 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 48);
        if (st.top_value() >= 0.5) continue;
        const int d = 2 + static_cast<int>(rng.next_below(4));
        const auto got = search_gamma_h(st, d, ch);
        const auto want = oracle_search(st, d, ch);
        CHECK(got.has_value() == want.found);
        if (got && want.found) {
            CHECK(got->gamma == doctest::Approx(want.gamma).epsilon(1e-12));
            CHECK(got->rho_gamma == want.v);
            ++compared;
        }
    }
    CHECK(compared > 50);
}

TEST_CASE("allocation: equal singleton groups land one per bin") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = make({{0.25, 4}});
    const auto alloc = allocate_bins(st, 2, 0.8, 0.01, 0.25);
    REQUIRE(alloc.has_value());
    for (int k = 0; k < 4; ++k) {
        CHECK(slice_count(alloc->bins[k]) == 1);
        CHECK(alloc->bin_mass[k] == doctest::Approx(0.25).epsilon(1e-12));
    }
    (void)ch;
}

TEST_CASE("allocation: binomial K=4 plan satisfies every invariant") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = GroupedPosterior::systematic_init(4, ch, Message(4, 0));
    const PartitionPlan plan = plan_block(st, ch, 2);
    validate_plan(plan, st);  // throws on any violation
    CHECK(plan.d >= 1);
}

TEST_CASE("allocation: oversized top member fails by pigeonhole") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = make({{0.3, 1}, {0.7 / 7, 7}});
    // D = 2: target 0.25, and 0.3 > 0.25 + delta_max for any sane budget.
    CHECK_FALSE(allocate_bins(st, 2, 0.8, 0.01, 0.0).has_value());
}

TEST_CASE("plan_block: Dmax = 1 is the SEAD fallback") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = make({{0.3, 2}, {0.1, 4}});
    const PartitionPlan plan = plan_block(st, ch, 1);
    CHECK(plan.d == 1);
    const BinaryPartition part = build_sead_partition(st);
    CHECK(plan.bins[0] == part.s0);
    CHECK(plan.bins[1] == part.s1);
}

TEST_CASE("plan_block: uniform 2^10 state supports D >= 2") {
    const ChannelParams ch = make_channel(0.05);
    const auto st = make({{1.0 / 1024, 1024}}, 0.05);
    const PartitionPlan plan = plan_block(st, ch, 6);
    CHECK(plan.d >= 2);
    CHECK(plan.gamma > 0.5);
    for (const double rm : plan.rho_min_schedule) {
        CHECK(plan.delta_max_total * plan.delta_max_total <= 0.4 * rm + 1e-15);
    }
}

TEST_CASE("plan_block: near-degenerate state falls back to D = 1") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = make({{0.49, 1}, {0.51 / 100, 100}});
    CHECK(plan_block(st, ch, 6).d == 1);
}

TEST_CASE("planner determinism: identical state gives identical plan") {
    TrialRng rng(43, 7);
    const ChannelParams ch = make_channel(0.08);
    const GroupedPosterior st = random_instance(rng, ch, 40);
    if (st.top_value() < 0.5) {
        const PartitionPlan a = plan_block(st, ch, 5);
        const PartitionPlan b = plan_block(st, ch, 5);
        CHECK(a == b);
    }
}

TEST_CASE("realized-delta oracle: D=1 plans always have non-positive slack") {
    for (int i = 0; i < 200; ++i) {
        TrialRng rng(47, i);
        const ChannelParams ch = make_channel(0.01 + 0.45 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 48);
        if (st.top_value() >= 0.5) continue;
        const PartitionPlan plan = plan_block(st, ch, 1);
        CHECK(enumerate_realized_delta(plan, st, ch) <= 0.0);
    }
}

TEST_CASE("realized-delta oracle: emitted plans are safe, D <= 6") {
    double worst = -1.0;
    int planned = 0;
    for (int i = 0; i < 300; ++i) {
        TrialRng rng(53, i);
        const ChannelParams ch = make_channel(0.01 + 0.45 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 64);
        if (st.top_value() >= 0.5) continue;
        const PartitionPlan plan = plan_block(st, ch, 6);
        worst = std::max(worst, enumerate_realized_delta(plan, st, ch));
        ++planned;
    }
    CHECK(planned > 150);
    CHECK(worst <= 0.0);
}

TEST_CASE("realized-delta oracle flags a corrupted plan") {
    // Uniform M=4, D=2, one member moved between bins: the first bit-slice
    // then carries Delta = -1/2 against a median tolerance of 0.4/4.
    const ChannelParams ch = make_channel(0.1);
    const auto st = make({{0.25, 4}});
    PartitionPlan plan = plan_block(st, ch, 2);
    REQUIRE(plan.d == 2);
    // Move bin 0's slice into bin 2 (label bit 0 flips for that member).
    REQUIRE(slice_count(plan.bins[0]) == 1);
    plan.bins[2].push_back(plan.bins[0].front());
    plan.bins[0].clear();
    normalize_slices(plan.bins[2]);
    CHECK(enumerate_realized_delta(plan, st, ch) > 0.0);
}

TEST_CASE("step slices and bin lookup agree with the labels") {
    const ChannelParams ch = make_channel(0.1);
    const auto st = GroupedPosterior::systematic_init(6, ch, Message(6, 0));
    const PartitionPlan plan = plan_block(st, ch, 3);
    for (int j = 0; j < plan.d; ++j) {
        const SliceSet s0 = step_s0(plan, j);
        double mass = 0.0;
        for (std::size_t k = 0; k < plan.bins.size(); ++k) {
            if (((k >> (plan.d - 1 - j)) & 1u) == 0) mass += plan.bin_mass[k];
        }
        CHECK(st.mass_of(s0) == doctest::Approx(mass).epsilon(1e-12));
    }
    // Every member's bin matches the slices it sits in.
    for (std::uint32_t g = 0; g < st.groups().size(); ++g) {
        const std::uint32_t bin = find_bin(plan, TrackedMessage{g, 0});
        bool found = false;
        for (const auto& sl : plan.bins[bin]) {
            found = found || (sl.group == g && sl.offset == 0);
        }
        CHECK(found);
    }
}
