#include "sparsepm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sparsepm/lookahead.hpp"

namespace sparsepm {

namespace {

// Per-member U-increment, cancellation-free: the normalizer is expanded as
// positive masses (rest of the member's side, then the other side), so near-1
// posteriors never pass through a subtraction.
//   agree outcome:    log2(2q(1-v)) - log2(2q(S_same - v) + 2p S_other)
//   disagree outcome: log2(2p(1-v)) - log2(2p(S_same - v) + 2q S_other)
struct MemberSteps {
    double up;    // channel agrees with the member's side
    double down;  // channel disagrees
};

MemberSteps member_steps(double v, double rest_same, double other, const ChannelParams& ch) {
    MemberSteps s;
    s.up = std::log2(2.0 * ch.q * (1.0 - v)) -
           std::log2(2.0 * ch.q * rest_same + 2.0 * ch.p * other);
    s.down = std::log2(2.0 * ch.p * (1.0 - v)) -
             std::log2(2.0 * ch.p * rest_same + 2.0 * ch.q * other);
    return s;
}

// Members of each group inside S0 (prefix convention used by the generators).
std::vector<bigcount> s0_counts(const GroupedPosterior& state, const BinaryPartition& part) {
    std::vector<bigcount> in(state.groups().size(), 0);
    for (const auto& sl : part.s0) in[sl.group] += sl.len;
    return in;
}

}  // namespace

DriftReport exact_drift(const GroupedPosterior& state, const BinaryPartition& part,
                        const ChannelParams& ch) {
    const auto& groups = state.groups();
    const auto in = s0_counts(state, part);

    for (const auto& g : groups) {
        if (g.value >= 1.0 - 1e-15) {
            throw std::domain_error("exact_drift: degenerate instance (value ~ 1)");
        }
    }

    double drift = 0.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double v = groups[gi].value;
        if (v <= 0.0) continue;
        const bigcount n0 = in[gi];
        const bigcount n1 = groups[gi].count - n0;
        if (n0 > 0) {
            const MemberSteps s = member_steps(v, part.p0 - v, part.p1, ch);
            drift += to_double(n0) * v * (ch.q * s.up + ch.p * s.down);
        }
        if (n1 > 0) {
            const MemberSteps s = member_steps(v, part.p1 - v, part.p0, ch);
            drift += to_double(n1) * v * (ch.q * s.up + ch.p * s.down);
        }
    }
    return DriftReport{drift, drift - ch.C};
}

SingletonDrift singleton_member_drift(const GroupedPosterior& state, const BinaryPartition& part,
                                      const ChannelParams& ch) {
    if (slice_count(part.s0) != 1) {
        throw std::invalid_argument("singleton_member_drift: S0 is not a singleton");
    }
    const double v = state.groups()[part.s0.front().group].value;
    const MemberSteps s = member_steps(v, 0.0, part.p1, ch);
    return SingletonDrift{ch.q * s.up + ch.p * s.down, s.up, s.down};
}

double f_jensen(double delta, double r, double small_delta, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::domain_error("f_jensen: rho out of (0, 1)");
    const double od = 1.0 + small_delta;
    return (delta * (1.0 - 2.0 * r) * od + rho * od) / (1.0 - rho) -
           delta * (2.0 * delta + (1.0 - 2.0 * r) * od);
}

GroupedPosterior random_instance(TrialRng& rng, const ChannelParams& ch, int max_m) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        const int m = 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_m - 1)));
        const bool grouped = rng.next_below(4) == 0;
        std::vector<std::pair<double, bigcount>> entries;
        entries.reserve(m);
        int members = 0;
        while (members < m) {
            double u = rng.next_double();
            if (u <= 0.0) u = 1e-18;
            const double w = -std::log(u);
            bigcount c = 1;
            if (grouped) c = 1 + rng.next_below(8);
            if (members + static_cast<int>(c) > m) c = static_cast<bigcount>(m - members);
            entries.push_back({w / to_double(c), c});
            members += static_cast<int>(c);
        }
        GroupedPosterior st = GroupedPosterior::from_values(entries, ch);
        if (st.top_value() <= 1.0 - 1e-6) return st;
    }
    throw std::logic_error("random_instance: could not draw a non-degenerate state");
}

BinaryPartition random_wmad_partition(TrialRng& rng, const GroupedPosterior& state,
                                      double delta_band_lo) {
    const auto& groups = state.groups();
    const double rho_om = state.median_value().value;
    const double dmax = std::sqrt(0.4 * rho_om);
    for (int attempt = 0; attempt < 500; ++attempt) {
        SliceSet s0;
        bigcount taken = 0;
        for (std::uint32_t g = 0; g < groups.size(); ++g) {
            const bigcount n = rng.next_below(static_cast<std::uint64_t>(groups[g].count) + 1);
            if (n > 0) {
                s0.push_back(GroupSlice{g, 0, n});
                taken += n;
            }
        }
        if (taken == 0 || taken == state.total_count()) continue;
        BinaryPartition part = make_partition(state, std::move(s0));
        if (!(part.p0 > 0.0 && part.p1 > 0.0)) continue;
        if (std::abs(part.delta) > dmax) continue;
        if (std::abs(part.delta) < delta_band_lo) continue;
        return part;
    }
    return build_sead_partition(state);
}

CheckResult check_wmad_implies_C(std::int64_t trials, std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0x57AD0000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.005 + 0.49 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 64);
        const BinaryPartition part = random_wmad_partition(rng, st);
        worst = std::min(worst, exact_drift(st, part, ch).slack);
    }
    return CheckResult{"wmad-implies-C", trials, worst, 1e-9, worst >= -1e-9};
}

CheckResult check_singleton_identities(std::int64_t trials, std::uint64_t seed) {
    double worst = 0.0;  // most negative of -(deviation)
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0x51D60000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.005 + 0.49 * rng.next_double());
        // Leading value in [0.5, 1), the rest Dirichlet over the remainder.
        const double top = 0.5 + 0.4999 * rng.next_double();
        const int m = 1 + static_cast<int>(rng.next_below(16));
        std::vector<double> w(m);
        double tw = 0.0;
        for (auto& x : w) {
            x = -std::log(std::max(rng.next_double(), 1e-18));
            tw += x;
        }
        std::vector<std::pair<double, bigcount>> entries{{top, 1}};
        for (const double x : w) entries.push_back({(1.0 - top) * x / tw, 1});
        const GroupedPosterior st = GroupedPosterior::from_values(entries, ch);
        if (st.top_value() < 0.5 || st.top_value() >= 1.0 - 1e-9) continue;

        const BinaryPartition part = singleton_partition(st);
        const SingletonDrift s = singleton_member_drift(st, part, ch);
        const double dev = std::max({std::abs(s.drift - ch.C1), std::abs(s.up_step - ch.C2),
                                     std::abs(-s.down_step - ch.C2)});
        worst = std::min(worst, -dev);
    }
    return CheckResult{"singleton-identities", trials, worst, 1e-12, worst >= -1e-12};
}

CheckResult check_increment_cap(std::int64_t trials, std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();  // min of C2 - step
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0x1CAB0000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.005 + 0.49 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 64);
        // Any partition, not only WMAD-compliant ones.
        SliceSet s0;
        bigcount taken = 0;
        for (std::uint32_t g = 0; g < st.groups().size(); ++g) {
            const bigcount n = rng.next_below(static_cast<std::uint64_t>(st.groups()[g].count) + 1);
            if (n > 0) {
                s0.push_back(GroupSlice{g, 0, n});
                taken += n;
            }
        }
        if (taken == 0 || taken == st.total_count()) continue;
        const BinaryPartition part = make_partition(st, std::move(s0));
        if (!(part.p0 > 0.0 && part.p1 > 0.0)) continue;

        const auto in = s0_counts(st, part);
        for (std::size_t g = 0; g < st.groups().size(); ++g) {
            const double v = st.groups()[g].value;
            if (v <= 0.0 || v >= 1.0 - 1e-12) continue;
            if (in[g] > 0) {
                const MemberSteps s = member_steps(v, part.p0 - v, part.p1, ch);
                worst = std::min({worst, ch.C2 - s.up, ch.C2 - s.down});
            }
            if (in[g] < st.groups()[g].count) {
                const MemberSteps s = member_steps(v, part.p1 - v, part.p0, ch);
                worst = std::min({worst, ch.C2 - s.up, ch.C2 - s.down});
            }
        }
    }
    return CheckResult{"increment-cap-C2", trials, worst, 1e-12, worst >= -1e-12};
}

CheckResult grid_check_f() {
    // Worst-case substitution Delta(1-2R) = -alpha realized as (Delta, R) = (alpha, 1).
    const double breakpoints[] = {1.0 / 10, 49.0 / 250, 5.0 / 18, 2.0 / 5, 5.0 / 8, 3.0 / 4, 1.0};
    std::vector<double> rhos;
    for (double r = 1e-6; r < 1.0; r += 1e-3) rhos.push_back(r);
    for (const double b : breakpoints) rhos.push_back(b);
    std::sort(rhos.begin(), rhos.end());

    double worst = std::numeric_limits<double>::infinity();
    std::int64_t n = 0;
    for (const double rho : rhos) {
        if (rho >= 1.0 - 1e-15) continue;  // f -> +infinity as rho -> 1
        const double amax = std::sqrt(0.4 * rho);
        for (int ai = 0; ai <= 100; ++ai) {
            const double alpha = amax * ai / 100.0;
            for (int di = 0; di <= 10; ++di) {
                const double sd = rho * di / 10.0;  // delta in [0, rho]
                worst = std::min(worst, f_jensen(alpha, 1.0, sd, rho));
                ++n;
            }
        }
    }
    return CheckResult{"f-grid", n, worst, 1e-12, worst >= -1e-12};
}

CheckResult spot_check_f_joint(std::int64_t trials, std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0xF0170000 + static_cast<std::uint64_t>(i));
        const double rho = 1e-6 + (0.999 - 1e-6) * rng.next_double();
        const double sd = rho * rng.next_double();
        const double r = rng.next_double();
        double delta = std::sqrt(0.4 * rho) * rng.next_double();
        if (rng.next_bit()) delta = -delta;
        worst = std::min(worst, f_jensen(delta, r, sd, rho));
    }
    return CheckResult{"f-joint-sampling", trials, worst, 1e-12, worst >= -1e-12};
}

namespace {

// Root ranges of one bit-slice partition, taken against the plan's state.
std::vector<RootRange> root_set_of(const GroupedPosterior& state, const SliceSet& slices) {
    std::vector<RootRange> out;
    for (const auto& sl : slices) {
        auto r = state.resolve_slice(sl);
        out.insert(out.end(), r.begin(), r.end());
    }
    std::sort(out.begin(), out.end(), [](const RootRange& a, const RootRange& b) {
        if (a.root_class != b.root_class) return a.root_class < b.root_class;
        return a.lo < b.lo;
    });
    return out;
}

bigcount overlap_in_set(const std::vector<RootRange>& set, const RootRange& r,
                        std::vector<std::pair<bigcount, bigcount>>& parts) {
    parts.clear();
    bigcount covered = 0;
    for (const auto& s : set) {
        if (s.root_class != r.root_class || s.hi <= r.lo || s.lo >= r.hi) continue;
        const bigcount lo = std::max(s.lo, r.lo);
        const bigcount hi = std::min(s.hi, r.hi);
        parts.push_back({lo, hi});
        covered += hi - lo;
    }
    std::sort(parts.begin(), parts.end());
    return covered;
}

// Express a root-space member set as slices of the current state.
SliceSet slices_from_root_set(const GroupedPosterior& state, const std::vector<RootRange>& set) {
    SliceSet out;
    std::vector<std::pair<bigcount, bigcount>> parts;
    for (std::uint32_t g = 0; g < state.groups().size(); ++g) {
        const auto ranges =
            state.resolve_slice_ordered(GroupSlice{g, 0, state.groups()[g].count});
        bigcount pos = 0;
        for (const auto& r : ranges) {
            overlap_in_set(set, r, parts);
            for (const auto& [lo, hi] : parts) {
                out.push_back(GroupSlice{g, pos + (lo - r.lo), hi - lo});
            }
            pos += r.size();
        }
    }
    normalize_slices(out);
    return out;
}

}  // namespace

CheckResult check_block_identity(std::int64_t trials, int d_max, std::uint64_t seed) {
    double worst = 0.0;  // most negative of -(relative deviation)
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0xB10C0000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.01 + 0.47 * rng.next_double());
        GroupedPosterior st = random_instance(rng, ch, 48);
        if (st.top_value() >= 0.5) continue;  // planner wants a communication-phase state

        const int want_d = 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                                   std::max(1, d_max - 1))));
        const PartitionPlan plan = plan_block(st, ch, want_d);

        const int j = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(plan.d)));
        std::vector<int> y(j);
        for (auto& b : y) b = rng.next_bit() ? 1 : 0;

        GroupedPosterior via_block = st;
        via_block.update_block(std::span<const SliceSet>(plan.bins), plan.d, y);

        GroupedPosterior via_seq = st;
        for (int step = 0; step < j; ++step) {
            const auto rs = root_set_of(st, step_s0(plan, step));
            via_seq.update_sequential(slices_from_root_set(via_seq, rs), y[step]);
        }

        const auto& ga = via_block.groups();
        const auto& gb = via_seq.groups();
        if (ga.size() != gb.size()) {
            worst = -std::numeric_limits<double>::infinity();
            break;
        }
        for (std::size_t g = 0; g < ga.size(); ++g) {
            if (ga[g].count != gb[g].count) {
                worst = -std::numeric_limits<double>::infinity();
                break;
            }
            const double ref = std::max(gb[g].value, 1e-300);
            worst = std::min(worst, -std::abs(ga[g].value - gb[g].value) / ref);
        }
    }
    return CheckResult{"block-identity", trials, worst, 1e-10, worst >= -1e-10};
}

CheckResult check_constraint_11(std::int64_t trials, std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0xC0110000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.005 + 0.49 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 64);
        // Every 8th instance aims for the |Delta| ~ 1/3 boundary.
        const double band = (i % 8 == 7) ? 0.28 : 0.0;
        const BinaryPartition part = random_wmad_partition(rng, st, band);

        const auto in = s0_counts(st, part);
        for (std::size_t g = 0; g < st.groups().size(); ++g) {
            const double v = st.groups()[g].value;
            if (v <= 0.0 || v >= 1.0 - 1e-9) continue;
            if (in[g] > 0) {
                const MemberSteps s = member_steps(v, part.p0 - v, part.p1, ch);
                worst = std::min(worst, ch.q * s.up + ch.p * s.down);
            }
            if (in[g] < st.groups()[g].count) {
                const MemberSteps s = member_steps(v, part.p1 - v, part.p0, ch);
                worst = std::min(worst, ch.q * s.up + ch.p * s.down);
            }
        }
    }
    return CheckResult{"per-message-drift-positive", trials, worst, 0.0, worst > 0.0};
}

double adversarial_slack_probe(std::int64_t trials, std::uint64_t seed) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialRng rng(seed, 0xADDA0000 + static_cast<std::uint64_t>(i));
        const ChannelParams ch = make_channel(0.005 + 0.49 * rng.next_double());
        const GroupedPosterior st = random_instance(rng, ch, 16);
        const double rho_om = st.median_value().value;
        const double lo = std::sqrt(0.4 * rho_om);
        // Partitions just past the tolerance: |Delta| in (lo, min(3 lo, 0.9)].
        for (int attempt = 0; attempt < 200; ++attempt) {
            SliceSet s0;
            bigcount taken = 0;
            for (std::uint32_t g = 0; g < st.groups().size(); ++g) {
                const bigcount n =
                    rng.next_below(static_cast<std::uint64_t>(st.groups()[g].count) + 1);
                if (n > 0) {
                    s0.push_back(GroupSlice{g, 0, n});
                    taken += n;
                }
            }
            if (taken == 0 || taken == st.total_count()) continue;
            const BinaryPartition part = make_partition(st, std::move(s0));
            if (!(part.p0 > 0.0 && part.p1 > 0.0)) continue;
            const double ad = std::abs(part.delta);
            if (ad <= lo || ad > std::min(3.0 * lo, 0.9)) continue;
            worst = std::min(worst, exact_drift(st, part, ch).slack);
            break;
        }
    }
    return worst;
}

std::vector<CheckResult> run_all_checks(std::int64_t trials, std::uint64_t seed) {
    const std::int64_t light = std::max<std::int64_t>(trials / 10, 100);
    std::vector<CheckResult> out;
    out.push_back(check_wmad_implies_C(trials, seed));
    out.push_back(check_singleton_identities(light, seed));
    out.push_back(check_increment_cap(light, seed));
    out.push_back(grid_check_f());
    out.push_back(spot_check_f_joint(trials, seed));
    out.push_back(check_block_identity(light, 6, seed));
    out.push_back(check_constraint_11(trials, seed));
    return out;
}

}  // namespace sparsepm
