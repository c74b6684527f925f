#include "sparsepm/lookahead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sparsepm {

namespace {

struct NeumaierSum {
    double s = 0.0;
    double c = 0.0;
    void add(double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    double value() const { return s + c; }
};

// Crossing value of a descending slice list at mass threshold tau, or 0 if the
// cumulative sum never reaches it. Slices sorted by group = sorted by value.
double crossing_value(const GroupedPosterior& state, const SliceSet& slices, double tau) {
    double cum = 0.0;
    for (const auto& sl : slices) {
        const double v = state.groups()[sl.group].value;
        cum += v * to_double(sl.len);
        if (cum >= tau) return v;
    }
    return 0.0;
}

}  // namespace

std::optional<GammaSearchResult> search_gamma_h(const GroupedPosterior& state, int d,
                                                const ChannelParams& ch) {
    if (d < 2) return std::nullopt;
    const auto& groups = state.groups();
    const MedianInfo med = state.median_value();
    const double rho_om = med.value;
    const double dwmad = std::sqrt(0.4 * rho_om);
    const double gamma_cap = 1.0 - dwmad;
    const double bpow = std::ldexp(1.0, d);

    // Powers and cumulative binomial tails: cum[j][h] = sum_{z<=h} C(j,z) q^(j-z) p^z.
    std::vector<double> qpow(d + 1, 1.0), ppow(d + 1, 1.0);
    for (int i = 1; i <= d; ++i) {
        qpow[i] = qpow[i - 1] * ch.q;
        ppow[i] = ppow[i - 1] * ch.p;
    }
    std::vector<std::vector<double>> binom(d, std::vector<double>(d, 0.0));
    for (int j = 0; j < d; ++j) {
        binom[j][0] = 1.0;
        for (int z = 1; z <= j; ++z) {
            binom[j][z] = binom[j - 1][z - 1] + (z <= j - 1 ? binom[j - 1][z] : 0.0);
        }
    }

    GammaSearchResult best;
    double best_score = -std::numeric_limits<double>::infinity();
    bool have = false;

    NeumaierSum cum;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double v = groups[i].value;
        const double cum_before = cum.value();
        cum.add(v * to_double(groups[i].count));
        const double cum_end = cum.value();
        if (i < med.group) continue;
        if (v <= 0.0) break;
        if (cum_before >= gamma_cap) break;  // gamma cannot land inside deeper groups

        // Reserve headroom for integer-allocation overshoot: up to one item
        // per bin, but never more than a quarter of the candidate group (an
        // exactly divisible group overshoots nothing).
        const double reserve = std::min(bpow * v, 0.25 * (cum_end - cum_before));
        double gamma = std::min(cum_end - reserve, gamma_cap);
        gamma = std::max(gamma, cum_before + v);

        bool feasible = gamma > 0.5;
        double dmax_t = 0.0;
        if (feasible) {
            dmax_t = std::min(dwmad, 1.0 - gamma);
            feasible = dmax_t > 0.0;
        }

        std::vector<int> h_sched;
        std::vector<double> rho_min;
        if (feasible) {
            const double target = 0.5 * (1.0 + dmax_t);
            h_sched.assign(d - 1, 0);
            rho_min.assign(d, 0.0);
            rho_min[0] = rho_om;
            for (int j = 1; j < d && feasible; ++j) {
                int hj = -1;
                double tail = 0.0;
                for (int z = 0; z <= j; ++z) {
                    tail += binom[j][z] * qpow[j - z] * ppow[z];
                    if (gamma * tail >= target) {
                        hj = z;
                        break;
                    }
                }
                if (hj < 0) {
                    feasible = false;
                    break;
                }
                h_sched[j - 1] = hj;
                rho_min[j] = std::ldexp(1.0, j) * qpow[j - hj] * ppow[hj] * v / (1.0 + dmax_t);
            }
        }

        if (!feasible) {
            if (have) break;
            continue;
        }
        double score = rho_min[0];
        for (int j = 1; j < d; ++j) score = std::min(score, rho_min[j]);

        if (!have || score > best_score) {
            best = GammaSearchResult{gamma, v, dmax_t, std::move(h_sched), std::move(rho_min)};
            best_score = score;
            have = true;
        } else if (score < best_score) {
            break;  // first decrease ends the search
        }
    }
    if (!have) return std::nullopt;
    return best;
}

namespace {

struct TakeLog {
    std::uint32_t group;
    std::uint32_t bin;
    bigcount n;
};

class Allocator {
public:
    Allocator(const GroupedPosterior& state, int d, double gamma)
        : state_(state),
          bins_(static_cast<std::size_t>(1) << d),
          tau_(gamma * std::ldexp(1.0, -d)),
          mass_(bins_, 0.0),
          below_tau_(bins_) {}

    // Distributes one equal-value run; phase 1 (below tau) then phase 2.
    void place_group(std::uint32_t gi) {
        const double v = state_.groups()[gi].value;
        bigcount rem = state_.groups()[gi].count;
        while (rem > 0) {
            if (v <= 0.0) {
                spread_zero(gi, rem);
                return;
            }
            if (below_tau_ > 0) {
                active_.clear();
                for (std::uint32_t k = 0; k < bins_; ++k) {
                    if (mass_[k] < tau_) active_.push_back(k);
                }
                if (try_cross_all(gi, v, rem)) continue;
                water_fill(gi, active_, rem, v);
                return;
            }
            all_.resize(bins_);
            for (std::uint32_t k = 0; k < bins_; ++k) all_[k] = k;
            water_fill(gi, all_, rem, v);
            return;
        }
    }

    const std::vector<TakeLog>& log() const { return log_; }
    const std::vector<double>& mass() const { return mass_; }

private:
    // If the run can push every active bin across tau, do it and return true.
    bool try_cross_all(std::uint32_t gi, double v, bigcount& rem) {
        double total_d = 0.0;
        for (const std::uint32_t k : active_) {
            total_d += std::max(1.0, std::ceil((tau_ - mass_[k]) / v));
            if (total_d > to_double(rem)) return false;
        }
        bigcount total = 0;
        scratch_.clear();
        for (const std::uint32_t k : active_) {
            const double nd = std::max(1.0, std::ceil((tau_ - mass_[k]) / v));
            const bigcount nb = static_cast<bigcount>(nd);
            scratch_.push_back(nb);
            total += nb;
        }
        if (total > rem) return false;
        for (std::size_t i = 0; i < active_.size(); ++i) {
            give(gi, active_[i], scratch_[i], v);
        }
        rem -= total;
        return true;
    }

    // Bulk least-filled-first fill. Pouring n items one at a time can only
    // ever touch the n least-filled candidates, so select those, level them
    // in closed form and hand out the rounding leftovers lowest-first.
    void water_fill(std::uint32_t gi, std::vector<std::uint32_t>& idx, bigcount n, double v) {
        const double n_d = to_double(n);
        auto lighter = [&](std::uint32_t a, std::uint32_t b) {
            if (mass_[a] != mass_[b]) return mass_[a] < mass_[b];
            return a < b;
        };
        std::size_t cap = idx.size();
        if (n_d < static_cast<double>(cap)) {
            cap = static_cast<std::size_t>(n);
            std::nth_element(idx.begin(), idx.begin() + cap, idx.end(), lighter);
        }
        std::sort(idx.begin(), idx.begin() + cap, lighter);

        // Frontier: the longest prefix the budget can level to its next mass.
        double prefix = 0.0;
        std::size_t f = 1;
        for (; f < cap; ++f) {
            prefix += mass_[idx[f - 1]];
            const double cost = (f * mass_[idx[f]] - prefix) / v;
            if (cost > n_d) break;
        }
        double base = 0.0;
        for (std::size_t t = 0; t < f; ++t) base += mass_[idx[t]];
        const double level = (base + n_d * v) / static_cast<double>(f);

        // Floor-level counts, clamped to the remaining budget while assigning:
        // for huge counts the double arithmetic is only ~1e-16 relative, so
        // the clamp trims (or the leftover path adds) a vanishing mass.
        bigcount handed = 0;
        bigcount budget = n;
        scratch_.assign(f, 0);
        for (std::size_t t = 0; t < f; ++t) {
            double cnt = std::floor((level - mass_[idx[t]]) / v);
            cnt = std::max(0.0, std::min(cnt, n_d));
            bigcount take = static_cast<bigcount>(cnt);
            take = std::min(take, budget);
            scratch_[t] = take;
            budget -= take;
            handed += take;
        }
        for (std::size_t t = 0; t < f; ++t) {
            if (scratch_[t] > 0) give(gi, idx[t], scratch_[t], v);
        }

        // Leftovers: whole rounds across the frontier, then one each to the
        // lightest bins.
        bigcount left = n - handed;
        const bigcount rounds = left / f;
        if (rounds > 0) {
            for (std::size_t t = 0; t < f; ++t) give(gi, idx[t], rounds, v);
            left -= rounds * f;
        }
        if (left > 0) {
            std::sort(idx.begin(), idx.begin() + f, lighter);
            for (std::size_t t = 0; t < static_cast<std::size_t>(left); ++t) {
                give(gi, idx[t], 1, v);
            }
        }
    }

    // Zero-valued members cannot move any mass; deal them round-robin.
    void spread_zero(std::uint32_t gi, bigcount n) {
        all_.resize(bins_);
        for (std::uint32_t k = 0; k < bins_; ++k) all_[k] = k;
        std::sort(all_.begin(), all_.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (mass_[a] != mass_[b]) return mass_[a] < mass_[b];
            return a < b;
        });
        const bigcount rounds = n / bins_;
        const bigcount extra = n % bins_;
        for (std::size_t t = 0; t < all_.size(); ++t) {
            bigcount amount = rounds + ((static_cast<bigcount>(t) < extra) ? 1 : 0);
            if (amount > 0) give(gi, all_[t], amount, 0.0);
        }
    }

    void give(std::uint32_t gi, std::uint32_t bin, bigcount n, double v) {
        const double before = mass_[bin];
        mass_[bin] = before + to_double(n) * v;
        if (before < tau_ && mass_[bin] >= tau_) --below_tau_;
        if (!log_.empty() && log_.back().group == gi && log_.back().bin == bin) {
            log_.back().n += n;
        } else {
            log_.push_back(TakeLog{gi, bin, n});
        }
    }

    const GroupedPosterior& state_;
    std::size_t bins_;
    double tau_;
    std::vector<double> mass_;
    std::size_t below_tau_;
    std::vector<std::uint32_t> active_;
    std::vector<std::uint32_t> all_;
    std::vector<bigcount> scratch_;
    std::vector<TakeLog> log_;
};

}  // namespace

std::optional<BinAllocation> allocate_bins(const GroupedPosterior& state, int d, double gamma,
                                           double delta_max_bin, double rho_gamma_planned) {
    const auto& groups = state.groups();
    const std::size_t nbins = static_cast<std::size_t>(1) << d;
    const double target = std::ldexp(1.0, -d);
    const double tau = gamma * target;

    if (state.total_count() < static_cast<bigcount>(nbins)) return std::nullopt;
    // Pigeonhole: the largest member alone would blow a bin's budget.
    if (!groups.empty() && groups.front().value > target + delta_max_bin) return std::nullopt;

    Allocator alloc(state, d, gamma);
    for (std::uint32_t gi = 0; gi < groups.size(); ++gi) alloc.place_group(gi);

    // Gamma-crossing audit straight from the allocation log (which runs in
    // descending value order).
    std::vector<double> cross(nbins, 0.0);
    std::vector<double> cum(nbins, 0.0);
    for (const auto& take : alloc.log()) {
        if (cross[take.bin] != 0.0) continue;
        cum[take.bin] += groups[take.group].value * to_double(take.n);
        if (cum[take.bin] >= tau) cross[take.bin] = groups[take.group].value;
    }
    for (std::size_t k = 0; k < nbins; ++k) {
        if (cross[k] == 0.0 || cross[k] < rho_gamma_planned) return std::nullopt;
    }

    // Materialize slices; each group's members are dealt in log order.
    BinAllocation out;
    out.bins.assign(nbins, SliceSet{});
    std::vector<bigcount> cursor(groups.size(), 0);
    for (const auto& take : alloc.log()) {
        out.bins[take.bin].push_back(GroupSlice{take.group, cursor[take.group], take.n});
        cursor[take.group] += take.n;
    }
    for (auto& b : out.bins) normalize_slices(b);

    out.bin_mass.assign(nbins, 0.0);
    for (std::size_t k = 0; k < nbins; ++k) {
        NeumaierSum m;
        for (const auto& sl : out.bins[k]) {
            m.add(groups[sl.group].value * to_double(sl.len));
        }
        out.bin_mass[k] = m.value();
        if (std::abs(out.bin_mass[k] - target) > delta_max_bin) return std::nullopt;
    }
    out.crossing_value = std::move(cross);
    return out;
}

PartitionPlan plan_block(const GroupedPosterior& state, const ChannelParams& ch, int d_max) {
    if (d_max < 1) throw std::invalid_argument("plan_block: Dmax must be >= 1");
    const MedianInfo med = state.median_value();
    const double dwmad = std::sqrt(0.4 * med.value);
    const double top = state.top_value();

    int d_hi = std::min(d_max, 62);
    while (d_hi >= 2 && state.total_count() < (static_cast<bigcount>(1) << d_hi)) --d_hi;
    // One message per bin is the hard ceiling; skipping these D is equivalent
    // to failing their allocation at the pigeonhole check.
    while (d_hi >= 2 && std::ldexp(1.0 + dwmad, -d_hi) < top) --d_hi;

    for (int d = d_hi; d >= 2; --d) {
        auto sr = search_gamma_h(state, d, ch);
        if (!sr) continue;

        // Budget that survives the shrinking normalizer of future updates:
        // u/(1-u) <= sqrt(0.4 rho_min) with u = s/(1+s).
        double dmax = sr->delta_max_tentative;
        for (const double rm : sr->rho_min_schedule) {
            const double s = std::sqrt(0.4 * rm);
            dmax = std::min(dmax, s / (1.0 + s));
        }
        const double dmb = dmax * std::ldexp(1.0, -d);

        auto alloc = allocate_bins(state, d, sr->gamma, dmb, sr->rho_gamma);
        if (!alloc) continue;

        PartitionPlan plan;
        plan.d = d;
        plan.bins = std::move(alloc->bins);
        plan.bin_mass = std::move(alloc->bin_mass);
        plan.delta_k.resize(plan.bin_mass.size());
        const double target = std::ldexp(1.0, -d);
        for (std::size_t k = 0; k < plan.bin_mass.size(); ++k) {
            plan.delta_k[k] = plan.bin_mass[k] - target;
        }
        plan.gamma = sr->gamma;
        plan.rho_gamma_planned = sr->rho_gamma;
        plan.h_schedule = std::move(sr->h_schedule);
        plan.rho_min_schedule = std::move(sr->rho_min_schedule);
        plan.delta_max_total = dmax;
        plan.delta_max_bin = dmb;
        validate_plan(plan, state);
        return plan;
    }

    // D = 1: always feasible via the single-symbol SEAD partition.
    BinaryPartition part = build_sead_partition(state);
    PartitionPlan plan;
    plan.d = 1;
    plan.bins = {part.s0, part.s1};
    plan.bin_mass = {part.p0, part.p1};
    plan.delta_k = {part.p0 - 0.5, part.p1 - 0.5};
    plan.delta_max_bin = std::max(std::abs(plan.delta_k[0]), std::abs(plan.delta_k[1]));
    plan.delta_max_total = 2.0 * plan.delta_max_bin;
    plan.rho_min_schedule = {med.value};
    plan.gamma = (1.0 - std::abs(part.delta)) * (1.0 - 1e-12);
    plan.rho_gamma_planned = std::min(crossing_value(state, part.s0, 0.5 * plan.gamma),
                                      crossing_value(state, part.s1, 0.5 * plan.gamma));
    validate_plan(plan, state);
    return plan;
}

SliceSet step_s0(const PartitionPlan& plan, int j) {
    if (j < 0 || j >= plan.d) throw std::invalid_argument("step_s0: step out of range");
    SliceSet s0;
    for (std::size_t k = 0; k < plan.bins.size(); ++k) {
        if (((k >> (plan.d - 1 - j)) & 1u) == 0) {
            s0.insert(s0.end(), plan.bins[k].begin(), plan.bins[k].end());
        }
    }
    normalize_slices(s0);
    return s0;
}

std::uint32_t find_bin(const PartitionPlan& plan, const TrackedMessage& tracked) {
    for (std::uint32_t k = 0; k < plan.bins.size(); ++k) {
        for (const auto& sl : plan.bins[k]) {
            if (sl.group == tracked.group && tracked.pos >= sl.offset &&
                tracked.pos < sl.offset + sl.len) {
                return k;
            }
        }
    }
    throw std::logic_error("find_bin: tracked message not covered by the plan");
}

double enumerate_realized_delta(const PartitionPlan& plan, const GroupedPosterior& state,
                                const ChannelParams& ch, int enum_cap) {
    if (plan.d > enum_cap) {
        throw std::invalid_argument("enumerate_realized_delta: block size above enumeration cap");
    }
    double worst = -std::numeric_limits<double>::infinity();

    // Original bin masses and per-prefix coefficient exponents.
    const std::size_t nbins = plan.bins.size();
    std::vector<double> m0(nbins, 0.0);
    for (std::size_t k = 0; k < nbins; ++k) {
        for (const auto& sl : plan.bins[k]) {
            m0[k] += state.groups()[sl.group].value * to_double(sl.len);
        }
    }

    for (int j = 0; j < plan.d; ++j) {
        for (std::uint32_t prefix = 0; prefix < (1u << j); ++prefix) {
            std::vector<int> y(j);
            for (int i = 0; i < j; ++i) y[i] = static_cast<int>((prefix >> (j - 1 - i)) & 1u);

            // True Delta of the bit-slice partition at step j given this prefix.
            double num0 = 0.0, num1 = 0.0;
            for (std::size_t k = 0; k < nbins; ++k) {
                int z = 0;
                for (int i = 0; i < j; ++i) {
                    z += (static_cast<int>((k >> (plan.d - 1 - i)) & 1u) != y[i]);
                }
                const double c = std::pow(ch.q, j - z) * std::pow(ch.p, z);
                if (((k >> (plan.d - 1 - j)) & 1u) == 0) {
                    num0 += c * m0[k];
                } else {
                    num1 += c * m0[k];
                }
            }
            const double delta = (num0 - num1) / (num0 + num1);

            double rho_om;
            if (j == 0) {
                rho_om = state.median_value().value;
            } else {
                GroupedPosterior st = state;
                st.update_block(std::span<const SliceSet>(plan.bins), plan.d, y);
                rho_om = st.median_value().value;
            }
            worst = std::max(worst, delta * delta - 0.4 * rho_om);
        }
    }
    return worst;
}

void validate_plan(const PartitionPlan& plan, const GroupedPosterior& state) {
    const std::size_t nbins = static_cast<std::size_t>(1) << plan.d;
    if (plan.bins.size() != nbins || plan.bin_mass.size() != nbins ||
        plan.delta_k.size() != nbins) {
        throw std::logic_error("validate_plan: wrong bin arity");
    }
    if (plan.rho_min_schedule.size() != static_cast<std::size_t>(plan.d) ||
        plan.h_schedule.size() != static_cast<std::size_t>(plan.d - 1)) {
        throw std::logic_error("validate_plan: wrong schedule arity");
    }
    if (plan.d >= 2 && !(plan.gamma > 0.5)) {
        throw std::logic_error("validate_plan: gamma must exceed 1/2");
    }

    // Bins tile every group exactly.
    std::vector<std::vector<std::pair<bigcount, bigcount>>> spans(state.groups().size());
    for (const auto& b : plan.bins) {
        for (const auto& sl : b) {
            if (sl.group >= state.groups().size()) {
                throw std::logic_error("validate_plan: slice beyond state");
            }
            spans[sl.group].push_back({sl.offset, sl.len});
        }
    }
    for (std::uint32_t g = 0; g < state.groups().size(); ++g) {
        auto& sp = spans[g];
        std::sort(sp.begin(), sp.end());
        bigcount at = 0;
        for (const auto& [off, len] : sp) {
            if (off != at) throw std::logic_error("validate_plan: bins overlap or gap");
            at += len;
        }
        if (at != state.groups()[g].count) {
            throw std::logic_error("validate_plan: bins do not cover the state");
        }
    }

    NeumaierSum total;
    const double target = std::ldexp(1.0, -plan.d);
    const double tau = plan.gamma * target;
    for (std::size_t k = 0; k < nbins; ++k) {
        total.add(plan.bin_mass[k]);
        if (std::abs(plan.delta_k[k] - (plan.bin_mass[k] - target)) > 1e-15) {
            throw std::logic_error("validate_plan: delta_k inconsistent with bin mass");
        }
        if (std::abs(plan.delta_k[k]) > plan.delta_max_bin) {
            throw std::logic_error("validate_plan: bin budget exceeded");
        }
        const double cv = crossing_value(state, plan.bins[k], tau);
        if (cv <= 0.0 || cv < plan.rho_gamma_planned) {
            throw std::logic_error("validate_plan: bin gamma-crossing below plan");
        }
    }
    if (std::abs(total.value() - 1.0) > 2e-12) {
        throw std::logic_error("validate_plan: bin masses do not sum to 1");
    }
    if (std::abs(plan.delta_max_bin - plan.delta_max_total * target) > 1e-15) {
        throw std::logic_error("validate_plan: budget scaling inconsistent");
    }
    for (const double rm : plan.rho_min_schedule) {
        if (plan.delta_max_total * plan.delta_max_total > 0.4 * rm + 1e-15) {
            throw std::logic_error("validate_plan: Delta budget above WMAD tolerance");
        }
    }
}

}  // namespace sparsepm
