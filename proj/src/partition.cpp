#include "sparsepm/partition.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsepm {

namespace {

// S0 from per-group take counts; slices take each group's leading members.
SliceSet s0_from_taken(const std::vector<bigcount>& taken) {
    SliceSet s0;
    for (std::uint32_t i = 0; i < taken.size(); ++i) {
        if (taken[i] > 0) s0.push_back(GroupSlice{i, 0, taken[i]});
    }
    return s0;
}

}  // namespace

BinaryPartition make_partition(const GroupedPosterior& state, SliceSet s0) {
    normalize_slices(s0);
    const auto& groups = state.groups();

    BinaryPartition part;
    part.s0 = std::move(s0);

    double p0 = 0.0;
    double min_s0 = 0.0;
    std::size_t cursor = 0;
    for (std::uint32_t gi = 0; gi < groups.size(); ++gi) {
        bigcount in = 0;
        bigcount prev_end = 0;
        while (cursor < part.s0.size() && part.s0[cursor].group == gi) {
            const auto& sl = part.s0[cursor];
            if (sl.offset < prev_end || sl.offset + sl.len > groups[gi].count) {
                throw std::invalid_argument("make_partition: malformed S0 slices");
            }
            prev_end = sl.offset + sl.len;
            in += sl.len;
            ++cursor;
        }
        if (in > 0) {
            p0 += groups[gi].value * to_double(in);
            min_s0 = groups[gi].value;  // descending order: last hit is the minimum
        }
    }
    if (cursor != part.s0.size()) {
        throw std::invalid_argument("make_partition: S0 references unknown groups");
    }

    // S1 = complement, group by group.
    std::size_t i = 0;
    for (std::uint32_t gi = 0; gi < groups.size(); ++gi) {
        bigcount at = 0;
        while (i < part.s0.size() && part.s0[i].group == gi) {
            if (part.s0[i].offset > at) {
                part.s1.push_back(GroupSlice{gi, at, part.s0[i].offset - at});
            }
            at = part.s0[i].offset + part.s0[i].len;
            ++i;
        }
        if (at < groups[gi].count) {
            part.s1.push_back(GroupSlice{gi, at, groups[gi].count - at});
        }
    }

    part.p0 = p0;
    part.p1 = 1.0 - p0;
    part.delta = p0 - part.p1;
    part.min_s0_value = min_s0;
    return part;
}

bool check_sed(const GroupedPosterior&, const BinaryPartition& part) {
    return part.delta >= 0.0 && part.delta < part.min_s0_value;
}

bool check_sead(const GroupedPosterior&, const BinaryPartition& part) {
    return part.delta > -part.min_s0_value && part.delta <= part.min_s0_value;
}

bool check_wmad(const GroupedPosterior& state, const BinaryPartition& part) {
    const double rho_om = state.median_value().value;
    return part.delta * part.delta <= 0.4 * rho_om;
}

namespace {

// Greedy largest-first fill of S0 up to mass 1/2. With stop_at_boundary the
// fill ends at the first member that does not fit (S0 is a prefix of the
// member order); otherwise smaller members keep filling the remaining room.
std::vector<bigcount> greedy_fill(const GroupedPosterior& state, bool stop_at_boundary) {
    const auto& groups = state.groups();
    std::vector<bigcount> taken(groups.size(), 0);
    double p0 = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double v = groups[i].value;
        if (v <= 0.0) break;
        const double room = 0.5 - p0;
        if (room < v) {
            if (stop_at_boundary) break;
            continue;
        }
        double n = std::floor(room / v);
        n = std::min(n, to_double(groups[i].count));
        const bigcount take =
            (n >= to_double(groups[i].count)) ? groups[i].count : static_cast<bigcount>(n);
        taken[i] = take;
        p0 += to_double(take) * v;
        if (take < groups[i].count && stop_at_boundary) break;
    }
    return taken;
}

// Members go one at a time to the lighter set; for a run of n equal values
// the end state is the balanced split, computed in closed form. Oriented to
// Delta >= 0.
BinaryPartition balanced_fill(const GroupedPosterior& state) {
    const auto& groups = state.groups();
    std::vector<bigcount> taken(groups.size(), 0);
    double p0 = 0.0;
    double p1 = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double v = groups[i].value;
        const bigcount n = groups[i].count;
        if (v <= 0.0) continue;  // zero-mass members all land in S1
        double k0;
        if (n == 1) {
            k0 = (p0 <= p1) ? 1.0 : 0.0;
        } else {
            k0 = std::round((to_double(n) + (p1 - p0) / v) / 2.0);
            k0 = std::max(0.0, std::min(k0, to_double(n)));
        }
        const bigcount take = (k0 >= to_double(n)) ? n : static_cast<bigcount>(k0);
        taken[i] = take;
        p0 += to_double(take) * v;
        p1 += to_double(n - take) * v;
    }

    BinaryPartition part = make_partition(state, s0_from_taken(taken));
    if (part.delta < 0.0) {
        std::swap(part.s0, part.s1);
        std::swap(part.p0, part.p1);
        part.delta = -part.delta;
        part.min_s0_value = 0.0;
        std::size_t i = 0;
        for (std::uint32_t gi = 0; gi < groups.size(); ++gi) {
            bool hit = false;
            while (i < part.s0.size() && part.s0[i].group == gi) {
                hit = true;
                ++i;
            }
            if (hit && groups[gi].value > 0.0) part.min_s0_value = groups[gi].value;
        }
    }
    return part;
}

}  // namespace

BinaryPartition build_sead_partition(const GroupedPosterior& state) {
    const auto& groups = state.groups();
    if (state.total_count() < 2) {
        throw std::invalid_argument("build_sead_partition: need at least 2 messages");
    }

    // Deterministic candidate cascade. The prefix greedy keeps min-S0 large
    // (good for SEAD) but can leave |Delta| past the WMAD tolerance when the
    // boundary member is fat; the continuing greedy closes that gap with
    // smaller members; the balanced fill drives |Delta| below the smallest
    // member value. The first candidate passing both rules wins.
    for (const bool stop_at_boundary : {true, false}) {
        std::vector<bigcount> taken = greedy_fill(state, stop_at_boundary);
        for (int moves = 0; moves < 64; ++moves) {
            BinaryPartition part = make_partition(state, s0_from_taken(taken));
            if (check_sead(state, part) && check_wmad(state, part)) return part;
            if (part.delta > 0.0) break;  // boundary moves only repair the left bound
            std::size_t next = 0;
            while (next < groups.size() && taken[next] == groups[next].count) ++next;
            if (next >= groups.size() || groups[next].value <= 0.0) break;
            taken[next] += 1;
        }
    }
    BinaryPartition part = balanced_fill(state);
    if (check_sead(state, part) && check_wmad(state, part)) return part;
    throw std::logic_error("build_sead_partition: no candidate satisfied SEAD and WMAD");
}

BinaryPartition build_sed_partition(const GroupedPosterior& state) {
    if (state.total_count() < 2) {
        throw std::invalid_argument("build_sed_partition: need at least 2 messages");
    }
    BinaryPartition part = balanced_fill(state);
    if (!check_sead(state, part)) {
        throw std::logic_error("build_sed_partition: SEAD violated");
    }
    return part;
}

BinaryPartition singleton_partition(const GroupedPosterior& state) {
    if (!(state.top_value() >= 0.5)) {
        throw std::invalid_argument("singleton_partition: no member value >= 0.5");
    }
    return make_partition(state, SliceSet{GroupSlice{0, 0, 1}});
}

}  // namespace sparsepm
