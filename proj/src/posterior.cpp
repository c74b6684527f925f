#include "sparsepm/posterior.hpp"

#include <algorithm>
#include <bit>
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

constexpr std::size_t kNoChild = static_cast<std::size_t>(-1);

}  // namespace

void normalize_slices(SliceSet& s) {
    std::sort(s.begin(), s.end(), [](const GroupSlice& a, const GroupSlice& b) {
        if (a.group != b.group) return a.group < b.group;
        return a.offset < b.offset;
    });
    SliceSet out;
    for (const auto& sl : s) {
        if (sl.len == 0) continue;
        if (!out.empty() && out.back().group == sl.group &&
            out.back().offset + out.back().len == sl.offset) {
            out.back().len += sl.len;
        } else {
            out.push_back(sl);
        }
    }
    s = std::move(out);
}

bigcount slice_count(const SliceSet& s) {
    bigcount n = 0;
    for (const auto& sl : s) n += sl.len;
    return n;
}

double u_of(double value) {
    if (value <= 0.0) return -std::numeric_limits<double>::infinity();
    if (value >= 1.0) return std::numeric_limits<double>::infinity();
    return std::log2(value / (1.0 - value));
}

std::uint32_t GroupedPosterior::add_node(std::int32_t root_class, bigcount count,
                                         std::vector<Piece> pieces) {
    nodes_.push_back(Node{root_class, count, std::move(pieces)});
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

double GroupedPosterior::raw_value(const Group& g) const {
    return std::exp2(g.origin_log + g.qa * log2_q_ + g.pb * log2_p_ + lambda_);
}

GroupedPosterior GroupedPosterior::systematic_init(int k, const ChannelParams& ch,
                                                   const Message& y_sys) {
    if (k < 1) throw std::invalid_argument("systematic_init: K must be >= 1");
    if (k > 127) throw std::invalid_argument("systematic_init: K too large for 128-bit counts");
    if (static_cast<int>(y_sys.size()) != k) {
        throw std::invalid_argument("systematic_init: y_sys length mismatch");
    }
    GroupedPosterior st;
    st.k_ = k;
    st.t_ = k;
    st.log2_p_ = ch.log2_p;
    st.log2_q_ = ch.log2_q;
    st.groups_.reserve(k + 1);
    for (int h = 0; h <= k; ++h) {
        const bigcount n = binomial128(k, h);
        const std::uint32_t node = st.add_node(h, n, {});
        // value p^h q^(K-h), strictly decreasing in h for p < 0.5
        st.groups_.push_back(Group{0.0, k - h, h, 0.0, n, node});
    }
    st.total_count_ = pow2_big(k);
    st.renormalize();
    return st;
}

GroupedPosterior GroupedPosterior::from_values(
    const std::vector<std::pair<double, bigcount>>& entries, const ChannelParams& ch) {
    if (entries.empty()) throw std::invalid_argument("from_values: empty");
    GroupedPosterior st;
    st.k_ = -1;
    st.t_ = 0;
    st.log2_p_ = ch.log2_p;
    st.log2_q_ = ch.log2_q;
    bigcount total = 0;
    std::vector<Group> children;
    int root = 0;
    for (const auto& [v, n] : entries) {
        if (!(v > 0.0) || n == 0) throw std::invalid_argument("from_values: bad entry");
        const std::uint32_t node = st.add_node(root++, n, {});
        children.push_back(Group{std::log2(v), 0, 0, 0.0, n, node});
        total += n;
    }
    st.total_count_ = total;
    st.rebuild(std::move(children), nullptr, 0);
    return st;
}

void GroupedPosterior::renormalize() {
    for (auto& g : groups_) g.value = raw_value(g);
    NeumaierSum total;
    for (const auto& g : groups_) total.add(g.value * to_double(g.count));
    const double t = total.value();
    if (!(t > 0.0)) throw std::logic_error("renormalize: vanished mass");
    lambda_ -= std::log2(t);
    for (auto& g : groups_) g.value = raw_value(g);
}

// children arrive in construction order; equal-value children merge left to
// right (stable order), concatenating member orders. remap_group/remap_offset,
// when given, report where each child landed and how far its members shifted.
void GroupedPosterior::rebuild(std::vector<Group> children, RebuildRemap* remap,
                               int steps_absorbed) {
    for (auto& g : children) g.value = raw_value(g);

    std::vector<std::size_t> order(children.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return children[a].value > children[b].value;
    });

    if (remap) {
        remap->group.assign(children.size(), 0);
        remap->offset.assign(children.size(), 0);
    }

    std::vector<Group> merged;
    merged.reserve(children.size());
    std::vector<Piece> pending;  // pieces of the group currently absorbing merges

    auto flush_pending = [&]() {
        if (!pending.empty()) {
            merged.back().node = add_node(-1, merged.back().count, std::move(pending));
            pending.clear();
        }
    };

    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t idx = order[oi];
        Group& g = children[idx];
        if (!merged.empty() && merged.back().value == g.value) {
            Group& dst = merged.back();
            if (pending.empty()) pending.push_back(Piece{dst.node, 0, dst.count});
            if (remap) {
                remap->group[idx] = static_cast<std::uint32_t>(merged.size() - 1);
                remap->offset[idx] = dst.count;
            }
            pending.push_back(Piece{g.node, 0, g.count});
            dst.count += g.count;
        } else {
            flush_pending();
            if (remap) {
                remap->group[idx] = static_cast<std::uint32_t>(merged.size());
                remap->offset[idx] = 0;
            }
            merged.push_back(g);
        }
    }
    flush_pending();

    groups_ = std::move(merged);
    t_ += steps_absorbed;
    renormalize();
}

StepInfo GroupedPosterior::update_sequential(const SliceSet& s0, int y, TrackedMessage* tracked) {
    if (y != 0 && y != 1) throw std::invalid_argument("update_sequential: y must be 0/1");

    // Per-group S0 ranges; s0 is sorted by (group, offset).
    std::size_t cursor = 0;
    double p0 = 0.0;

    std::vector<Group> children;
    children.reserve(groups_.size() + s0.size() + 1);
    std::size_t tracked_child = kNoChild;
    bigcount tracked_pos = 0;

    for (std::uint32_t gi = 0; gi < groups_.size(); ++gi) {
        const Group& g = groups_[gi];
        const std::size_t first = cursor;
        bigcount in_count = 0;
        bigcount prev_end = 0;
        while (cursor < s0.size() && s0[cursor].group == gi) {
            const GroupSlice& sl = s0[cursor];
            if (sl.len == 0 || sl.offset < prev_end || sl.offset + sl.len > g.count) {
                throw std::invalid_argument("update_sequential: malformed S0 slices");
            }
            prev_end = sl.offset + sl.len;
            in_count += sl.len;
            ++cursor;
        }
        const std::size_t last = cursor;
        p0 += g.value * to_double(in_count);

        const std::int32_t in_qa = g.qa + (y == 0 ? 1 : 0);
        const std::int32_t in_pb = g.pb + (y == 0 ? 0 : 1);
        const std::int32_t out_qa = g.qa + (y == 1 ? 1 : 0);
        const std::int32_t out_pb = g.pb + (y == 1 ? 0 : 1);

        const bool has_in = in_count > 0;
        const bool has_out = in_count < g.count;
        if (has_in && has_out) ++splits_;

        std::size_t in_child = kNoChild;
        std::size_t out_child = kNoChild;

        if (has_in) {
            std::uint32_t node = g.node;
            if (has_out) {
                std::vector<Piece> pieces;
                pieces.reserve(last - first);
                for (std::size_t i = first; i < last; ++i) {
                    pieces.push_back(Piece{g.node, s0[i].offset, s0[i].len});
                }
                node = add_node(-1, in_count, std::move(pieces));
            }
            in_child = children.size();
            children.push_back(Group{g.origin_log, in_qa, in_pb, 0.0, in_count, node});
        }
        if (has_out) {
            std::uint32_t node = g.node;
            if (has_in) {
                std::vector<Piece> pieces;
                bigcount at = 0;
                for (std::size_t i = first; i < last; ++i) {
                    if (s0[i].offset > at) pieces.push_back(Piece{g.node, at, s0[i].offset - at});
                    at = s0[i].offset + s0[i].len;
                }
                if (at < g.count) pieces.push_back(Piece{g.node, at, g.count - at});
                node = add_node(-1, g.count - in_count, std::move(pieces));
            }
            out_child = children.size();
            children.push_back(Group{g.origin_log, out_qa, out_pb, 0.0, g.count - in_count, node});
        }

        if (tracked && tracked->group == gi) {
            bigcount in_before = 0;   // S0 members preceding pos
            bool inside = false;
            bigcount local = 0;
            for (std::size_t i = first; i < last; ++i) {
                if (tracked->pos >= s0[i].offset && tracked->pos < s0[i].offset + s0[i].len) {
                    inside = true;
                    local = in_before + (tracked->pos - s0[i].offset);
                    break;
                }
                if (s0[i].offset + s0[i].len <= tracked->pos) in_before += s0[i].len;
            }
            if (inside) {
                tracked_child = in_child;
                tracked_pos = local;
            } else {
                tracked_child = out_child;
                tracked_pos = tracked->pos - in_before;
            }
        }
    }
    if (cursor != s0.size()) {
        throw std::invalid_argument("update_sequential: S0 references unknown groups");
    }

    RebuildRemap remap;
    rebuild(std::move(children), tracked ? &remap : nullptr, 1);
    if (tracked) {
        if (tracked_child == kNoChild) {
            throw std::logic_error("update_sequential: tracked message lost");
        }
        tracked->group = remap.group[tracked_child];
        tracked->pos = tracked_pos + remap.offset[tracked_child];
    }
    return StepInfo{p0, 1.0 - p0, 2.0 * p0 - 1.0};
}

void GroupedPosterior::update_block(std::span<const SliceSet> bins, int d,
                                    const std::vector<int>& y_bits, TrackedMessage* tracked) {
    const int j = static_cast<int>(y_bits.size());
    if (j < 1) throw std::invalid_argument("update_block: empty block");
    if (j > d) throw std::invalid_argument("update_block: more bits than the block size");
    if (bins.size() != (static_cast<std::size_t>(1) << d)) {
        throw std::invalid_argument("update_block: bin count != 2^D");
    }

    // Hamming distance between the received prefix and each label prefix.
    std::vector<int> zof(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        int z = 0;
        for (int i = 0; i < j; ++i) {
            z += (static_cast<int>((k >> (d - 1 - i)) & 1u) != y_bits[i]);
        }
        zof[k] = z;
    }

    // Collect, per group, its slices across all bins tagged with the bin's z.
    struct Part {
        bigcount offset;
        bigcount len;
        std::uint32_t bin;
        int z;
    };
    std::vector<std::vector<Part>> parts(groups_.size());
    for (std::uint32_t b = 0; b < bins.size(); ++b) {
        for (const auto& sl : bins[b]) {
            if (sl.group >= groups_.size() || sl.offset + sl.len > groups_[sl.group].count) {
                throw std::invalid_argument("update_block: slice outside state");
            }
            if (sl.len == 0) continue;
            parts[sl.group].push_back(Part{sl.offset, sl.len, b, zof[b]});
        }
    }

    std::vector<Group> children;
    children.reserve(groups_.size() * (j + 1));
    std::size_t tracked_child = kNoChild;
    bigcount tracked_pos = 0;

    for (std::uint32_t gi = 0; gi < groups_.size(); ++gi) {
        const Group& g = groups_[gi];
        auto& pv = parts[gi];
        // Deterministic member order within each z-class: (bin, offset).
        std::sort(pv.begin(), pv.end(), [](const Part& a, const Part& b) {
            if (a.bin != b.bin) return a.bin < b.bin;
            return a.offset < b.offset;
        });
        bigcount covered = 0;
        for (const auto& p : pv) covered += p.len;
        if (covered != g.count) {
            throw std::invalid_argument("update_block: bins do not tile the state");
        }
        int child_classes = 0;
        for (int z = 0; z <= j; ++z) {
            bigcount n = 0;
            bool identity = true;  // class pieces form [0, count) in order
            bigcount at = 0;
            for (const auto& p : pv) {
                if (p.z != z) continue;
                if (p.offset != at) identity = false;
                at = p.offset + p.len;
                n += p.len;
            }
            if (n == 0) continue;
            ++child_classes;
            std::uint32_t node;
            if (identity && n == g.count) {
                node = g.node;
            } else {
                std::vector<Piece> pieces;
                for (const auto& p : pv) {
                    if (p.z == z) pieces.push_back(Piece{g.node, p.offset, p.len});
                }
                node = add_node(-1, n, std::move(pieces));
            }
            if (tracked && tracked->group == gi && tracked_child == kNoChild) {
                bigcount before = 0;
                for (const auto& p : pv) {
                    if (p.z != z) continue;
                    if (tracked->pos >= p.offset && tracked->pos < p.offset + p.len) {
                        tracked_child = children.size();
                        tracked_pos = before + (tracked->pos - p.offset);
                        break;
                    }
                    before += p.len;
                }
            }
            children.push_back(
                Group{g.origin_log, g.qa + (j - z), g.pb + z, 0.0, n, node});
        }
        if (child_classes > 1) splits_ += child_classes - 1;
    }

    RebuildRemap remap;
    rebuild(std::move(children), tracked ? &remap : nullptr, j);
    if (tracked) {
        if (tracked_child == kNoChild) throw std::logic_error("update_block: tracked message lost");
        tracked->group = remap.group[tracked_child];
        tracked->pos = tracked_pos + remap.offset[tracked_child];
    }
}

MedianInfo GroupedPosterior::median_value() const {
    NeumaierSum cum;
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        const Group& g = groups_[i];
        const double before = cum.value();
        const double mass = g.value * to_double(g.count);
        if (before + mass >= 0.5 && g.value > 0.0) {
            double n = std::ceil((0.5 - before) / g.value);
            n = std::max(1.0, std::min(n, to_double(g.count)));
            const double at = before + n * g.value;
            return MedianInfo{g.value, std::max(0.0, 2.0 * at - 1.0), i};
        }
        cum.add(mass);
    }
    throw std::logic_error("median_value: cumulative sum never crossed 1/2");
}

double GroupedPosterior::quantile_value(double gamma) const {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("quantile_value: gamma out of (0, 1]");
    }
    NeumaierSum cum;
    double last_nonzero = 0.0;
    for (const auto& g : groups_) {
        if (g.value <= 0.0) break;
        last_nonzero = g.value;
        cum.add(g.value * to_double(g.count));
        if (cum.value() >= gamma) return g.value;
    }
    // gamma = 1 with rounding shortfall: the defining member is the last nonzero one.
    if (last_nonzero > 0.0) return last_nonzero;
    throw std::logic_error("quantile_value: state has no mass");
}

double GroupedPosterior::mass_of(const SliceSet& s) const {
    NeumaierSum sum;
    for (const auto& sl : s) {
        if (sl.group >= groups_.size() || sl.offset + sl.len > groups_[sl.group].count) {
            throw std::invalid_argument("mass_of: slice outside state");
        }
        sum.add(groups_[sl.group].value * to_double(sl.len));
    }
    return sum.value();
}

double GroupedPosterior::total_mass() const {
    NeumaierSum sum;
    for (const auto& g : groups_) sum.add(g.value * to_double(g.count));
    return sum.value();
}

TrackedMessage GroupedPosterior::track_from_root(const MessageLocator& loc) const {
    for (std::uint32_t gi = 0; gi < groups_.size(); ++gi) {
        const Node& n = nodes_[groups_[gi].node];
        if (n.root_class == loc.root_class) {
            if (loc.ordinal >= groups_[gi].count) {
                throw std::out_of_range("track_from_root: ordinal out of range");
            }
            return TrackedMessage{gi, loc.ordinal};
        }
    }
    throw std::logic_error("track_from_root: state is not in root form");
}

MessageLocator GroupedPosterior::resolve_member(std::uint32_t group, bigcount pos) const {
    if (group >= groups_.size() || pos >= groups_[group].count) {
        throw std::out_of_range("resolve_member: bad position");
    }
    std::uint32_t node = groups_[group].node;
    while (nodes_[node].root_class < 0) {
        const Node& n = nodes_[node];
        bigcount before = 0;
        bool found = false;
        for (const auto& p : n.pieces) {
            if (pos < before + p.len) {
                pos = p.offset + (pos - before);
                node = p.node;
                found = true;
                break;
            }
            before += p.len;
        }
        if (!found) throw std::logic_error("resolve_member: corrupt lineage tree");
    }
    return MessageLocator{nodes_[node].root_class, pos};
}

std::vector<RootRange> GroupedPosterior::resolve_slice_ordered(const GroupSlice& s) const {
    if (s.group >= groups_.size() || s.offset + s.len > groups_[s.group].count) {
        throw std::out_of_range("resolve_slice: bad slice");
    }
    std::vector<RootRange> out;
    struct Item {
        std::uint32_t node;
        bigcount lo;
        bigcount hi;
    };
    // Depth-first, pushing pieces in reverse so pops come out in member order.
    std::vector<Item> stack{{groups_[s.group].node, s.offset, s.offset + s.len}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        const Node& n = nodes_[it.node];
        if (n.root_class >= 0) {
            out.push_back(RootRange{n.root_class, it.lo, it.hi});
            continue;
        }
        bigcount before = 0;
        std::vector<Item> local;
        for (const auto& p : n.pieces) {
            const bigcount lo = std::max(it.lo, before);
            const bigcount hi = std::min(it.hi, before + p.len);
            if (lo < hi) {
                local.push_back(Item{p.node, p.offset + (lo - before), p.offset + (hi - before)});
            }
            before += p.len;
        }
        for (auto rit = local.rbegin(); rit != local.rend(); ++rit) stack.push_back(*rit);
    }
    return out;
}

std::vector<RootRange> GroupedPosterior::resolve_slice(const GroupSlice& s) const {
    std::vector<RootRange> out = resolve_slice_ordered(s);
    std::sort(out.begin(), out.end(), [](const RootRange& a, const RootRange& b) {
        if (a.root_class != b.root_class) return a.root_class < b.root_class;
        return a.lo < b.lo;
    });
    std::vector<RootRange> coalesced;
    for (const auto& r : out) {
        if (!coalesced.empty() && coalesced.back().root_class == r.root_class &&
            coalesced.back().hi == r.lo) {
            coalesced.back().hi = r.hi;
        } else {
            coalesced.push_back(r);
        }
    }
    return coalesced;
}

std::uint64_t GroupedPosterior::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(k_));
    mix(static_cast<std::uint64_t>(t_));
    mix(std::bit_cast<std::uint64_t>(lambda_));
    for (const auto& g : groups_) {
        mix(std::bit_cast<std::uint64_t>(g.origin_log));
        mix(static_cast<std::uint64_t>(g.qa));
        mix(static_cast<std::uint64_t>(g.pb));
        mix(std::bit_cast<std::uint64_t>(g.value));
        mix(static_cast<std::uint64_t>(g.count));
        mix(static_cast<std::uint64_t>(g.count >> 64));
        mix(static_cast<std::uint64_t>(g.node));
    }
    return h;
}

void GroupedPosterior::check_valid(bool protocol_state) const {
    bigcount total = 0;
    std::vector<RootRange> all;
    for (std::size_t i = 0; i < groups_.size(); ++i) {
        const Group& g = groups_[i];
        if (g.count == 0) throw std::logic_error("check_valid: empty group");
        if (!(g.value >= 0.0)) throw std::logic_error("check_valid: negative value");
        if (i > 0 && !(groups_[i - 1].value > g.value)) {
            throw std::logic_error("check_valid: values not strictly decreasing");
        }
        total += g.count;
        auto ranges = resolve_slice(GroupSlice{static_cast<std::uint32_t>(i), 0, g.count});
        bigcount resolved = 0;
        for (const auto& r : ranges) resolved += r.size();
        if (resolved != g.count) throw std::logic_error("check_valid: lineage count mismatch");
        all.insert(all.end(), ranges.begin(), ranges.end());
    }
    if (total != total_count_) throw std::logic_error("check_valid: total count drifted");

    std::sort(all.begin(), all.end(), [](const RootRange& a, const RootRange& b) {
        if (a.root_class != b.root_class) return a.root_class < b.root_class;
        return a.lo < b.lo;
    });
    for (std::size_t i = 1; i < all.size(); ++i) {
        if (all[i].root_class == all[i - 1].root_class && all[i].lo < all[i - 1].hi) {
            throw std::logic_error("check_valid: overlapping lineage ranges");
        }
    }
    if (protocol_state) {
        if (total != pow2_big(k_)) throw std::logic_error("check_valid: count != 2^K");
        bigcount per_class = 0;
        int cls = all.empty() ? 0 : all.front().root_class;
        auto flush = [&](int c) {
            if (per_class != binomial128(k_, c)) {
                throw std::logic_error("check_valid: class size != binom(K, h)");
            }
        };
        for (const auto& r : all) {
            if (r.root_class != cls) {
                flush(cls);
                cls = r.root_class;
                per_class = 0;
            }
            per_class += r.size();
        }
        if (!all.empty()) flush(cls);
    }
    const double mass = total_mass();
    if (std::abs(mass - 1.0) > 1e-9) throw std::logic_error("check_valid: mass not normalized");
}

}  // namespace sparsepm
