#include "sparsepm/block_cursor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparsepm {

BlockCursor::BlockCursor(GroupedPosterior& st, std::span<const SliceSet> bins, int d)
    : st_(st), d_(d) {
    if (d < 1 || bins.size() != (static_cast<std::size_t>(1) << d)) {
        throw std::invalid_argument("BlockCursor: bin count != 2^D");
    }
    for (std::uint32_t b = 0; b < bins.size(); ++b) {
        for (const auto& sl : bins[b]) {
            if (sl.group >= st.groups().size() ||
                sl.offset + sl.len > st.groups()[sl.group].count) {
                throw std::invalid_argument("BlockCursor: slice outside state");
            }
            if (sl.len == 0) continue;
            pieces_.push_back(BPiece{sl.group, b, sl.offset, sl.len, 0});
        }
    }
    // Bins must tile every group exactly. Bucket by group; the small
    // per-group lists sort fast.
    std::vector<std::vector<std::pair<bigcount, bigcount>>> spans(st.groups().size());
    for (const auto& p : pieces_) spans[p.group].push_back({p.offset, p.len});
    for (std::uint32_t g = 0; g < st.groups().size(); ++g) {
        auto& sp = spans[g];
        std::sort(sp.begin(), sp.end());
        bigcount at = 0;
        for (const auto& [off, len] : sp) {
            if (off != at) throw std::invalid_argument("BlockCursor: bins do not tile the state");
            at += len;
        }
        if (at != st.groups()[g].count) {
            throw std::invalid_argument("BlockCursor: bins do not tile the state");
        }
    }
}

void BlockCursor::build_factors() const {
    if (factors_j_ == j_) return;
    factors_.assign(j_ + 1, 0.0);
    for (int z = 0; z <= j_; ++z) {
        factors_[z] = std::exp2((j_ - z) * st_.log2_q() + z * st_.log2_p());
    }
    factors_j_ = j_;
}

double BlockCursor::next_step_delta() const {
    if (finished_ || j_ >= d_) throw std::logic_error("BlockCursor: block exhausted");
    build_factors();
    double m0 = 0.0, m1 = 0.0;
    for (const auto& p : pieces_) {
        const double mass = st_.groups()[p.group].value * factors_[p.z] * to_double(p.len);
        if (label_bit(p.bin, j_) == 0) {
            m0 += mass;
        } else {
            m1 += mass;
        }
    }
    return (m0 - m1) / (m0 + m1);
}

double BlockCursor::absorb(int y) {
    if (finished_ || j_ >= d_) throw std::logic_error("BlockCursor: block exhausted");
    if (y != 0 && y != 1) throw std::invalid_argument("BlockCursor: y must be 0/1");
    for (auto& p : pieces_) p.z += (label_bit(p.bin, j_) != y);
    ++j_;
    build_factors();
    double total = 0.0, top = 0.0;
    for (const auto& p : pieces_) {
        const double v = st_.groups()[p.group].value * factors_[p.z];
        total += v * to_double(p.len);
        top = std::max(top, v);
    }
    return top / total;
}

double BlockCursor::current_median() const {
    build_factors();
    // Distinct (group, z) classes carry equal values; the median only needs
    // the sorted class list.
    std::vector<std::pair<double, double>> classes;  // (value, mass)
    classes.reserve(st_.groups().size() * (j_ + 1));
    std::vector<double> mass(st_.groups().size() * (j_ + 1), 0.0);
    for (const auto& p : pieces_) {
        mass[p.group * (j_ + 1) + p.z] += to_double(p.len);
    }
    double total = 0.0;
    for (std::uint32_t g = 0; g < st_.groups().size(); ++g) {
        for (int z = 0; z <= j_; ++z) {
            const double n = mass[g * (j_ + 1) + z];
            if (n == 0.0) continue;
            const double v = st_.groups()[g].value * factors_[z];
            classes.emplace_back(v, v * n);
            total += v * n;
        }
    }
    std::sort(classes.begin(), classes.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double cum = 0.0;
    for (const auto& [v, m] : classes) {
        cum += m;
        if (cum >= 0.5 * total) return v / total;
    }
    return classes.empty() ? 0.0 : classes.back().first / total;
}

void BlockCursor::finish(TrackedMessage* tracked) {
    if (finished_) throw std::logic_error("BlockCursor: already finished");
    if (j_ < 1) throw std::logic_error("BlockCursor: nothing absorbed");
    finished_ = true;

    // Pieces are in (bin, group, offset) order by construction; a stable
    // counting pass by group yields the (group, bin, offset) order the commit
    // needs without a comparison sort.
    {
        std::vector<std::uint32_t> counts(st_.groups().size() + 1, 0);
        for (const auto& p : pieces_) ++counts[p.group + 1];
        for (std::size_t g = 1; g < counts.size(); ++g) counts[g] += counts[g - 1];
        std::vector<BPiece> by_group(pieces_.size());
        for (const auto& p : pieces_) by_group[counts[p.group]++] = p;
        pieces_ = std::move(by_group);
    }

    std::vector<GroupedPosterior::Group> children;
    children.reserve(st_.groups().size() * (j_ + 1));
    std::size_t tracked_child = static_cast<std::size_t>(-1);
    bigcount tracked_pos = 0;

    std::size_t i = 0;
    for (std::uint32_t g = 0; g < st_.groups().size(); ++g) {
        const auto& grp = st_.groups()[g];
        const std::size_t first = i;
        while (i < pieces_.size() && pieces_[i].group == g) ++i;
        const std::size_t last = i;

        int child_classes = 0;
        for (int z = 0; z <= j_; ++z) {
            bigcount n = 0;
            bool identity = true;  // class pieces form [0, count) in order
            bigcount at = 0;
            for (std::size_t k = first; k < last; ++k) {
                if (pieces_[k].z != z) continue;
                if (pieces_[k].offset != at) identity = false;
                at = pieces_[k].offset + pieces_[k].len;
                n += pieces_[k].len;
            }
            if (n == 0) continue;
            ++child_classes;
            identity = identity && (n == grp.count);

            std::uint32_t node = grp.node;
            if (!identity) {
                std::vector<GroupedPosterior::Piece> np;
                for (std::size_t k = first; k < last; ++k) {
                    if (pieces_[k].z != z) continue;
                    np.push_back(
                        GroupedPosterior::Piece{grp.node, pieces_[k].offset, pieces_[k].len});
                }
                node = st_.add_node(-1, n, std::move(np));
            }

            if (tracked && tracked->group == g &&
                tracked_child == static_cast<std::size_t>(-1)) {
                bigcount before = 0;
                for (std::size_t k = first; k < last; ++k) {
                    if (pieces_[k].z != z) continue;
                    if (tracked->pos >= pieces_[k].offset &&
                        tracked->pos < pieces_[k].offset + pieces_[k].len) {
                        tracked_child = children.size();
                        tracked_pos = before + (tracked->pos - pieces_[k].offset);
                        break;
                    }
                    before += pieces_[k].len;
                }
            }

            children.push_back(GroupedPosterior::Group{grp.origin_log, grp.qa + (j_ - z),
                                                       grp.pb + z, 0.0, n, node});
        }
        if (child_classes > 1) st_.splits_ += child_classes - 1;
    }

    GroupedPosterior::RebuildRemap remap;
    st_.rebuild(std::move(children), tracked ? &remap : nullptr, j_);
    if (tracked) {
        if (tracked_child == static_cast<std::size_t>(-1)) {
            throw std::logic_error("BlockCursor: tracked message lost");
        }
        tracked->group = remap.group[tracked_child];
        tracked->pos = tracked_pos + remap.offset[tracked_child];
    }
}

}  // namespace sparsepm
