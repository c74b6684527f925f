#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sparsepm/bigcount.hpp"
#include "sparsepm/channel.hpp"
#include "sparsepm/message.hpp"

namespace sparsepm {

/**
 * Slice of a live group: members [offset, offset + len) in that group's
 * member order. Partitions and plan bins are lists of these; splitting a
 * group never materializes its members.
 */
struct GroupSlice {
    std::uint32_t group;
    bigcount offset;
    bigcount len;

    friend bool operator==(const GroupSlice&, const GroupSlice&) = default;
};

// Sorted by (group, offset), disjoint, len >= 1.
using SliceSet = std::vector<GroupSlice>;

void normalize_slices(SliceSet& s);
bigcount slice_count(const SliceSet& s);

// Resolved ordinal range inside root Hamming class h; only tests and the
// final estimate ever expand a group this far.
struct RootRange {
    int root_class;
    bigcount lo;
    bigcount hi;

    bigcount size() const { return hi - lo; }
    friend bool operator==(const RootRange&, const RootRange&) = default;
};

// Runtime position of one message: which group holds it and at which index.
// Maintained by the encoder across updates; the coordinates (root class,
// ordinal) are recovered by walking the lineage tree when needed.
struct TrackedMessage {
    std::uint32_t group = 0;
    bigcount pos = 0;
};

struct StepInfo {
    double p0;
    double p1;
    double delta;  // p0 - p1, measured on the state the symbol was encoded against
};

struct MedianInfo {
    double value;       // rho_om
    double delta;       // 2 * (cumulative through the crossing member) - 1
    std::size_t group;  // index of the group holding the crossing member
};

/**
 * Posterior over 2^K messages collapsed into equal-value groups.
 *
 * Values are never updated in place; they are recomputed as
 *
 *     value = exp2(origin_log + qa*log2(q) + pb*log2(p) + lambda)
 *
 * with a per-state normalizer lambda. Any two groups whose members absorbed
 * the same number of q- and p-factors land on the bit-identical double and
 * merge, which keeps the group count O(K + t) regardless of how the update
 * history interleaved.
 *
 * Member identity lives in a lineage tree: each group points at a node whose
 * pieces are ranges of parent nodes, bottoming out at the K+1 systematic root
 * classes. Splits and merges append nodes; nothing is ever rewritten, so an
 * encoder and decoder running the same updates stay bit-identical.
 */
class GroupedPosterior {
public:
    struct Group {
        double origin_log;  // log2 of the birth value (0 for systematic roots)
        std::int32_t qa;    // q-factors absorbed since birth
        std::int32_t pb;    // p-factors absorbed since birth
        double value;       // derived, linear domain
        bigcount count;
        std::uint32_t node;
    };

    // Binomial state after K systematic transmissions with feedback y_sys:
    // K+1 groups, class h valued p^h q^(K-h) with count C(K, h).
    static GroupedPosterior systematic_init(int k, const ChannelParams& ch, const Message& y_sys);

    // Synthetic state for tests and verification instances: explicit
    // (value, count) list, normalized on construction. Root classes are
    // fabricated (one per entry).
    static GroupedPosterior from_values(const std::vector<std::pair<double, bigcount>>& entries,
                                        const ChannelParams& ch);

    // One Bayes step; s0 holds S_0 as slices, y is the received bit. Returns
    // the masses of the partition as seen before the update. If tracked is
    // non-null it is migrated through the split/merge.
    StepInfo update_sequential(const SliceSet& s0, int y, TrackedMessage* tracked = nullptr);

    // Block Bayes step in product form: each member of bin k is scaled by
    // q^(j-z_k) p^(z_k), z_k = HD(received prefix, label prefix), then the
    // state renormalizes once. Labels are the bin indices, MSB first.
    void update_block(std::span<const SliceSet> bins, int d, const std::vector<int>& y_bits,
                      TrackedMessage* tracked = nullptr);

    MedianInfo median_value() const;

    // Value at which the descending cumulative sum first reaches gamma.
    double quantile_value(double gamma) const;

    double mass_of(const SliceSet& s) const;

    double top_value() const { return groups_.empty() ? 0.0 : groups_.front().value; }
    double total_mass() const;

    const std::vector<Group>& groups() const { return groups_; }
    int message_bits() const { return k_; }
    int time() const { return t_; }
    std::int64_t split_count() const { return splits_; }
    bigcount total_count() const { return total_count_; }
    double log2_p() const { return log2_p_; }
    double log2_q() const { return log2_q_; }

    // Entry point for the encoder: position of the message with the given
    // root coordinates in the current state.
    TrackedMessage track_from_root(const MessageLocator& loc) const;

    // Root coordinates of one member; walks the lineage tree.
    MessageLocator resolve_member(std::uint32_t group, bigcount pos) const;

    // All root ranges covered by a slice, sorted and coalesced.
    std::vector<RootRange> resolve_slice(const GroupSlice& s) const;

    // Same ranges in member order (position within the slice), uncoalesced
    // across order breaks; lets tests map root-space sets back to offsets.
    std::vector<RootRange> resolve_slice_ordered(const GroupSlice& s) const;

    // Order-sensitive digest for encoder/decoder lockstep checks.
    std::uint64_t fingerprint() const;

    // Structural invariants; protocol_state additionally checks that the root
    // classes are complete (counts match C(K, h) and total 2^K).
    void check_valid(bool protocol_state) const;

private:
    friend class BlockCursor;

    struct Piece {
        std::uint32_t node;
        bigcount offset;
        bigcount len;
    };
    struct Node {
        std::int32_t root_class;  // >= 0 for roots; -1 otherwise
        bigcount count;
        std::vector<Piece> pieces;
    };

    struct RebuildRemap {
        std::vector<std::uint32_t> group;  // child index -> final group index
        std::vector<bigcount> offset;      // member shift from preceding merged constituents
    };

    GroupedPosterior() = default;
    std::uint32_t add_node(std::int32_t root_class, bigcount count, std::vector<Piece> pieces);
    double raw_value(const Group& g) const;
    void rebuild(std::vector<Group> children, RebuildRemap* remap, int steps_absorbed);
    void renormalize();

    int k_ = -1;  // -1 marks synthetic states
    int t_ = 0;
    double lambda_ = 0.0;
    double log2_p_ = 0.0;
    double log2_q_ = 0.0;
    bigcount total_count_ = 0;
    std::int64_t splits_ = 0;
    std::vector<Group> groups_;
    std::vector<Node> nodes_;
};

// log2(v / (1 - v)); +-infinity at the endpoints, never fed to arithmetic.
double u_of(double value);

}  // namespace sparsepm
