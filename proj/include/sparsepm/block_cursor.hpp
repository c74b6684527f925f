#pragma once

#include <span>

#include "sparsepm/posterior.hpp"

namespace sparsepm {

/**
 * Drives one forward block symbol by symbol. The posterior is refined into
 * (group, bin) pieces up front; each received bit only bumps per-piece
 * disagreement counts, and the state is rebuilt once, when the block ends or
 * the decoder stops mid-block. Values exposed along the way (bit-slice Delta,
 * top value, median) are exact for the sequentially-updated posterior.
 *
 * Both encoder and decoder replay blocks through this class, so their states
 * stay bit-identical at every packet boundary.
 */
class BlockCursor {
public:
    BlockCursor(GroupedPosterior& st, std::span<const SliceSet> bins, int d);

    int steps() const { return j_; }
    int block_size() const { return d_; }

    // Delta of the next step's bit-slice partition (bins whose label has 0 at
    // the next position vs the rest), measured on the current posterior.
    double next_step_delta() const;

    // Absorb one received bit; returns the top normalized posterior value.
    double absorb(int y);

    // Median value of the current mid-block posterior.
    double current_median() const;

    // Commit the absorbed bits into the state. Call exactly once, after at
    // least one absorb; the cursor is dead afterwards.
    void finish(TrackedMessage* tracked = nullptr);

private:
    struct BPiece {
        std::uint32_t group;
        std::uint32_t bin;
        bigcount offset;
        bigcount len;
        std::int32_t z;  // disagreements between this bin's label and the received bits
    };

    int label_bit(std::uint32_t bin, int step) const {
        return static_cast<int>((bin >> (d_ - 1 - step)) & 1u);
    }
    // Scale factors exp2((j-z) log2 q + z log2 p) for z = 0..j_.
    void build_factors() const;

    GroupedPosterior& st_;
    int d_;
    int j_ = 0;
    bool finished_ = false;
    std::vector<BPiece> pieces_;
    mutable std::vector<double> factors_;
    mutable int factors_j_ = -1;
};

}  // namespace sparsepm
