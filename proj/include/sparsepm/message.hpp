#pragma once

#include <cstdint>
#include <vector>

#include "sparsepm/bigcount.hpp"

namespace sparsepm {

// A K-bit message, one bit per element, index 0 transmitted first.
using Message = std::vector<std::uint8_t>;

inline int hamming_distance(const Message& a, const Message& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
    return d;
}

/**
 * Coordinates of one message relative to the systematic feedback word:
 * the Hamming-distance class h and the lexicographic rank of (theta XOR y_sys)
 * among all K-bit words of weight h (combinatorial number system).
 * These coordinates are invariant under every posterior update, which is what
 * lets the encoder follow its message through arbitrary group splits.
 */
struct MessageLocator {
    int root_class = 0;   // h = HD(theta, y_sys)
    bigcount ordinal = 0; // rank within the weight-h class, 0-based
};

MessageLocator locate_message(const Message& theta, const Message& y_sys);

// Exact inverse of locate_message. Throws if the ordinal is out of range.
Message unrank(const MessageLocator& loc, const Message& y_sys);

}  // namespace sparsepm
