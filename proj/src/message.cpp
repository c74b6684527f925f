#include "sparsepm/message.hpp"

#include <stdexcept>

namespace sparsepm {

MessageLocator locate_message(const Message& theta, const Message& y_sys) {
    if (theta.size() != y_sys.size()) {
        throw std::invalid_argument("locate_message: length mismatch");
    }
    const int k = static_cast<int>(theta.size());
    int h = 0;
    for (int i = 0; i < k; ++i) h += (theta[i] != y_sys[i]);

    // Lexicographic rank of the XOR word among weight-h words of length K.
    // Scanning left to right: a '1' at position i is preceded (in lex order)
    // by every word that puts '0' there and the r remaining ones later.
    bigcount rank = 0;
    int remaining = h;
    for (int i = 0; i < k && remaining > 0; ++i) {
        if (theta[i] != y_sys[i]) {
            rank += binomial128(k - i - 1, remaining);
            --remaining;
        }
    }
    return MessageLocator{h, rank};
}

Message unrank(const MessageLocator& loc, const Message& y_sys) {
    const int k = static_cast<int>(y_sys.size());
    if (loc.root_class < 0 || loc.root_class > k) {
        throw std::out_of_range("unrank: root class out of range");
    }
    if (loc.ordinal >= binomial128(k, loc.root_class)) {
        throw std::out_of_range("unrank: ordinal out of range");
    }
    Message out(y_sys);
    bigcount rank = loc.ordinal;
    int remaining = loc.root_class;
    for (int i = 0; i < k && remaining > 0; ++i) {
        const bigcount with_zero = binomial128(k - i - 1, remaining);
        if (rank >= with_zero) {
            rank -= with_zero;
            out[i] ^= 1;
            --remaining;
        }
    }
    return out;
}

}  // namespace sparsepm
