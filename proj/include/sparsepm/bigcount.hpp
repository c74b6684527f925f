#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sparsepm {

// Message-set cardinalities (2^K, binomial slices) overflow 64 bits for K > 62;
// 128 bits cover every K up to 128.
using bigcount = unsigned __int128;

inline double to_double(bigcount v) { return static_cast<double>(v); }

inline std::string to_string(bigcount v) {
    if (v == 0) return "0";
    std::string out;
    while (v > 0) {
        out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    return out;
}

// C(n, k) exactly in 128-bit arithmetic. Safe for n <= 128.
inline bigcount binomial128(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (n > 128) throw std::invalid_argument("binomial128: n > 128");
    if (k > n - k) k = n - k;
    bigcount r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<bigcount>(n - k + i) / static_cast<bigcount>(i);
    }
    return r;
}

inline bigcount pow2_big(int k) {
    if (k < 0 || k > 127) throw std::invalid_argument("pow2_big: k out of range");
    return static_cast<bigcount>(1) << k;
}

}  // namespace sparsepm
