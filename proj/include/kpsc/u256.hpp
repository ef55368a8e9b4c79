// Copyright 2026 the kpsc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kpsc {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// 256-bit unsigned integer, four 64-bit limbs, little-endian limb order.
struct U256 {
    std::array<u64, 4> w{0, 0, 0, 0};

    constexpr U256() = default;
    constexpr U256(u64 w0, u64 w1, u64 w2, u64 w3) : w{w0, w1, w2, w3} {}

    static constexpr U256 from_u64(u64 v) { return U256{v, 0, 0, 0}; }

    bool is_zero() const { return (w[0] | w[1] | w[2] | w[3]) == 0; }

    bool bit(unsigned i) const { return (w[i >> 6] >> (i & 63)) & 1; }

    // index of the highest set bit + 1; 0 for zero
    unsigned bit_length() const {
        for (int i = 3; i >= 0; --i)
            if (w[i]) return unsigned(64 * i + 64 - __builtin_clzll(w[i]));
        return 0;
    }

    unsigned popcount() const {
        return unsigned(__builtin_popcountll(w[0]) + __builtin_popcountll(w[1]) +
                        __builtin_popcountll(w[2]) + __builtin_popcountll(w[3]));
    }

    friend bool operator==(const U256& a, const U256& b) { return a.w == b.w; }
    friend bool operator!=(const U256& a, const U256& b) { return a.w != b.w; }

    friend bool operator<(const U256& a, const U256& b) {
        for (int i = 3; i >= 0; --i) {
            if (a.w[i] != b.w[i]) return a.w[i] < b.w[i];
        }
        return false;
    }
    friend bool operator>=(const U256& a, const U256& b) { return !(a < b); }
};

// a + b, returns carry-out
inline u64 u256_add(const U256& a, const U256& b, U256& out) {
    u128 c = 0;
    for (int i = 0; i < 4; ++i) {
        c += (u128)a.w[i] + b.w[i];
        out.w[i] = (u64)c;
        c >>= 64;
    }
    return (u64)c;
}

// a - b, returns borrow-out (1 if a < b)
inline u64 u256_sub(const U256& a, const U256& b, U256& out) {
    u64 borrow = 0;
    for (int i = 0; i < 4; ++i) {
        u64 bi = b.w[i];
        u64 d = a.w[i] - bi;
        u64 br1 = a.w[i] < bi;
        u64 d2 = d - borrow;
        u64 br2 = d < borrow;
        out.w[i] = d2;
        borrow = br1 | br2;
    }
    return borrow;
}

inline std::string to_hex(const U256& v) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    bool started = false;
    for (int i = 3; i >= 0; --i) {
        for (int nib = 15; nib >= 0; --nib) {
            unsigned d = unsigned((v.w[i] >> (4 * nib)) & 0xf);
            if (!started && d == 0 && !(i == 0 && nib == 0)) continue;
            started = true;
            s += digits[d];
        }
    }
    return s;
}

inline U256 u256_from_hex(std::string_view hex) {
    if (hex.substr(0, 2) == "0x" || hex.substr(0, 2) == "0X") hex.remove_prefix(2);
    if (hex.empty() || hex.size() > 64)
        throw std::invalid_argument("u256_from_hex: bad length");
    U256 r;
    unsigned shift = 0;
    for (auto it = hex.rbegin(); it != hex.rend(); ++it, shift += 4) {
        char c = *it;
        u64 d;
        if (c >= '0' && c <= '9') d = u64(c - '0');
        else if (c >= 'a' && c <= 'f') d = u64(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') d = u64(c - 'A' + 10);
        else throw std::invalid_argument("u256_from_hex: bad digit");
        r.w[shift >> 6] |= d << (shift & 63);
    }
    return r;
}

inline U256 u256_from_bits(std::string_view bits) {
    if (bits.empty() || bits.size() > 256)
        throw std::invalid_argument("u256_from_bits: bad length");
    U256 r;
    unsigned pos = 0;
    for (auto it = bits.rbegin(); it != bits.rend(); ++it, ++pos) {
        if (*it == '1') r.w[pos >> 6] |= u64(1) << (pos & 63);
        else if (*it != '0') throw std::invalid_argument("u256_from_bits: bad digit");
    }
    return r;
}

}  // namespace kpsc
