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
#include <cassert>
#include <cstdint>

#include "kpsc/u256.hpp"

namespace kpsc {

// NIST P-256 prime: 2^256 - 2^224 + 2^192 + 2^96 - 1
inline constexpr U256 P256_P{0xffffffffffffffffULL, 0x00000000ffffffffULL,
                             0x0000000000000000ULL, 0xffffffff00000001ULL};

// Residue mod the P-256 prime. Value is kept in [0, p) at all API boundaries.
struct FieldElement {
    U256 v;

    constexpr FieldElement() = default;
    explicit constexpr FieldElement(const U256& u) : v(u) {}

    static FieldElement from_u64(u64 x) { return FieldElement{U256::from_u64(x)}; }
    static FieldElement from_hex(std::string_view hex) {
        FieldElement r{u256_from_hex(hex)};
        if (!(r.v < P256_P)) throw std::invalid_argument("FieldElement: not reduced");
        return r;
    }

    // bits [64*i, 64*i + 63] of the value; the 4-segment view of the multiplier
    u64 segment(int i) const { return v.w[i]; }

    bool is_zero() const { return v.is_zero(); }
    bool is_one() const { return v.w[0] == 1 && !(v.w[1] | v.w[2] | v.w[3]); }

    friend bool operator==(const FieldElement& a, const FieldElement& b) { return a.v == b.v; }
    friend bool operator!=(const FieldElement& a, const FieldElement& b) { return a.v != b.v; }
};

// One of the nine 64x64-ish base multiplications of the two-level additive
// Karatsuba schedule; carries the Hamming weights of the two sub-operands.
struct PartialProductEvent {
    std::uint8_t index;  // 0..8
    std::uint8_t hw_a;   // 0..65
    std::uint8_t hw_b;   // 0..65
};

using PartialProducts = std::array<PartialProductEvent, 9>;

inline FieldElement fe_add(const FieldElement& a, const FieldElement& b) {
    U256 s;
    u64 carry = u256_add(a.v, b.v, s);
    if (carry || !(s < P256_P)) {
        U256 r;
        u256_sub(s, P256_P, r);
        return FieldElement{r};
    }
    return FieldElement{s};
}

inline FieldElement fe_neg(const FieldElement& a) {
    if (a.is_zero()) return a;
    U256 r;
    u256_sub(P256_P, a.v, r);
    return FieldElement{r};
}

inline FieldElement fe_sub(const FieldElement& a, const FieldElement& b) {
    return fe_add(a, fe_neg(b));
}

namespace detail {

// 66-bit sub-operand of a Karatsuba level: lo 64 bits + tiny high part
struct SubOp {
    u64 lo;
    u64 hi;  // <= 3
    unsigned hw() const {
        return unsigned(__builtin_popcountll(lo) + __builtin_popcountll(hi));
    }
};

// 129-bit half-operand (lo + mid*2^64 + hi*2^128, hi <= 1)
struct Half {
    u64 lo, mid, hi;
};

inline Half half_lo(const U256& x) { return {x.w[0], x.w[1], 0}; }
inline Half half_hi(const U256& x) { return {x.w[2], x.w[3], 0}; }

inline Half half_sum(const Half& a, const Half& b) {
    Half r;
    u128 c = (u128)a.lo + b.lo;
    r.lo = (u64)c;
    c = (c >> 64) + a.mid + b.mid;
    r.mid = (u64)c;
    r.hi = (u64)(c >> 64);
    return r;
}

// split a <=129-bit half into the two level-2 sub-operands and their sum
inline void half_split(const Half& h, SubOp& x0, SubOp& x1, SubOp& xs) {
    x0 = {h.lo, 0};
    x1 = {h.mid, h.hi};
    u128 s = (u128)h.lo + h.mid;
    xs = {(u64)s, (u64)(s >> 64) + h.hi};
}

// 192-bit unsigned accumulator
struct W192 {
    std::array<u64, 3> w{0, 0, 0};
};

// product of two <=66-bit sub-operands, exact
inline W192 subop_mul(const SubOp& x, const SubOp& y) {
    u128 ll = (u128)x.lo * y.lo;
    u128 mid = (u128)x.hi * y.lo + (u128)x.lo * y.hi + (ll >> 64);
    u128 hi = (u128)x.hi * y.hi + (mid >> 64);
    return W192{{(u64)ll, (u64)mid, (u64)hi}};
}

inline W192 w192_add(const W192& a, const W192& b) {
    W192 r;
    u128 c = 0;
    for (int i = 0; i < 3; ++i) {
        c += (u128)a.w[i] + b.w[i];
        r.w[i] = (u64)c;
        c >>= 64;
    }
    assert(c == 0);
    return r;
}

// a - b; requires a >= b (holds for additive-Karatsuba middle terms)
inline W192 w192_sub(const W192& a, const W192& b) {
    W192 r;
    u64 borrow = 0;
    for (int i = 0; i < 3; ++i) {
        u64 d = a.w[i] - b.w[i];
        u64 br1 = a.w[i] < b.w[i];
        r.w[i] = d - borrow;
        u64 br2 = d < borrow;
        borrow = br1 | br2;
    }
    assert(borrow == 0);
    return r;
}

// 320-bit unsigned accumulator for one recombined half-product
struct W320 {
    std::array<u64, 5> w{0, 0, 0, 0, 0};

    void add_at(int limb, const W192& v) {
        u128 c = 0;
        for (int i = 0; i < 3; ++i) {
            c += (u128)w[limb + i] + v.w[i];
            w[limb + i] = (u64)c;
            c >>= 64;
        }
        for (int i = limb + 3; c && i < 5; ++i) {
            c += w[i];
            w[i] = (u64)c;
            c >>= 64;
        }
        assert(c == 0);
    }
};

inline W320 w320_sub(const W320& a, const W320& b) {
    W320 r;
    u64 borrow = 0;
    for (int i = 0; i < 5; ++i) {
        u64 d = a.w[i] - b.w[i];
        u64 br1 = a.w[i] < b.w[i];
        r.w[i] = d - borrow;
        u64 br2 = d < borrow;
        borrow = br1 | br2;
    }
    assert(borrow == 0);
    return r;
}

// one level-2 Karatsuba pass over a pair of halves; emits three events
// (x0*y0, x1*y1, (x0+x1)*(y0+y1)) and returns the exact half product
inline W320 half_mul(const Half& ha, const Half& hb, int base_index,
                     PartialProducts& ev) {
    SubOp a0, a1, as, b0, b1, bs;
    half_split(ha, a0, a1, as);
    half_split(hb, b0, b1, bs);

    W192 k0 = subop_mul(a0, b0);
    W192 k1 = subop_mul(a1, b1);
    W192 ks = subop_mul(as, bs);

    ev[base_index + 0] = {std::uint8_t(base_index + 0), std::uint8_t(a0.hw()), std::uint8_t(b0.hw())};
    ev[base_index + 1] = {std::uint8_t(base_index + 1), std::uint8_t(a1.hw()), std::uint8_t(b1.hw())};
    ev[base_index + 2] = {std::uint8_t(base_index + 2), std::uint8_t(as.hw()), std::uint8_t(bs.hw())};

    W192 cross = w192_sub(w192_sub(ks, k0), k1);
    W320 r;
    r.add_at(0, k0);
    r.add_at(1, cross);
    r.add_at(2, k1);
    return r;
}

// 512-bit product accumulator
struct W512 {
    std::array<u64, 8> w{};

    void add_at(int limb, const W320& v) {
        u128 c = 0;
        for (int i = 0; i < 5; ++i) {
            if (limb + i >= 8) {
                assert(v.w[i] == 0);
                continue;
            }
            c += (u128)w[limb + i] + v.w[i];
            w[limb + i] = (u64)c;
            c >>= 64;
        }
        for (int i = limb + 5; c && i < 8; ++i) {
            c += w[i];
            w[i] = (u64)c;
            c >>= 64;
        }
        assert(c == 0);
    }

    std::uint32_t word32(int i) const { return std::uint32_t(w[i >> 1] >> (32 * (i & 1))); }
};

// FIPS 186-5 fast reduction for p256 over the sixteen 32-bit words of a
// 512-bit product.
inline U256 reduce_p256(const W512& c) {
    auto W = [&](int i) -> std::int64_t { return std::int64_t(c.word32(i)); };

    std::int64_t a[8];
    a[0] = W(0) + W(8) + W(9) - W(11) - W(12) - W(13) - W(14);
    a[1] = W(1) + W(9) + W(10) - W(12) - W(13) - W(14) - W(15);
    a[2] = W(2) + W(10) + W(11) - W(13) - W(14) - W(15);
    a[3] = W(3) + 2 * (W(11) + W(12)) + W(13) - W(15) - W(8) - W(9);
    a[4] = W(4) + 2 * (W(12) + W(13)) + W(14) - W(9) - W(10);
    a[5] = W(5) + 2 * (W(13) + W(14)) + W(15) - W(10) - W(11);
    a[6] = W(6) + W(13) + W(14) * 3 + W(15) * 2 - W(8) - W(9);
    a[7] = W(7) + W(15) * 3 + W(8) - W(10) - W(11) - W(12) - W(13);

    // carry-propagate the signed 32-bit lanes into a 256-bit value plus a
    // small signed overflow: total = carry * 2^256 + r
    std::int64_t carry = 0;
    std::uint32_t lane[8];
    for (int i = 0; i < 8; ++i) {
        std::int64_t t = a[i] + carry;
        lane[i] = std::uint32_t(t & 0xffffffff);
        carry = t >> 32;  // arithmetic shift
    }
    U256 r{(u64)lane[0] | ((u64)lane[1] << 32), (u64)lane[2] | ((u64)lane[3] << 32),
           (u64)lane[4] | ((u64)lane[5] << 32), (u64)lane[6] | ((u64)lane[7] << 32)};

    // normalize: add/subtract p until carry == 0 and r in [0, p)
    while (carry < 0) {
        U256 t;
        u64 cy = u256_add(r, P256_P, t);
        r = t;
        carry += std::int64_t(cy);
    }
    while (carry > 0) {
        U256 t;
        u64 borrow = u256_sub(r, P256_P, t);
        r = t;
        carry -= std::int64_t(borrow);
    }
    while (!(r < P256_P)) {
        U256 t;
        u256_sub(r, P256_P, t);
        r = t;
    }
    return r;
}

}  // namespace detail

struct MulResult {
    FieldElement value;
    PartialProducts events;
};

// Instrumented field multiplication. The value is (a*b) mod p assembled from
// the two-level additive Karatsuba schedule; the nine events describe the
// base multiplications in order lo(0..2), hi(3..5), mid(6..8).
inline MulResult fe_mul(const FieldElement& a, const FieldElement& b) {
    using namespace detail;
    PartialProducts ev{};

    Half alo = half_lo(a.v), ahi = half_hi(a.v);
    Half blo = half_lo(b.v), bhi = half_hi(b.v);

    W320 plo = half_mul(alo, blo, 0, ev);
    W320 phi = half_mul(ahi, bhi, 3, ev);
    W320 pmid = half_mul(half_sum(alo, ahi), half_sum(blo, bhi), 6, ev);

    W320 cross = w320_sub(w320_sub(pmid, plo), phi);
    W512 prod;
    prod.add_at(0, plo);
    prod.add_at(2, cross);
    prod.add_at(4, phi);

    return MulResult{FieldElement{reduce_p256(prod)}, ev};
}

inline FieldElement fe_mul_value(const FieldElement& a, const FieldElement& b) {
    return fe_mul(a, b).value;
}

inline FieldElement fe_pow(const FieldElement& base, const U256& e) {
    FieldElement r = FieldElement::from_u64(1);
    unsigned n = e.bit_length();
    for (int i = int(n) - 1; i >= 0; --i) {
        r = fe_mul_value(r, r);
        if (e.bit(unsigned(i))) r = fe_mul_value(r, base);
    }
    return r;
}

// modular inverse via Fermat; requires a != 0
inline FieldElement fe_inv(const FieldElement& a) {
    if (a.is_zero()) throw std::domain_error("fe_inv: zero");
    U256 e;
    u256_sub(P256_P, U256::from_u64(2), e);
    return fe_pow(a, e);
}

}  // namespace kpsc
