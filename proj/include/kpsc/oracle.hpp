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

// Slow, independent P-256 arithmetic used as the test oracle: affine
// chord-tangent formulas with modular inversion on top of cpp_int, plain
// double-and-add. Deliberately a different algorithmic path from the main
// Jacobian/Karatsuba implementation.

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <vector>

#include "kpsc/u256.hpp"

namespace kpsc::oracle {

using bigint = boost::multiprecision::cpp_int;

inline bigint to_big(const U256& v) {
    bigint r = 0;
    for (int i = 3; i >= 0; --i) {
        r <<= 64;
        r += bigint(v.w[i]);
    }
    return r;
}

inline U256 from_big(const bigint& v) {
    if (v < 0) throw std::invalid_argument("from_big: negative");
    bigint t = v;
    U256 r;
    for (int i = 0; i < 4; ++i) {
        r.w[i] = u64(t & bigint(0xffffffffffffffffULL));
        t >>= 64;
    }
    if (t != 0) throw std::invalid_argument("from_big: too wide");
    return r;
}

struct OracleConstants {
    bigint p, a, b, gx, gy, n;
};

inline bool miller_rabin(const bigint& n, const std::vector<unsigned>& bases) {
    if (n < 2) return false;
    bigint d = n - 1;
    unsigned s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    for (unsigned base : bases) {
        bigint a = base;
        if (a >= n) continue;
        bigint x = boost::multiprecision::powm(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (unsigned i = 1; i < s; ++i) {
            x = (x * x) % n;
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

inline const OracleConstants& constants() {
    static const OracleConstants k = [] {
        OracleConstants c;
        c.p = bigint("0xffffffff00000001000000000000000000000000ffffffffffffffffffffffff");
        c.a = c.p - 3;
        c.b = bigint("0x5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b");
        c.gx = bigint("0x6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296");
        c.gy = bigint("0x4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5");
        c.n = bigint("0xffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551");
        if ((c.gy * c.gy) % c.p != (c.gx * c.gx * c.gx + c.a * c.gx + c.b) % c.p)
            throw std::logic_error("oracle: generator not on curve");
        if (!miller_rabin(c.n, {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}))
            throw std::logic_error("oracle: group order not prime");
        return c;
    }();
    return k;
}

inline bigint mod_mul(const bigint& a, const bigint& b) {
    return (a * b) % constants().p;
}

inline bigint mod_inv(const bigint& a) {
    const bigint& p = constants().p;
    bigint v = a % p;
    if (v < 0) v += p;
    if (v == 0) throw std::domain_error("oracle mod_inv: zero");
    // extended Euclid
    bigint r0 = p, r1 = v, t0 = 0, t1 = 1;
    while (r1 != 0) {
        bigint q = r0 / r1;
        bigint r2 = r0 - q * r1;
        bigint t2 = t0 - q * t1;
        r0 = r1;
        r1 = r2;
        t0 = t1;
        t1 = t2;
    }
    if (r0 != 1) throw std::domain_error("oracle mod_inv: not invertible");
    if (t0 < 0) t0 += p;
    return t0;
}

struct OPoint {
    bigint x, y;
    bool infinity = false;

    static OPoint at_infinity() { return OPoint{0, 0, true}; }
    static OPoint generator() { return OPoint{constants().gx, constants().gy, false}; }
};

inline bool on_curve(const OPoint& pt) {
    if (pt.infinity) return true;
    const auto& k = constants();
    return (pt.y * pt.y) % k.p == (pt.x * pt.x * pt.x + k.a * pt.x + k.b) % k.p;
}

inline OPoint affine_double(const OPoint& pt) {
    if (pt.infinity) return pt;
    const auto& k = constants();
    if (pt.y == 0) return OPoint::at_infinity();
    bigint lam = mod_mul(3 * pt.x * pt.x % k.p + k.a, mod_inv(2 * pt.y % k.p)) % k.p;
    bigint x3 = (lam * lam - 2 * pt.x) % k.p;
    if (x3 < 0) x3 += k.p;
    bigint y3 = (lam * (pt.x - x3) - pt.y) % k.p;
    if (y3 < 0) y3 += k.p;
    return OPoint{x3, y3, false};
}

inline OPoint affine_add(const OPoint& p1, const OPoint& p2) {
    if (p1.infinity) return p2;
    if (p2.infinity) return p1;
    const auto& k = constants();
    if (p1.x == p2.x) {
        if ((p1.y + p2.y) % k.p == 0) return OPoint::at_infinity();
        return affine_double(p1);
    }
    bigint lam = mod_mul((p2.y - p1.y + k.p) % k.p, mod_inv((p2.x - p1.x + k.p) % k.p));
    bigint x3 = (lam * lam - p1.x - p2.x) % k.p;
    if (x3 < 0) x3 += k.p;
    bigint y3 = (lam * (p1.x - x3) - p1.y) % k.p;
    if (y3 < 0) y3 += k.p;
    return OPoint{x3, y3, false};
}

// plain affine double-and-add, MSB first
inline OPoint scalar_mul(const bigint& kk, const OPoint& pt) {
    if (kk <= 0) throw std::invalid_argument("oracle scalar_mul: k must be positive");
    OPoint q = OPoint::at_infinity();
    bool started = false;
    for (int i = int(boost::multiprecision::msb(kk)); i >= 0; --i) {
        if (started) q = affine_double(q);
        if (boost::multiprecision::bit_test(kk, unsigned(i))) {
            q = started ? affine_add(q, pt) : pt;
            started = true;
        }
    }
    return q;
}

}  // namespace kpsc::oracle
