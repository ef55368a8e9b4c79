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

// Binary double-and-add drivers (left-to-right and right-to-left) over the
// atomic-block point operations, producing the scalar-multiplication result
// together with the full semantic execution trace.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "kpsc/ec.hpp"

namespace kpsc {

struct Scalar {
    U256 k;
    unsigned bits = 0;  // index of the leading 1-bit + 1

    static Scalar from_u256(const U256& v) {
        if (v.is_zero() || !(v < P256_N))
            throw std::invalid_argument("scalar must satisfy 0 < k < n");
        return Scalar{v, v.bit_length()};
    }
    static Scalar from_hex(std::string_view hex) { return from_u256(u256_from_hex(hex)); }
    static Scalar from_bits(std::string_view b) { return from_u256(u256_from_bits(b)); }

    bool bit(unsigned i) const { return k.bit(i); }
    unsigned hamming_weight() const { return k.popcount(); }
};

enum class Algorithm : std::uint8_t { LeftToRight, RightToLeft };
enum class OpLabel : std::uint8_t { PD, PA };

inline char op_label_char(OpLabel l) { return l == OpLabel::PD ? 'D' : 'A'; }

struct OpAnnotation {
    OpLabel label;
    std::int16_t bit_index;
    std::uint32_t first_event;
    std::uint32_t n_events;  // 40 for PD, 64 for PA
};

struct ExecutionTrace {
    std::vector<FieldOpEvent> events;
    std::vector<OpAnnotation> ops;
    Algorithm algorithm = Algorithm::LeftToRight;
    bool randomized = false;
    FieldElement lambda;  // meaningful only when randomized
    Scalar scalar{U256::from_u64(1), 1};
};

struct KpResult {
    AffinePoint point;
    ExecutionTrace trace;
};

namespace detail {

// lambda uniform in [2, p-1] by rejection from a seeded deterministic generator
inline FieldElement sample_lambda(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (;;) {
        U256 v{rng(), rng(), rng(), rng()};
        if (v < P256_P && !v.is_zero() && !(v == U256::from_u64(1)))
            return FieldElement{v};
    }
}

struct OpRecorder {
    ExecutionTrace& trace;
    EventSink sink;

    explicit OpRecorder(ExecutionTrace& t) : trace(t) { sink.out = &t.events; }

    template <typename F>
    JacobianPoint record(OpLabel label, std::int16_t bit_index, F&& body) {
        sink.op_index = std::uint32_t(trace.ops.size());
        sink.bit_index = bit_index;
        auto first = std::uint32_t(trace.events.size());
        JacobianPoint r = body(sink);
        trace.ops.push_back(OpAnnotation{label, bit_index, first,
                                         std::uint32_t(trace.events.size()) - first});
        return r;
    }
};

}  // namespace detail

// Left-to-right: Q = P'; for i = l-2 .. 0: Q = 2Q; if k_i: Q = Q + P'.
// With `randomize`, P' = coron_randomize(P, lambda(seed)); the randomization
// itself emits no blocks.
inline KpResult kp_left_to_right(const Scalar& k, const AffinePoint& p, bool randomize,
                                 std::uint64_t rng_seed) {
    ExecutionTrace trace;
    trace.algorithm = Algorithm::LeftToRight;
    trace.randomized = randomize;
    trace.scalar = k;

    JacobianPoint pprime;
    if (randomize) {
        trace.lambda = detail::sample_lambda(rng_seed);
        pprime = coron_randomize(p, trace.lambda);
    } else {
        pprime = JacobianPoint::from_affine(p);
    }

    detail::OpRecorder rec(trace);
    JacobianPoint q = pprime;
    for (int i = int(k.bits) - 2; i >= 0; --i) {
        q = rec.record(OpLabel::PD, std::int16_t(i),
                       [&](EventSink& s) { return point_double_atomic(q, s); });
        if (k.bit(unsigned(i)))
            q = rec.record(OpLabel::PA, std::int16_t(i),
                           [&](EventSink& s) { return point_add_atomic(q, pprime, s); });
    }
    return KpResult{to_affine(q), std::move(trace)};
}

inline KpResult kp_left_to_right(const Scalar& k, const AffinePoint& p) {
    return kp_left_to_right(k, p, false, 0);
}

// Right-to-left: Q = P; for i = 0 .. l-1: if k_i: R = Q (first, silent copy)
// or R = R + Q; if i < l-1: Q = 2Q. No coordinate randomization.
inline KpResult kp_right_to_left(const Scalar& k, const AffinePoint& p) {
    ExecutionTrace trace;
    trace.algorithm = Algorithm::RightToLeft;
    trace.scalar = k;

    detail::OpRecorder rec(trace);
    JacobianPoint q = JacobianPoint::from_affine(p);
    JacobianPoint r;
    bool r_set = false;
    for (unsigned i = 0; i < k.bits; ++i) {
        if (k.bit(i)) {
            if (!r_set) {
                r = q;  // silent accumulator initialization, no blocks emitted
                r_set = true;
            } else {
                r = rec.record(OpLabel::PA, std::int16_t(i),
                               [&](EventSink& s) { return point_add_atomic(r, q, s); });
            }
        }
        if (i + 1 < k.bits)
            q = rec.record(OpLabel::PD, std::int16_t(i),
                           [&](EventSink& s) { return point_double_atomic(q, s); });
    }
    return KpResult{to_affine(r), std::move(trace)};
}

inline std::vector<OpLabel> op_sequence(const ExecutionTrace& trace) {
    std::vector<OpLabel> seq;
    seq.reserve(trace.ops.size());
    for (const auto& op : trace.ops) seq.push_back(op.label);
    return seq;
}

}  // namespace kpsc
