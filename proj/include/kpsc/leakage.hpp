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

// Deterministic synthesis of side-channel traces from an execution trace.
// Every field operation contributes a short address-dependent prologue (the
// Hamming weights of the register addresses it touches) followed by its
// compute cycles (data-dependent Hamming-weight terms), so every MANA block
// maps to the same number of cycles regardless of operand values.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "kpsc/kp.hpp"

namespace kpsc {

// Per-event cycle counts: a multiplication computes its nine partial
// products, additions and negations take one compute cycle.
inline constexpr unsigned kMulComputeCycles = 9;
inline constexpr unsigned kAddNegComputeCycles = 1;

// Hamming-weight products of 64-bit segments are normalized by the maximum
// weight product of one segment pair, the same convention as the hw/256
// normalization on the add/neg path.
inline constexpr double kMulHwNorm = 64.0 * 64.0;

struct LeakageModel {
    double w_data = 1.0;
    double w_addr = 1.0;
    double base_mul = 1.0;
    double base_add = 1.0;
    double base_neg = 1.0;
    double sigma = 0.1;
    unsigned samples_per_cycle = 1;
    unsigned addr_prologue_cycles = 3;
    std::uint64_t noise_seed = 0;

    unsigned op_cycles(OpKind k) const {
        return addr_prologue_cycles +
               (k == OpKind::Mul ? kMulComputeCycles : kAddNegComputeCycles);
    }
    // one MANA block: mul + add + neg + add
    unsigned block_cycles() const { return 4 * addr_prologue_cycles + kMulComputeCycles + 3; }
    unsigned block_samples() const { return block_cycles() * samples_per_cycle; }
};

struct TraceGroundTruth {
    Algorithm algorithm = Algorithm::LeftToRight;
    bool randomized = false;
    U256 lambda{};
    U256 scalar{};
    unsigned scalar_bits = 0;
    struct Op {
        OpLabel label;
        std::int16_t bit_index;
    };
    std::vector<Op> ops;
};

struct LeakageTrace {
    std::vector<double> samples;
    LeakageModel model;
    std::uint64_t total_cycles = 0;
    std::optional<TraceGroundTruth> truth;
};

struct MissingAnnotations : std::runtime_error {
    MissingAnnotations() : std::runtime_error("trace carries no ground-truth annotations") {}
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// counter-based Gaussian: sample i of a seeded stream, independent of any
// generator state, so chunked parallel generation reproduces the sequential
// stream exactly
inline double gaussian_at(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t a = splitmix64(seed ^ splitmix64(2 * index));
    std::uint64_t b = splitmix64(seed ^ splitmix64(2 * index + 1));
    double u1 = (double(a >> 11) + 0.5) * 0x1p-53;  // (0, 1)
    double u2 = double(b >> 11) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline unsigned hw8(std::uint8_t b) { return unsigned(__builtin_popcount(b)); }

}  // namespace detail

// Deterministic: identical (trace, model) input produces bit-identical samples.
inline LeakageTrace synthesize_trace(const ExecutionTrace& trace, const LeakageModel& model) {
    LeakageTrace out;
    out.model = model;

    std::uint64_t cycles = 0;
    for (const auto& e : trace.events) cycles += model.op_cycles(e.kind);
    out.total_cycles = cycles;
    out.samples.reserve(cycles * model.samples_per_cycle);

    std::vector<double> cycle_values;
    cycle_values.reserve(model.op_cycles(OpKind::Mul));

    std::uint64_t sample_index = 0;
    auto push_cycle = [&](double v) {
        for (unsigned s = 0; s < model.samples_per_cycle; ++s) {
            double noise =
                model.sigma > 0.0
                    ? model.sigma * detail::gaussian_at(model.noise_seed, sample_index)
                    : 0.0;
            out.samples.push_back(v + noise);
            ++sample_index;
        }
    };

    for (const auto& e : trace.events) {
        const Var ids[3] = {e.dst, e.src1, e.src2};
        for (unsigned c = 0; c < model.addr_prologue_cycles; ++c) {
            unsigned h = c < 3 ? detail::hw8(var_id_byte(ids[c])) : 0;
            push_cycle(model.w_addr * double(h));
        }
        switch (e.kind) {
            case OpKind::Mul:
                for (const auto& pp : e.pp)
                    push_cycle(model.base_mul +
                               model.w_data * (double(pp.hw_a) * double(pp.hw_b)) / kMulHwNorm);
                break;
            case OpKind::Add:
                push_cycle(model.base_add + model.w_data * double(e.result_hw) / 256.0);
                break;
            case OpKind::Neg:
                push_cycle(model.base_neg + model.w_data * double(e.result_hw) / 256.0);
                break;
        }
    }

    if (!trace.ops.empty()) {
        TraceGroundTruth gt;
        gt.algorithm = trace.algorithm;
        gt.randomized = trace.randomized;
        gt.lambda = trace.randomized ? trace.lambda.v : U256{};
        gt.scalar = trace.scalar.k;
        gt.scalar_bits = trace.scalar.bits;
        for (const auto& op : trace.ops) gt.ops.push_back({op.label, op.bit_index});
        out.truth = std::move(gt);
    }
    return out;
}

struct BlockBoundary {
    OpLabel label;
    std::uint32_t op_index;
    std::uint8_t atom_index;  // 1-based within the operation
    std::size_t start_sample;
    std::size_t length;
};

inline unsigned blocks_of(OpLabel l) { return l == OpLabel::PD ? 10u : 16u; }

// One entry per MANA block, contiguous and equal-length.
inline std::vector<BlockBoundary> block_boundaries(const LeakageTrace& trace) {
    if (!trace.truth) throw MissingAnnotations{};
    std::vector<BlockBoundary> out;
    const std::size_t bs = trace.model.block_samples();
    std::size_t pos = 0;
    std::uint32_t op_index = 0;
    for (const auto& op : trace.truth->ops) {
        for (unsigned b = 0; b < blocks_of(op.label); ++b) {
            out.push_back(BlockBoundary{op.label, op_index, std::uint8_t(b + 1), pos, bs});
            pos += bs;
        }
        ++op_index;
    }
    return out;
}

}  // namespace kpsc
