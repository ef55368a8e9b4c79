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

// P-256 point doubling and addition in Jacobian coordinates, decomposed into
// MANA atomic blocks (multiply, add, negate, add). Ten blocks per doubling,
// sixteen per addition, one real field multiplication per block; spare
// add/negate slots run dummy operations on a dedicated dummy register.
// Every executed field operation is logged with its register identities.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kpsc/field.hpp"

namespace kpsc {

// Curve constants (NIST P-256). a = p - 3 lives in field.hpp as a register
// value; the rest are needed for validation and the generator.
inline constexpr U256 P256_B{0x3bce3c3e27d2604bULL, 0x651d06b0cc53b0f6ULL,
                             0xb3ebbd55769886bcULL, 0x5ac635d8aa3a93e7ULL};
inline constexpr U256 P256_GX{0xf4a13945d898c296ULL, 0x77037d812deb33a0ULL,
                              0xf8bce6e563a440f2ULL, 0x6b17d1f2e12c4247ULL};
inline constexpr U256 P256_GY{0xcbb6406837bf51f5ULL, 0x2bce33576b315eceULL,
                              0x8ee7eb4a7c0f9e16ULL, 0x4fe342e2fe1a7f9bULL};
inline constexpr U256 P256_N{0xf3b9cac2fc632551ULL, 0xbce6faada7179e84ULL,
                             0xffffffffffffffffULL, 0xffffffff00000000ULL};

struct InfinityInput : std::runtime_error {
    InfinityInput() : std::runtime_error("point at infinity not accepted") {}
};
struct ExceptionalAddition : std::runtime_error {
    ExceptionalAddition() : std::runtime_error("exceptional addition: P = +/-Q") {}
};
struct ZeroLambda : std::runtime_error {
    ZeroLambda() : std::runtime_error("randomization lambda must be nonzero") {}
};

struct AffinePoint {
    FieldElement x, y;
    bool infinity = false;

    static AffinePoint at_infinity() { return AffinePoint{{}, {}, true}; }
    static AffinePoint generator() {
        return AffinePoint{FieldElement{P256_GX}, FieldElement{P256_GY}, false};
    }
};

// Z == 0 encodes the point at infinity; affine = (X/Z^2, Y/Z^3).
struct JacobianPoint {
    FieldElement X, Y, Z;

    static JacobianPoint from_affine(const AffinePoint& p) {
        if (p.infinity) return JacobianPoint{{}, {}, {}};
        return JacobianPoint{p.x, p.y, FieldElement::from_u64(1)};
    }
    bool is_infinity() const { return Z.is_zero(); }
};

// Register file of the atomic-block engine. The doubling and the addition
// routine each have their own locals; only the working point (X1,Y1,Z1), the
// second operand (X2,Y2,Z2), the curve constant and the dummy register are
// shared. NONE is the "absent operand" sentinel and encodes as id 0.
enum class Var : std::uint8_t {
    NONE,
    X1, Y1, Z1, X2, Y2, Z2, ACONST, DUM,
    // doubling locals
    DT1, DT2, DT3, DT4, DT5, DT6, DT7, DM, DS, DR, DN1, DN2, DX3, DY3, DZ3,
    // addition locals
    AT1, AT2, AT3, AT4, AT5, AT6, AT7, AU1, AU2, AS1, AS2, AH, AR, AW, AW2,
    AN1, AN2, AX3, AY3, AZ3, AZZ,
    COUNT
};
inline constexpr std::size_t kVarCount = std::size_t(Var::COUNT);

// Fixed register-address table: the byte is what an 8-bit address bus would
// carry for the register, and its Hamming weight is what the leakage model
// sees. Addresses are grouped in weight classes: the shared point registers,
// the doubling add-chain and all addition locals sit in low-weight bytes
// (popcount 1-2), the doubling multiplication destinations in high-weight
// bytes (popcount 6-7), the dummy register at 0xff. Weight collisions inside
// a class are deliberate.
inline constexpr std::array<std::uint8_t, kVarCount> kVarIdByte = [] {
    std::array<std::uint8_t, kVarCount> t{};
    auto set = [&t](Var v, std::uint8_t b) { t[std::size_t(v)] = b; };
    set(Var::NONE, 0x00);
    set(Var::X1, 0x01); set(Var::Y1, 0x02); set(Var::Z1, 0x04);
    set(Var::X2, 0x08); set(Var::Y2, 0x10); set(Var::Z2, 0x20);
    set(Var::ACONST, 0x5f); set(Var::DUM, 0xff);
    set(Var::DT1, 0x40);
    set(Var::DT2, 0x7f); set(Var::DT3, 0xbf); set(Var::DT4, 0xdf);
    set(Var::DT5, 0xef); set(Var::DT6, 0xf7); set(Var::DT7, 0xfb);
    set(Var::DM, 0x03); set(Var::DS, 0x05); set(Var::DR, 0x3f);
    set(Var::DN1, 0x06); set(Var::DN2, 0x09);
    set(Var::DX3, 0xfd); set(Var::DY3, 0xfe); set(Var::DZ3, 0x0a);
    set(Var::AT1, 0x0c); set(Var::AT2, 0x11); set(Var::AT3, 0x12);
    set(Var::AT4, 0x14); set(Var::AT5, 0x18); set(Var::AT6, 0x21);
    set(Var::AT7, 0x22);
    set(Var::AU1, 0x24); set(Var::AU2, 0x28);
    set(Var::AS1, 0x30); set(Var::AS2, 0x41);
    set(Var::AH, 0x80); set(Var::AR, 0x42); set(Var::AW, 0x44);
    set(Var::AW2, 0x48); set(Var::AN1, 0x50); set(Var::AN2, 0x60);
    set(Var::AX3, 0x81); set(Var::AY3, 0x82); set(Var::AZ3, 0x84);
    set(Var::AZZ, 0x88);
    return t;
}();

inline std::uint8_t var_id_byte(Var v) { return kVarIdByte[std::size_t(v)]; }

inline const char* var_name(Var v) {
    static const char* names[] = {
        "-", "X1", "Y1", "Z1", "X2", "Y2", "Z2", "a", "DUM",
        "dT1", "dT2", "dT3", "dT4", "dT5", "dT6", "dT7", "dM", "dS", "dR",
        "dN1", "dN2", "dX3", "dY3", "dZ3",
        "aT1", "aT2", "aT3", "aT4", "aT5", "aT6", "aT7", "aU1", "aU2", "aS1",
        "aS2", "aH", "aR", "aW", "aW2", "aN1", "aN2", "aX3", "aY3", "aZ3", "aZZ"};
    return names[std::size_t(v)];
}

enum class OpKind : std::uint8_t { Mul, Add, Neg };

// One executed field operation, as the leakage simulator consumes it.
struct FieldOpEvent {
    OpKind kind;
    Var dst;
    Var src1;
    Var src2;  // Var::NONE when absent (negation)
    PartialProducts pp{};          // multiplication only
    std::uint16_t result_hw = 0;   // popcount of the result value
    bool src1_trivial = false;     // operand value was 0 or 1
    bool src2_trivial = false;
    std::uint8_t block_index = 0;  // 1-based atom index within the operation
    std::uint8_t slot_index = 0;   // 0..3 inside the MANA block
    std::uint32_t op_index = 0;    // which PD/PA of the run
    std::int16_t bit_index = 0;    // scalar bit being processed
};

struct EventSink {
    std::vector<FieldOpEvent>* out = nullptr;
    std::uint32_t op_index = 0;
    std::int16_t bit_index = 0;

    void emit(FieldOpEvent e) {
        if (!out) return;
        e.op_index = op_index;
        e.bit_index = bit_index;
        out->push_back(e);
    }
};

// One slot of a MANA block.
struct Slot {
    OpKind kind;
    Var dst;
    Var src1;
    Var src2;  // NONE for negation
};

using AtomicBlock = std::array<Slot, 4>;  // fixed order: Mul, Add, Neg, Add

namespace detail {

constexpr Slot dum_a() { return {OpKind::Add, Var::DUM, Var::DUM, Var::DUM}; }
constexpr Slot dum_n() { return {OpKind::Neg, Var::DUM, Var::DUM, Var::NONE}; }
constexpr Slot mul(Var d, Var a, Var b) { return {OpKind::Mul, d, a, b}; }
constexpr Slot add(Var d, Var a, Var b) { return {OpKind::Add, d, a, b}; }
constexpr Slot neg(Var d, Var a) { return {OpKind::Neg, d, a, Var::NONE}; }

}  // namespace detail

// Doubling: T1=X^2, T2=Z^2, T3=T2^2, T4=a*T3, M=3T1+T4, T5=Y^2, S=4*X*T5,
// T6=T5^2, X3=M^2-2S, Y3=M*(S-X3)-8T6, Z3=2*Y*Z; one multiplication per
// block, in that order.
inline constexpr std::array<AtomicBlock, 10> kDoubleProgram = [] {
    using namespace detail;
    using V = Var;
    return std::array<AtomicBlock, 10>{{
        {mul(V::DT1, V::X1, V::X1), dum_a(), dum_n(), dum_a()},
        {mul(V::DT2, V::Z1, V::Z1), add(V::DM, V::DT1, V::DT1), dum_n(), dum_a()},
        {mul(V::DT3, V::DT2, V::DT2), add(V::DM, V::DM, V::DT1), dum_n(), dum_a()},
        {mul(V::DT4, V::ACONST, V::DT3), dum_a(), dum_n(), dum_a()},
        {mul(V::DT5, V::Y1, V::Y1), add(V::DM, V::DM, V::DT4), dum_n(), dum_a()},
        {mul(V::DS, V::X1, V::DT5), add(V::DS, V::DS, V::DS), dum_n(), add(V::DS, V::DS, V::DS)},
        {mul(V::DT6, V::DT5, V::DT5), add(V::DN2, V::DS, V::DS), neg(V::DN1, V::DN2),
         add(V::DT6, V::DT6, V::DT6)},
        {mul(V::DX3, V::DM, V::DM), add(V::DX3, V::DX3, V::DN1), neg(V::DN2, V::DX3),
         add(V::DR, V::DS, V::DN2)},
        {mul(V::DY3, V::DM, V::DR), add(V::DT6, V::DT6, V::DT6), dum_n(),
         add(V::DT6, V::DT6, V::DT6)},
        {mul(V::DT7, V::Y1, V::Z1), add(V::DZ3, V::DT7, V::DT7), neg(V::DN1, V::DT6),
         add(V::DY3, V::DY3, V::DN1)},
    }};
}();

// Addition: T1=Z2^2, T2=Z1^2, U1=X1*T1, U2=X2*T2, T3=Z2*T1, T4=Z1*T2,
// S1=Y1*T3, S2=Y2*T4, H=U2-U1, R=S2-S1, T5=H^2, T6=H*T5, T7=U1*T5,
// X3=R^2-T6-2T7, Y3=R*(T7-X3)-S1*T6, Z3=(Z1*Z2)*H.
inline constexpr std::array<AtomicBlock, 16> kAddProgram = [] {
    using namespace detail;
    using V = Var;
    return std::array<AtomicBlock, 16>{{
        {mul(V::AT1, V::Z2, V::Z2), dum_a(), dum_n(), dum_a()},
        {mul(V::AT2, V::Z1, V::Z1), dum_a(), dum_n(), dum_a()},
        {mul(V::AU1, V::X1, V::AT1), dum_a(), dum_n(), dum_a()},
        {mul(V::AU2, V::X2, V::AT2), dum_a(), dum_n(), dum_a()},
        {mul(V::AT3, V::Z2, V::AT1), dum_a(), neg(V::AN1, V::AU1), add(V::AH, V::AU2, V::AN1)},
        {mul(V::AT4, V::Z1, V::AT2), dum_a(), dum_n(), dum_a()},
        {mul(V::AS1, V::Y1, V::AT3), dum_a(), dum_n(), dum_a()},
        {mul(V::AS2, V::Y2, V::AT4), dum_a(), neg(V::AN2, V::AS1), add(V::AR, V::AS2, V::AN2)},
        {mul(V::AT5, V::AH, V::AH), dum_a(), dum_n(), dum_a()},
        {mul(V::AT6, V::AH, V::AT5), dum_a(), dum_n(), dum_a()},
        {mul(V::AT7, V::AU1, V::AT5), add(V::AW2, V::AT7, V::AT7), neg(V::AN1, V::AW2), dum_a()},
        {mul(V::AX3, V::AR, V::AR), add(V::AX3, V::AX3, V::AN1), neg(V::AN2, V::AT6),
         add(V::AX3, V::AX3, V::AN2)},
        {mul(V::AW, V::AS1, V::AT6), dum_a(), neg(V::AN1, V::AX3), add(V::AW2, V::AT7, V::AN1)},
        {mul(V::AY3, V::AR, V::AW2), dum_a(), neg(V::AN2, V::AW), add(V::AY3, V::AY3, V::AN2)},
        {mul(V::AZZ, V::Z1, V::Z2), dum_a(), dum_n(), dum_a()},
        {mul(V::AZ3, V::AZZ, V::AH), dum_a(), dum_n(), dum_a()},
    }};
}();

namespace detail {

using Regs = std::array<FieldElement, kVarCount>;

inline bool fe_trivial(const FieldElement& v) { return v.is_zero() || v.is_one(); }

inline void run_block(Regs& regs, const AtomicBlock& block, std::uint8_t block_index,
                      EventSink& sink) {
    for (std::uint8_t s = 0; s < 4; ++s) {
        const Slot& slot = block[s];
        FieldOpEvent e{};
        e.kind = slot.kind;
        e.dst = slot.dst;
        e.src1 = slot.src1;
        e.src2 = slot.src2;
        e.block_index = block_index;
        e.slot_index = s;
        const FieldElement& a = regs[std::size_t(slot.src1)];
        e.src1_trivial = fe_trivial(a);
        switch (slot.kind) {
            case OpKind::Mul: {
                const FieldElement& b = regs[std::size_t(slot.src2)];
                e.src2_trivial = fe_trivial(b);
                MulResult r = fe_mul(a, b);
                e.pp = r.events;
                e.result_hw = std::uint16_t(r.value.v.popcount());
                regs[std::size_t(slot.dst)] = r.value;
                break;
            }
            case OpKind::Add: {
                const FieldElement& b = regs[std::size_t(slot.src2)];
                e.src2_trivial = fe_trivial(b);
                FieldElement r = fe_add(a, b);
                e.result_hw = std::uint16_t(r.v.popcount());
                regs[std::size_t(slot.dst)] = r;
                break;
            }
            case OpKind::Neg: {
                FieldElement r = fe_neg(a);
                e.result_hw = std::uint16_t(r.v.popcount());
                regs[std::size_t(slot.dst)] = r;
                break;
            }
        }
        sink.emit(e);
    }
}

inline Regs fresh_regs() {
    Regs regs{};
    U256 a_val;
    u256_sub(P256_P, U256::from_u64(3), a_val);
    regs[std::size_t(Var::ACONST)] = FieldElement{a_val};
    return regs;  // DUM and all locals start at zero
}

}  // namespace detail

// Returns 2Q, emitting exactly 10 MANA blocks (40 field-operation events).
inline JacobianPoint point_double_atomic(const JacobianPoint& q, EventSink& sink) {
    if (q.is_infinity()) throw InfinityInput{};
    detail::Regs regs = detail::fresh_regs();
    regs[std::size_t(Var::X1)] = q.X;
    regs[std::size_t(Var::Y1)] = q.Y;
    regs[std::size_t(Var::Z1)] = q.Z;
    for (std::size_t b = 0; b < kDoubleProgram.size(); ++b)
        detail::run_block(regs, kDoubleProgram[b], std::uint8_t(b + 1), sink);
    return JacobianPoint{regs[std::size_t(Var::DX3)], regs[std::size_t(Var::DY3)],
                         regs[std::size_t(Var::DZ3)]};
}

// Returns Q + P, emitting exactly 16 MANA blocks (64 events). Rejects the
// H = 0 cases (P = +/-Q) before any block is emitted.
inline JacobianPoint point_add_atomic(const JacobianPoint& q, const JacobianPoint& p,
                                      EventSink& sink) {
    if (q.is_infinity() || p.is_infinity()) throw InfinityInput{};
    {
        FieldElement z2s = fe_mul_value(p.Z, p.Z);
        FieldElement z1s = fe_mul_value(q.Z, q.Z);
        FieldElement u1 = fe_mul_value(q.X, z2s);
        FieldElement u2 = fe_mul_value(p.X, z1s);
        if (u1 == u2) throw ExceptionalAddition{};
    }
    detail::Regs regs = detail::fresh_regs();
    regs[std::size_t(Var::X1)] = q.X;
    regs[std::size_t(Var::Y1)] = q.Y;
    regs[std::size_t(Var::Z1)] = q.Z;
    regs[std::size_t(Var::X2)] = p.X;
    regs[std::size_t(Var::Y2)] = p.Y;
    regs[std::size_t(Var::Z2)] = p.Z;
    for (std::size_t b = 0; b < kAddProgram.size(); ++b)
        detail::run_block(regs, kAddProgram[b], std::uint8_t(b + 1), sink);
    return JacobianPoint{regs[std::size_t(Var::AX3)], regs[std::size_t(Var::AY3)],
                         regs[std::size_t(Var::AZ3)]};
}

// Coron projective randomization: (x, y) -> (lambda^2 x, lambda^3 y, lambda).
inline JacobianPoint coron_randomize(const AffinePoint& p, const FieldElement& lambda) {
    if (lambda.is_zero()) throw ZeroLambda{};
    if (p.infinity) throw InfinityInput{};
    FieldElement l2 = fe_mul_value(lambda, lambda);
    FieldElement l3 = fe_mul_value(l2, lambda);
    return JacobianPoint{fe_mul_value(l2, p.x), fe_mul_value(l3, p.y), lambda};
}

inline AffinePoint to_affine(const JacobianPoint& q) {
    if (q.is_infinity()) return AffinePoint::at_infinity();
    FieldElement zi = fe_inv(q.Z);
    FieldElement zi2 = fe_mul_value(zi, zi);
    return AffinePoint{fe_mul_value(q.X, zi2), fe_mul_value(q.Y, fe_mul_value(zi2, zi)), false};
}

// y^2 == x^3 - 3x + b
inline bool on_curve(const AffinePoint& p) {
    if (p.infinity) return true;
    FieldElement lhs = fe_mul_value(p.y, p.y);
    FieldElement x3 = fe_mul_value(fe_mul_value(p.x, p.x), p.x);
    FieldElement want = fe_add(fe_sub(x3, fe_mul_value(FieldElement::from_u64(3), p.x)),
                               FieldElement{P256_B});
    return lhs == want;
}

}  // namespace kpsc
