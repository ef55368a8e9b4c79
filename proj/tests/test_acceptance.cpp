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

// Acceptance suite: one test per criterion, fixed seeds throughout.

#include <gtest/gtest.h>

#include <chrono>
#include <numeric>

#include "kpsc/oracle.hpp"
#include "kpsc/trace_io.hpp"
#include "test_util.hpp"

using namespace kpsc;
using kpsc::test::bits_of;
using kpsc::test::random_scalar;
using kpsc::test::random_scalar64;
using kpsc::test::same_point;

namespace {

const AffinePoint G = AffinePoint::generator();

LeakageTrace default_trace(const Scalar& k, bool randomize, std::uint64_t lambda_seed,
                           std::uint64_t noise_seed, const char* alg = "l2r",
                           double sigma = 0.1) {
    KpResult run = std::string(alg) == "l2r"
                       ? (randomize ? kp_left_to_right(k, G, true, lambda_seed)
                                    : kp_left_to_right(k, G))
                       : kp_right_to_left(k, G);
    LeakageModel m;  // spec defaults, sigma overridable
    m.sigma = sigma;
    m.noise_seed = noise_seed;
    return synthesize_trace(run.trace, m);
}

SignatureProfile default_profile(double sigma = 0.1) {
    std::mt19937_64 rng(77);
    Scalar pk = random_scalar64(rng, true);
    LeakageTrace ptrace = default_trace(pk, true, 424242, 434343, "l2r", sigma);
    Template t = extract_template(ptrace, block_boundaries(ptrace), 24);
    return profile_signatures(ptrace, t, 0.9);
}

unsigned address_attack_bit_errors(const SignatureProfile& profile, int n_traces,
                                   double sigma, unsigned* total_bits = nullptr) {
    std::mt19937_64 rng(88);
    unsigned errors = 0, bits = 0;
    for (int i = 0; i < n_traces; ++i) {
        Scalar k = random_scalar64(rng);
        LeakageTrace trace =
            default_trace(k, true, 9000 + unsigned(i), 9500 + unsigned(i), "l2r", sigma);
        std::string want = bits_of(k);
        bits += unsigned(want.size());
        try {
            Template t = extract_template_headless(trace, 24);
            auto parse = label_operations(trace, t, profile);
            std::string got = recover_scalar(parse.labels, Algorithm::LeftToRight).bits;
            if (got.size() != want.size()) {
                errors += unsigned(want.size());
                continue;
            }
            for (std::size_t j = 0; j < want.size(); ++j) errors += got[j] != want[j];
        } catch (const std::exception&) {
            errors += unsigned(want.size());
        }
    }
    if (total_bits) *total_bits = bits;
    return errors;
}

}  // namespace

// 1. Scalar multiplication matches the independent affine oracle for 200
//    random scalars, all algorithm variants, in bounded time.
TEST(Acceptance, C01_KpCorrectness) {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        Scalar k = random_scalar(rng);
        oracle::OPoint want =
            oracle::scalar_mul(oracle::to_big(k.k), oracle::OPoint::generator());
        ASSERT_TRUE(same_point(kp_left_to_right(k, G).point, want)) << "plain l2r, i=" << i;
        ASSERT_TRUE(same_point(kp_left_to_right(k, G, true, 3000 + unsigned(i)).point, want))
            << "randomized l2r, i=" << i;
        ASSERT_TRUE(same_point(kp_right_to_left(k, G).point, want)) << "r2l, i=" << i;
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    RecordProperty("seconds", std::to_string(secs));
    EXPECT_LT(secs, 120.0);
}

// 2. Structural counts for the all-ones 5-bit scalar.
TEST(Acceptance, C02_StructuralCounts) {
    auto run = kp_left_to_right(Scalar::from_bits("11111"), G);
    unsigned pd = 0, pa = 0;
    for (const auto& op : run.trace.ops) {
        if (op.label == OpLabel::PD) {
            ++pd;
            EXPECT_EQ(op.n_events, 40u);
        } else {
            ++pa;
            EXPECT_EQ(op.n_events, 64u);
        }
    }
    EXPECT_EQ(pd, 4u);
    EXPECT_EQ(pa, 4u);

    unsigned blocks = 0;
    const auto& ev = run.trace.events;
    ASSERT_EQ(ev.size() % 4, 0u);
    for (std::size_t i = 0; i < ev.size(); i += 4) {
        ++blocks;
        EXPECT_EQ(ev[i + 0].kind, OpKind::Mul);
        EXPECT_EQ(ev[i + 1].kind, OpKind::Add);
        EXPECT_EQ(ev[i + 2].kind, OpKind::Neg);
        EXPECT_EQ(ev[i + 3].kind, OpKind::Add);
    }
    EXPECT_EQ(blocks, 104u);
}

// 3. Nine partial products per multiplication; values match the schoolbook
//    oracle on 1000 random pairs.
TEST(Acceptance, C03_KaratsubaSchedule) {
    std::mt19937_64 rng(33);
    for (int i = 0; i < 1000; ++i) {
        FieldElement a = kpsc::test::random_fe(rng), b = kpsc::test::random_fe(rng);
        auto r = fe_mul(a, b);
        std::array<bool, 9> seen{};
        for (const auto& e : r.events) {
            ASSERT_LT(e.index, 9);
            ASSERT_FALSE(seen[e.index]);
            seen[e.index] = true;
        }
        ASSERT_EQ(oracle::to_big(r.value.v),
                  oracle::mod_mul(oracle::to_big(a.v), oracle::to_big(b.v)));
    }
}

// 4. Data-bit attack recovers 50 random 64-bit odd scalars from unprotected
//    left-to-right traces with 100% bit accuracy.
TEST(Acceptance, C04_DatabitAttackOnUnprotectedTraces) {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(44);
    unsigned errors = 0, bits = 0;
    for (int i = 0; i < 50; ++i) {
        Scalar k = random_scalar64(rng, true);
        LeakageTrace trace = default_trace(k, false, 0, 4000 + unsigned(i));
        auto rep = databit_classify(trace);
        EXPECT_TRUE(rep.systematic_anomalies) << "trace " << i;
        std::string want = bits_of(k);
        std::string got = recover_scalar(rep.labels, Algorithm::LeftToRight).bits;
        bits += unsigned(want.size());
        if (got.size() != want.size()) {
            errors += unsigned(want.size());
            continue;
        }
        for (std::size_t j = 0; j < want.size(); ++j) errors += got[j] != want[j];
    }
    EXPECT_EQ(errors, 0u) << "of " << bits << " bits";
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(secs, 300.0);
}

// 5. Coron randomization defeats the data-bit attack: no systematic
//    anomalies, chance-level labels.
TEST(Acceptance, C05_RandomizationDefeatsDatabitAttack) {
    std::mt19937_64 rng(55);
    double acc_sum = 0;
    for (int i = 0; i < 50; ++i) {
        Scalar k = random_scalar64(rng);
        LeakageTrace trace = default_trace(k, true, 5000 + unsigned(i), 5500 + unsigned(i));
        auto rep = databit_classify(trace);
        EXPECT_FALSE(rep.systematic_anomalies) << "trace " << i;
        EXPECT_LT(rep.anomaly_rate, 0.03) << "trace " << i;
        acc_sum += label_accuracy(rep.labels, trace.truth->ops);
    }
    double acc = acc_sum / 50.0;
    RecordProperty("mean_accuracy", std::to_string(acc));
    EXPECT_GE(acc, 0.4);
    EXPECT_LE(acc, 0.6);
}

// 6. Address-bit template attack (24-cycle template, 0.9 threshold) recovers
//    50 random 64-bit scalars from randomized traces with 100% bit accuracy
//    at sigma = 0.1; accuracy at larger sigma reported as a curve.
TEST(Acceptance, C06_AddressBitAttackDespiteRandomization) {
    auto start = std::chrono::steady_clock::now();
    SignatureProfile profile = default_profile();
    unsigned bits = 0;
    unsigned errors = address_attack_bit_errors(profile, 50, 0.1, &bits);
    EXPECT_EQ(errors, 0u) << "of " << bits << " bits at sigma 0.1";

    for (double sigma : {0.2, 0.5, 1.0}) {
        unsigned b = 0;
        unsigned e = address_attack_bit_errors(profile, 50, sigma, &b);
        double acc = 1.0 - double(e) / double(b);
        std::printf("[ degradation ] sigma %.1f -> bit accuracy %.4f (%u/%u)\n", sigma, acc,
                    b - e, b);
        RecordProperty(("accuracy_sigma_" + std::to_string(sigma)).c_str(),
                       std::to_string(acc));
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(secs, 300.0);
}

// 7. Correlation separation: signature atom starts above 0.9, the 99th
//    percentile of every other offset below 0.9.
TEST(Acceptance, C07_CorrelationSeparation) {
    SignatureProfile profile = default_profile();
    std::mt19937_64 rng(66);
    for (int i = 0; i < 5; ++i) {
        Scalar k = random_scalar64(rng);
        LeakageTrace trace = default_trace(k, true, 7000 + unsigned(i), 7500 + unsigned(i));
        Template t = extract_template_headless(trace, 24);
        CorrelationSeries series = sliding_pearson(trace, t);

        std::set<std::size_t> matching;
        for (const auto& b : block_boundaries(trace)) {
            const auto& sig =
                b.label == OpLabel::PD ? profile.pd_signature : profile.pa_signature;
            if (sig.count(b.atom_index)) matching.insert(b.start_sample);
        }
        ASSERT_FALSE(matching.empty());

        double match_min = 1.0;
        std::vector<double> others;
        for (std::size_t off = 0; off < series.values.size(); ++off) {
            if (!series.defined[off]) continue;
            if (matching.count(off)) match_min = std::min(match_min, series.values[off]);
            else others.push_back(series.values[off]);
        }
        std::sort(others.begin(), others.end());
        double p99 = others[std::size_t(0.99 * double(others.size() - 1))];
        EXPECT_GT(match_min, 0.9) << "trace " << i;
        EXPECT_LT(p99, 0.9) << "trace " << i;
    }
}

// 8. Right-to-left first operations stand out: mean mul energy of the first
//    PD and first PA deviates from the median of later same-type operations
//    by more than 3 robust z-scores.
TEST(Acceptance, C08_RightToLeftFirstOperationAnomaly) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 5; ++i) {
        Scalar k = random_scalar64(rng, true);
        LeakageTrace trace = default_trace(k, false, 0, 8000 + unsigned(i), "r2l");
        auto rep = databit_classify(trace);

        std::vector<double> pd_means, pa_means;
        std::size_t b = 0;
        for (const auto& op : trace.truth->ops) {
            unsigned nb = blocks_of(op.label);
            double s = 0;
            for (unsigned j = 0; j < nb; ++j) s += rep.atom_means[b + j];
            b += nb;
            (op.label == OpLabel::PD ? pd_means : pa_means).push_back(s / nb);
        }
        auto robust_z = [](const std::vector<double>& v) {
            std::vector<double> later(v.begin() + 1, v.end());
            std::vector<double> s = later;
            std::sort(s.begin(), s.end());
            double med = s[s.size() / 2];
            std::vector<double> dev;
            for (double x : later) dev.push_back(std::abs(x - med));
            std::sort(dev.begin(), dev.end());
            double mad = std::max(dev[dev.size() / 2] * 1.4826, 1e-12);
            return std::abs(v.front() - med) / mad;
        };
        EXPECT_GT(robust_z(pd_means), 3.0) << "trace " << i;
        EXPECT_GT(robust_z(pa_means), 3.0) << "trace " << i;
    }
}

// 9. Pearson unit properties at the stated tolerances.
TEST(Acceptance, C09_PearsonUnitProperties) {
    std::vector<double> x{2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5, 9};
    EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);

    std::vector<double> anti(x.size()), affine(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        anti[i] = -2.0 * x[i] + 3.0;
        affine[i] = 0.5 * x[i] + 100.0;
    }
    EXPECT_NEAR(pearson(x, anti), -1.0, 1e-12);
    EXPECT_NEAR(pearson(x, affine), 1.0, 1e-12);

    std::vector<double> constant(x.size(), 4.0);
    EXPECT_THROW(pearson(x, constant), ZeroVariance);

    // affine invariance of the whole sliding series
    LeakageTrace trace = default_trace(Scalar::from_bits("10110"), true, 1, 2);
    Template t = extract_template_headless(trace, 24);
    auto base = sliding_pearson(trace, t);
    LeakageTrace scaled = trace;
    for (double& v : scaled.samples) v = 1.75 * v + 42.0;
    auto moved = sliding_pearson(scaled, extract_template_headless(scaled, 24));
    for (std::size_t i = 0; i < base.values.size(); ++i)
        if (base.defined[i]) EXPECT_NEAR(base.values[i], moved.values[i], 1e-9);
}

// 10. Determinism and format: identical seeds give byte-identical files,
//     load/save round-trips are byte-identical.
TEST(Acceptance, C10_DeterminismAndFormat) {
    auto make_bytes = [] {
        auto run = kp_left_to_right(Scalar::from_hex("1f"), G, true, 7);
        LeakageModel m;
        m.noise_seed = 21;
        auto trace = synthesize_trace(run.trace, m);
        return encode_trace(trace.samples, trace.model.samples_per_cycle);
    };
    std::string b1 = make_bytes(), b2 = make_bytes();
    EXPECT_EQ(b1, b2);

    LoadedTrace loaded = decode_trace(b1);
    EXPECT_EQ(encode_trace(loaded.samples, loaded.samples_per_cycle), b1);
}
