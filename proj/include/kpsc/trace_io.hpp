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

// Trace file format and the JSON sidecar / profile / report documents.
//
// Binary trace: magic "KPSC", format version as 16-bit little-endian (1),
// samples-per-cycle as 32-bit little-endian, sample count as 64-bit
// little-endian, then IEEE-754 binary32 little-endian samples.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpsc/attack.hpp"

namespace kpsc {

using nlohmann::json;

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr char kTraceMagic[4] = {'K', 'P', 'S', 'C'};
inline constexpr std::uint16_t kTraceVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("trace file truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= T(std::uint8_t(in[pos + i])) << (8 * i);
    pos += sizeof(T);
    return v;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace detail

inline std::string encode_trace(const std::vector<double>& samples,
                                unsigned samples_per_cycle) {
    std::string out;
    out.reserve(18 + samples.size() * 4);
    out.append(kTraceMagic, 4);
    detail::put_le<std::uint16_t>(out, kTraceVersion);
    detail::put_le<std::uint32_t>(out, samples_per_cycle);
    detail::put_le<std::uint64_t>(out, samples.size());
    for (double d : samples) {
        float f = float(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_le<std::uint32_t>(out, bits);
    }
    return out;
}

struct LoadedTrace {
    std::vector<double> samples;
    unsigned samples_per_cycle = 1;
};

inline LoadedTrace decode_trace(const std::string& bytes) {
    if (bytes.size() < 18 || std::memcmp(bytes.data(), kTraceMagic, 4) != 0)
        throw IoError("not a trace file (bad magic)");
    std::size_t pos = 4;
    auto version = detail::get_le<std::uint16_t>(bytes, pos);
    if (version != kTraceVersion) throw IoError("unsupported trace version");
    auto spc = detail::get_le<std::uint32_t>(bytes, pos);
    auto count = detail::get_le<std::uint64_t>(bytes, pos);
    if (bytes.size() != 18 + count * 4)
        throw IoError("trace file length does not match declared sample count");
    LoadedTrace t;
    t.samples_per_cycle = spc;
    t.samples.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto bits = detail::get_le<std::uint32_t>(bytes, pos);
        float f;
        std::memcpy(&f, &bits, 4);
        t.samples.push_back(double(f));
    }
    return t;
}

inline void save_trace(const std::string& path, const LeakageTrace& trace) {
    detail::write_file(path, encode_trace(trace.samples, trace.model.samples_per_cycle));
}

inline LoadedTrace load_trace(const std::string& path) {
    return decode_trace(detail::read_file(path));
}

// --------------------------------------------------------------------------
// JSON documents

inline const char* algorithm_name(Algorithm a) {
    return a == Algorithm::LeftToRight ? "l2r" : "r2l";
}
inline Algorithm algorithm_from_name(const std::string& s) {
    if (s == "l2r") return Algorithm::LeftToRight;
    if (s == "r2l") return Algorithm::RightToLeft;
    throw IoError("unknown algorithm: " + s);
}

inline json model_to_json(const LeakageModel& m) {
    return json{{"w_data", m.w_data},
                {"w_addr", m.w_addr},
                {"base_mul", m.base_mul},
                {"base_add", m.base_add},
                {"base_neg", m.base_neg},
                {"sigma", m.sigma},
                {"samples_per_cycle", m.samples_per_cycle},
                {"addr_prologue_cycles", m.addr_prologue_cycles},
                {"noise_seed", m.noise_seed}};
}

inline LeakageModel model_from_json(const json& j) {
    LeakageModel m;
    m.w_data = j.at("w_data").get<double>();
    m.w_addr = j.at("w_addr").get<double>();
    m.base_mul = j.at("base_mul").get<double>();
    m.base_add = j.at("base_add").get<double>();
    m.base_neg = j.at("base_neg").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.samples_per_cycle = j.at("samples_per_cycle").get<unsigned>();
    m.addr_prologue_cycles = j.at("addr_prologue_cycles").get<unsigned>();
    m.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    return m;
}

struct Sidecar {
    Algorithm algorithm = Algorithm::LeftToRight;
    bool randomized = false;
    U256 scalar{};
    unsigned scalar_bits = 0;
    U256 lambda{};
    std::uint64_t lambda_seed = 0;
    LeakageModel model;
    std::string result_x, result_y;  // affine result, hex
    std::vector<TraceGroundTruth::Op> ops;

    static Sidecar from_trace(const LeakageTrace& trace, std::uint64_t lambda_seed,
                              const AffinePoint& result) {
        if (!trace.truth) throw MissingAnnotations{};
        const auto& gt = *trace.truth;
        Sidecar s;
        s.algorithm = gt.algorithm;
        s.randomized = gt.randomized;
        s.scalar = gt.scalar;
        s.scalar_bits = gt.scalar_bits;
        s.lambda = gt.lambda;
        s.lambda_seed = lambda_seed;
        s.model = trace.model;
        s.result_x = result.infinity ? "" : to_hex(result.x.v);
        s.result_y = result.infinity ? "" : to_hex(result.y.v);
        s.ops = gt.ops;
        return s;
    }

    TraceGroundTruth truth() const {
        TraceGroundTruth gt;
        gt.algorithm = algorithm;
        gt.randomized = randomized;
        gt.lambda = lambda;
        gt.scalar = scalar;
        gt.scalar_bits = scalar_bits;
        gt.ops = ops;
        return gt;
    }
};

inline json sidecar_to_json(const Sidecar& s) {
    json ops = json::array();
    for (const auto& op : s.ops)
        ops.push_back(json{{"label", op.label == OpLabel::PD ? "PD" : "PA"},
                           {"bit", op.bit_index}});
    json j{{"format", 1},
           {"algorithm", algorithm_name(s.algorithm)},
           {"randomized", s.randomized},
           {"scalar_hex", to_hex(s.scalar)},
           {"scalar_bits", s.scalar_bits},
           {"lambda_seed", s.lambda_seed},
           {"model", model_to_json(s.model)},
           {"result", json{{"x", s.result_x}, {"y", s.result_y}}},
           {"ops", ops}};
    if (s.randomized) j["lambda_hex"] = to_hex(s.lambda);
    return j;
}

inline Sidecar sidecar_from_json(const json& j) {
    Sidecar s;
    s.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    s.randomized = j.at("randomized").get<bool>();
    s.scalar = u256_from_hex(j.at("scalar_hex").get<std::string>());
    s.scalar_bits = j.at("scalar_bits").get<unsigned>();
    if (j.contains("lambda_hex")) s.lambda = u256_from_hex(j.at("lambda_hex").get<std::string>());
    s.lambda_seed = j.at("lambda_seed").get<std::uint64_t>();
    s.model = model_from_json(j.at("model"));
    s.result_x = j.at("result").at("x").get<std::string>();
    s.result_y = j.at("result").at("y").get<std::string>();
    for (const auto& op : j.at("ops")) {
        TraceGroundTruth::Op o;
        o.label = op.at("label").get<std::string>() == "PD" ? OpLabel::PD : OpLabel::PA;
        o.bit_index = op.at("bit").get<std::int16_t>();
        s.ops.push_back(o);
    }
    return s;
}

inline void save_sidecar(const std::string& path, const Sidecar& s) {
    detail::write_file(path, sidecar_to_json(s).dump(2) + "\n");
}

inline Sidecar load_sidecar(const std::string& path) {
    return sidecar_from_json(json::parse(detail::read_file(path)));
}

inline json profile_to_json(const SignatureProfile& p) {
    return json{{"format", 1},
                {"threshold", p.threshold},
                {"window_cycles", p.window_cycles},
                {"pd_signature", std::vector<unsigned>(p.pd_signature.begin(), p.pd_signature.end())},
                {"pa_signature", std::vector<unsigned>(p.pa_signature.begin(), p.pa_signature.end())}};
}

inline SignatureProfile profile_from_json(const json& j) {
    SignatureProfile p;
    p.threshold = j.at("threshold").get<double>();
    p.window_cycles = j.at("window_cycles").get<unsigned>();
    for (auto a : j.at("pd_signature")) p.pd_signature.insert(a.get<unsigned>());
    for (auto a : j.at("pa_signature")) p.pa_signature.insert(a.get<unsigned>());
    return p;
}

inline void save_profile(const std::string& path, const SignatureProfile& p) {
    detail::write_file(path, profile_to_json(p).dump(2) + "\n");
}
inline SignatureProfile load_profile(const std::string& path) {
    return profile_from_json(json::parse(detail::read_file(path)));
}

struct AttackReport {
    std::string mode;  // "data-bit" | "address-bit"
    Algorithm algorithm = Algorithm::LeftToRight;
    std::vector<OpLabel> labels;
    std::vector<double> confidence;
    std::string recovered_bits;
    bool assumed_bit0 = false;
    bool chance_level = false;   // data-bit verdict: no systematic anomalies
    double anomaly_rate = 0.0;   // data-bit
    json stats;                  // mode-specific extras
};

inline json report_to_json(const AttackReport& r) {
    std::string labels;
    for (OpLabel l : r.labels) labels += op_label_char(l);
    return json{{"format", 1},
                {"mode", r.mode},
                {"algorithm", algorithm_name(r.algorithm)},
                {"labels", labels},
                {"confidence", r.confidence},
                {"recovered_bits", r.recovered_bits},
                {"assumed_bit0", r.assumed_bit0},
                {"chance_level", r.chance_level},
                {"anomaly_rate", r.anomaly_rate},
                {"stats", r.stats}};
}

inline AttackReport report_from_json(const json& j) {
    AttackReport r;
    r.mode = j.at("mode").get<std::string>();
    r.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    for (char c : j.at("labels").get<std::string>())
        r.labels.push_back(c == 'D' ? OpLabel::PD : OpLabel::PA);
    r.confidence = j.at("confidence").get<std::vector<double>>();
    r.recovered_bits = j.at("recovered_bits").get<std::string>();
    r.assumed_bit0 = j.at("assumed_bit0").get<bool>();
    r.chance_level = j.at("chance_level").get<bool>();
    r.anomaly_rate = j.at("anomaly_rate").get<double>();
    if (j.contains("stats")) r.stats = j.at("stats");
    return r;
}

inline void save_report(const std::string& path, const AttackReport& r) {
    detail::write_file(path, report_to_json(r).dump(2) + "\n");
}
inline AttackReport load_report(const std::string& path) {
    return report_from_json(json::parse(detail::read_file(path)));
}

inline std::string scalar_bit_string(const U256& k, unsigned bits) {
    std::string s;
    for (int i = int(bits) - 1; i >= 0; --i) s += k.bit(unsigned(i)) ? '1' : '0';
    return s;
}

}  // namespace kpsc
