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

// Command-line surface: simulate -> attack -> verify pipelines plus profile
// and CSV export.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kpsc/oracle.hpp"
#include "kpsc/trace_io.hpp"

namespace {

using namespace kpsc;

struct SimulateOptions {
    std::string algorithm = "l2r";
    std::string scalar_hex;
    std::string scalar_bits;
    bool randomize = false;
    std::uint64_t lambda_seed = 1;
    LeakageModel model;
    std::string out = "trace.kpsc";
    std::string sidecar;  // defaults to out + ".json"
};

// configuration file: a flat JSON object whose keys mirror the long flags;
// explicit flags override it
void apply_config(const std::string& path, SimulateOptions& o) {
    json j = json::parse(detail::read_file(path));
    if (!j.is_object()) throw IoError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "alg") o.algorithm = value.get<std::string>();
        else if (key == "k") o.scalar_hex = value.get<std::string>();
        else if (key == "k-bin") o.scalar_bits = value.get<std::string>();
        else if (key == "randomize") o.randomize = value.get<bool>();
        else if (key == "seed") o.lambda_seed = value.get<std::uint64_t>();
        else if (key == "noise-seed") o.model.noise_seed = value.get<std::uint64_t>();
        else if (key == "w-data") o.model.w_data = value.get<double>();
        else if (key == "w-addr") o.model.w_addr = value.get<double>();
        else if (key == "base-mul") o.model.base_mul = value.get<double>();
        else if (key == "base-add") o.model.base_add = value.get<double>();
        else if (key == "base-neg") o.model.base_neg = value.get<double>();
        else if (key == "sigma") o.model.sigma = value.get<double>();
        else if (key == "spc") o.model.samples_per_cycle = value.get<unsigned>();
        else if (key == "prologue-cycles") o.model.addr_prologue_cycles = value.get<unsigned>();
        else if (key == "out") o.out = value.get<std::string>();
        else if (key == "sidecar") o.sidecar = value.get<std::string>();
        else if (key == "curve") {
            if (value.get<std::string>() != "p256") throw IoError("only curve p256 is supported");
        } else {
            throw IoError("unknown config key: " + key);
        }
    }
}

Scalar parse_scalar(const SimulateOptions& o) {
    if (!o.scalar_bits.empty()) return Scalar::from_bits(o.scalar_bits);
    if (!o.scalar_hex.empty()) return Scalar::from_hex(o.scalar_hex);
    throw IoError("a scalar is required (--k or --k-bin)");
}

int cmd_simulate(const SimulateOptions& o) {
    Scalar k = parse_scalar(o);
    KpResult run;
    if (o.algorithm == "l2r") {
        run = kp_left_to_right(k, AffinePoint::generator(), o.randomize, o.lambda_seed);
    } else if (o.algorithm == "r2l") {
        if (o.randomize) throw IoError("coordinate randomization applies to l2r only");
        run = kp_right_to_left(k, AffinePoint::generator());
    } else {
        throw IoError("unknown algorithm: " + o.algorithm);
    }

    LeakageTrace trace = synthesize_trace(run.trace, o.model);
    save_trace(o.out, trace);
    std::string sidecar_path = o.sidecar.empty() ? o.out + ".json" : o.sidecar;
    save_sidecar(sidecar_path, Sidecar::from_trace(trace, o.lambda_seed, run.point));

    std::printf("trace:   %s (%zu samples, %llu cycles)\n", o.out.c_str(),
                trace.samples.size(), (unsigned long long)trace.total_cycles);
    std::printf("sidecar: %s\n", sidecar_path.c_str());
    std::printf("kP.x = %s\nkP.y = %s\n", to_hex(run.point.x.v).c_str(),
                to_hex(run.point.y.v).c_str());
    return 0;
}

struct AttackOptions {
    std::string trace_path;
    std::string mode = "address-bit";
    std::string algorithm = "l2r";
    std::string profile_path;
    std::string profiling_trace;
    double threshold = 0.9;
    unsigned window_cycles = 24;
    double mad_threshold = 4.0;
    double min_anomaly_rate = 0.03;
    unsigned prologue_cycles = 3;
    std::string out = "report.json";
    std::string correlation_csv;
};

LeakageTrace trace_for_attack(const std::string& path, unsigned prologue_cycles,
                              const std::string& sidecar_path = "") {
    LoadedTrace raw = load_trace(path);
    LeakageTrace t;
    t.samples = std::move(raw.samples);
    t.model.samples_per_cycle = raw.samples_per_cycle;
    t.model.addr_prologue_cycles = prologue_cycles;
    if (!sidecar_path.empty()) {
        Sidecar sc = load_sidecar(sidecar_path);
        t.truth = sc.truth();
        t.model = sc.model;
    }
    return t;
}

int cmd_attack(const AttackOptions& o) {
    LeakageTrace trace = trace_for_attack(o.trace_path, o.prologue_cycles);
    AttackReport report;
    report.algorithm = algorithm_from_name(o.algorithm);
    report.mode = o.mode;

    if (o.mode == "data-bit") {
        DatabitReport rep = databit_classify(trace, o.mad_threshold, o.min_anomaly_rate);
        report.labels = rep.labels;
        report.confidence = rep.confidence;
        report.chance_level = !rep.systematic_anomalies;
        report.anomaly_rate = rep.anomaly_rate;
        std::string flags(rep.flags.size(), '0');
        for (std::size_t i = 0; i < rep.flags.size(); ++i)
            if (rep.flags[i]) flags[i] = '1';
        report.stats = json{{"median", rep.median},
                            {"mad", rep.mad},
                            {"flagged_atoms", std::count(rep.flags.begin(), rep.flags.end(), 1)},
                            {"atoms", rep.flags.size()},
                            {"atom_flags", flags}};
        // chance-level label sequences routinely violate the scalar grammar;
        // that is a finding, not an error
        try {
            RecoveredScalar rec = recover_scalar(rep.labels, report.algorithm);
            report.recovered_bits = rec.bits;
            report.assumed_bit0 = rec.assumed_bit0;
        } catch (const GrammarViolation& e) {
            report.recovered_bits.clear();
            report.stats["grammar_violation"] = e.what();
        }
        if (report.chance_level)
            std::printf("data-bit: no systematic anomalies; classification at chance\n");
        else
            std::printf("data-bit: anomaly rate %.1f%%, %zu operations labeled\n",
                        100.0 * rep.anomaly_rate, rep.labels.size());
    } else if (o.mode == "address-bit") {
        SignatureProfile profile;
        if (!o.profile_path.empty()) {
            profile = load_profile(o.profile_path);
        } else if (!o.profiling_trace.empty()) {
            LeakageTrace ptrace = trace_for_attack(o.profiling_trace, o.prologue_cycles,
                                                   o.profiling_trace + ".json");
            Template pt = extract_template(ptrace, block_boundaries(ptrace), o.window_cycles);
            profile = profile_signatures(ptrace, pt, o.threshold);
        } else {
            throw IoError("address-bit mode needs --profile or --profiling-trace");
        }
        Template t = extract_template_headless(trace, o.window_cycles);
        CorrelationSeries series = sliding_pearson(trace, t);
        if (!o.correlation_csv.empty()) {
            std::string csv = "offset,pearson\n";
            for (std::size_t i = 0; i < series.values.size(); ++i)
                if (series.defined[i])
                    csv += std::to_string(i) + "," + std::to_string(series.values[i]) + "\n";
            detail::write_file(o.correlation_csv, csv);
        }
        LabeledParse parse = label_operations(trace, t, profile);
        report.labels = parse.labels;
        report.confidence = parse.confidence;
        // per-atom correlation matrix: one row per labeled operation, one
        // value per atom-start offset
        {
            json matrix = json::array();
            std::size_t block = 0;
            const std::size_t bs = trace.model.block_samples();
            for (OpLabel l : parse.labels) {
                json row = json::array();
                for (unsigned j = 0; j < blocks_of(l); ++j, ++block) {
                    std::size_t off = block * bs;
                    row.push_back(off < series.values.size() && series.defined[off]
                                      ? json(series.values[off])
                                      : json());
                }
                matrix.push_back(row);
            }
            report.stats["atom_correlations"] = std::move(matrix);
            report.stats["pd_signature"] = std::vector<unsigned>(profile.pd_signature.begin(),
                                                                 profile.pd_signature.end());
            report.stats["pa_signature"] = std::vector<unsigned>(profile.pa_signature.begin(),
                                                                 profile.pa_signature.end());
        }
        try {
            RecoveredScalar rec = recover_scalar(parse.labels, report.algorithm);
            report.recovered_bits = rec.bits;
            report.assumed_bit0 = rec.assumed_bit0;
        } catch (const GrammarViolation& e) {
            report.recovered_bits.clear();
            report.stats["grammar_violation"] = e.what();
        }
        std::printf("address-bit: %zu operations labeled, %zu bits recovered\n",
                    parse.labels.size(), report.recovered_bits.size());
    } else {
        throw IoError("unknown attack mode: " + o.mode);
    }

    save_report(o.out, report);
    std::printf("report:  %s\nbits:    %s\n", o.out.c_str(), report.recovered_bits.c_str());
    return 0;
}

int cmd_profile(const std::string& trace_path, const std::string& sidecar_path,
                double threshold, unsigned window_cycles, unsigned prologue_cycles,
                const std::string& out) {
    LeakageTrace trace = trace_for_attack(
        trace_path, prologue_cycles,
        sidecar_path.empty() ? trace_path + ".json" : sidecar_path);
    Template t = extract_template(trace, block_boundaries(trace), window_cycles);
    SignatureProfile profile = profile_signatures(trace, t, threshold);
    save_profile(out, profile);
    std::string pd, pa;
    for (unsigned a : profile.pd_signature) pd += std::to_string(a) + " ";
    for (unsigned a : profile.pa_signature) pa += std::to_string(a) + " ";
    std::printf("profile: %s\nPD signature: %s\nPA signature: %s\n", out.c_str(), pd.c_str(),
                pa.c_str());
    return 0;
}

int cmd_verify(const std::string& report_path, const std::string& sidecar_path) {
    AttackReport report = load_report(report_path);
    Sidecar sc = load_sidecar(sidecar_path);
    std::string want = scalar_bit_string(sc.scalar, sc.scalar_bits);
    const std::string& got = report.recovered_bits;

    std::vector<unsigned> bad_bits;  // bit positions, LSB = 0
    if (got.size() != want.size()) {
        std::printf("FAIL: recovered %zu bits, ground truth has %zu\n", got.size(), want.size());
        return 1;
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        unsigned bitpos = unsigned(want.size() - 1 - i);
        if (got[i] == want[i]) continue;
        if (report.assumed_bit0 && bitpos == 0) continue;  // reported as assumed
        bad_bits.push_back(bitpos);
    }
    if (report.assumed_bit0 && want.back() != '1') bad_bits.push_back(0);

    if (bad_bits.empty()) {
        std::printf("OK: recovered scalar matches ground truth (%zu bits%s)\n", want.size(),
                    report.assumed_bit0 ? ", bit 0 assumed" : "");
        return 0;
    }
    std::string idx;
    for (unsigned b : bad_bits) idx += std::to_string(b) + " ";
    std::printf("FAIL: %zu/%zu bits differ at positions: %s\n", bad_bits.size(), want.size(),
                idx.c_str());
    return 1;
}

int cmd_export(const std::string& trace_path, const std::string& sidecar_path,
               const std::string& out, const std::string& annotations) {
    LoadedTrace raw = load_trace(trace_path);
    std::string csv = "sample_index,value\n";
    char buf[64];
    for (std::size_t i = 0; i < raw.samples.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, raw.samples[i]);
        csv += buf;
    }
    detail::write_file(out, csv);
    std::printf("samples: %s (%zu rows)\n", out.c_str(), raw.samples.size());

    if (!annotations.empty()) {
        if (sidecar_path.empty()) throw IoError("--annotations needs --sidecar");
        Sidecar sc = load_sidecar(sidecar_path);
        LeakageTrace t;
        t.samples = std::move(raw.samples);
        t.model = sc.model;
        t.truth = sc.truth();
        std::string acsv = "start_sample,length,op_index,op_label,atom_index\n";
        for (const auto& b : block_boundaries(t)) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%u,%s,%u\n", b.start_sample, b.length,
                          b.op_index, b.label == OpLabel::PD ? "PD" : "PA",
                          unsigned(b.atom_index));
            acsv += buf;
        }
        detail::write_file(annotations, acsv);
        std::printf("annotations: %s\n", annotations.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kP side-channel simulation lab: atomic-pattern scalar multiplication, "
                 "leakage synthesis and single-trace attacks on NIST P-256"};
    app.require_subcommand(1);

    SimulateOptions so;
    std::string config_path;
    auto* sim = app.add_subcommand("simulate", "run kP and synthesize a leakage trace");
    sim->add_option("--config", config_path, "JSON config file (flags override)");
    sim->add_option("--alg", so.algorithm, "algorithm: l2r or r2l");
    sim->add_option("--k", so.scalar_hex, "scalar, hex");
    sim->add_option("--k-bin", so.scalar_bits, "scalar, binary string");
    sim->add_flag("--randomize", so.randomize, "Coron projective coordinate randomization");
    sim->add_option("--seed", so.lambda_seed, "seed for the randomization lambda");
    sim->add_option("--noise-seed", so.model.noise_seed, "seed for the Gaussian noise");
    sim->add_option("--sigma", so.model.sigma, "noise standard deviation");
    sim->add_option("--w-data", so.model.w_data, "weight of operand-value leakage");
    sim->add_option("--w-addr", so.model.w_addr, "weight of register-address leakage");
    sim->add_option("--base-mul", so.model.base_mul, "baseline energy per mul cycle");
    sim->add_option("--base-add", so.model.base_add, "baseline energy per add cycle");
    sim->add_option("--base-neg", so.model.base_neg, "baseline energy per neg cycle");
    sim->add_option("--spc", so.model.samples_per_cycle, "samples per cycle");
    sim->add_option("--prologue-cycles", so.model.addr_prologue_cycles,
                    "address prologue cycles per field operation");
    sim->add_option("--out", so.out, "trace output path");
    sim->add_option("--sidecar", so.sidecar, "ground-truth sidecar path");

    AttackOptions ao;
    auto* atk = app.add_subcommand("attack", "recover the scalar from a trace");
    atk->add_option("--trace", ao.trace_path, "trace file")->required();
    atk->add_option("--mode", ao.mode, "data-bit or address-bit");
    atk->add_option("--alg", ao.algorithm, "algorithm the trace came from (l2r/r2l)");
    atk->add_option("--profile", ao.profile_path, "signature profile (address-bit)");
    atk->add_option("--profiling-trace", ao.profiling_trace,
                    "known-scalar trace to learn signatures from (address-bit)");
    atk->add_option("--threshold", ao.threshold, "correlation threshold");
    atk->add_option("--window-cycles", ao.window_cycles, "template window length in cycles");
    atk->add_option("--mad-threshold", ao.mad_threshold,
                    "anomaly threshold in median absolute deviations (data-bit)");
    atk->add_option("--min-anomaly-rate", ao.min_anomaly_rate,
                    "anomaly rate below which classification is chance (data-bit)");
    atk->add_option("--prologue-cycles", ao.prologue_cycles, "address prologue cycles");
    atk->add_option("--out", ao.out, "report output path");
    atk->add_option("--correlation-csv", ao.correlation_csv,
                    "write the sliding correlation series as CSV");

    std::string prof_trace, prof_sidecar, prof_out = "profile.json";
    double prof_threshold = 0.9;
    unsigned prof_window = 24, prof_prologue = 3;
    auto* prof = app.add_subcommand("profile", "learn PD/PA signatures from a known-scalar trace");
    prof->add_option("--trace", prof_trace, "trace file (sidecar required)")->required();
    prof->add_option("--sidecar", prof_sidecar, "sidecar path (default: <trace>.json)");
    prof->add_option("--threshold", prof_threshold, "correlation threshold");
    prof->add_option("--window-cycles", prof_window, "template window length in cycles");
    prof->add_option("--prologue-cycles", prof_prologue, "address prologue cycles");
    prof->add_option("--out", prof_out, "profile output path");

    std::string ver_report, ver_sidecar;
    auto* ver = app.add_subcommand("verify", "compare a report against the ground truth");
    ver->add_option("--report", ver_report, "attack report")->required();
    ver->add_option("--sidecar", ver_sidecar, "ground-truth sidecar")->required();

    std::string exp_trace, exp_sidecar, exp_out = "samples.csv", exp_ann;
    auto* exp = app.add_subcommand("export", "export a trace (and annotations) as CSV");
    exp->add_option("--trace", exp_trace, "trace file")->required();
    exp->add_option("--sidecar", exp_sidecar, "ground-truth sidecar");
    exp->add_option("--out", exp_out, "samples CSV path");
    exp->add_option("--annotations", exp_ann, "block annotations CSV path");

    // a config file provides defaults; parse it before the flags
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config(argv[i + 1], so);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return 2;
            }
        }
    }

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) return cmd_simulate(so);
        if (atk->parsed()) return cmd_attack(ao);
        if (prof->parsed())
            return cmd_profile(prof_trace, prof_sidecar, prof_threshold, prof_window,
                               prof_prologue, prof_out);
        if (ver->parsed()) return cmd_verify(ver_report, ver_sidecar);
        if (exp->parsed()) return cmd_export(exp_trace, exp_sidecar, exp_out, exp_ann);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
