// Copyright 2026 The spacetime-markov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef _STM_EXPERIMENT_H
#define _STM_EXPERIMENT_H

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stm/codes.h"
#include "stm/decoder.h"
#include "stm/entropy.h"
#include "stm/foliation.h"
#include "stm/markov.h"
#include "stm/rng.h"
#include "stm/sampler.h"
#include "stm/spacetime.h"
#include "stm/tableau.h"

namespace stm {

/// Bad configuration. Maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FieldKind { uint, real, text, reals, sizes };

struct ConfigField {
    const char *path;
    FieldKind kind;
    const char *help;
};

// Every configurable key. Paths are dotted; JSON files nest on the dots.
inline const std::vector<ConfigField> &config_fields() {
    static const std::vector<ConfigField> fields{
        {"code.family", FieldKind::text, "code family: repetition or toric"},
        {"code.L", FieldKind::uint, "linear code size"},
        {"rounds", FieldKind::uint, "noisy syndrome rounds T"},
        {"noise.p_x", FieldKind::real, "data X-flip probability"},
        {"noise.p_z", FieldKind::real, "data Z-flip probability"},
        {"noise.q", FieldKind::real, "readout flip probability (default: p_x)"},
        {"tripartition.shape", FieldKind::text, "square or strip"},
        {"tripartition.rows", FieldKind::uint, "strip height in rounds (0: max(2, L/8))"},
        {"tripartition.wA", FieldKind::uint, "width of A"},
        {"tripartition.wB_min", FieldKind::uint, "smallest buffer width"},
        {"tripartition.wB_max", FieldKind::uint, "largest buffer width"},
        {"tripartition.wC", FieldKind::uint, "width of the outer frame C"},
        {"tripartition.width_cap", FieldKind::uint, "largest |ABC| accepted by the geometry"},
        {"estimator.method", FieldKind::text, "likelihood, sampled or exact"},
        {"estimator.correction", FieldKind::text, "none or miller_madow (sampled only)"},
        {"estimator.groups", FieldKind::uint, "jackknife groups"},
        {"estimator.pattern_cap", FieldKind::uint, "histogram width cap (sampled only)"},
        {"samples", FieldKind::uint, "samples per ladder"},
        {"seed", FieldKind::uint, "root seed"},
        {"jobs", FieldKind::uint, "worker threads"},
        {"sweep.sizes", FieldKind::sizes, "(L,T) pairs, e.g. 16x16,24x24"},
        {"sweep.ps", FieldKind::reals, "p grid; each cell sets p_x = q = p"},
        {"sweep.decoder_shots", FieldKind::uint, "decoder shots per cell (0: no decoding)"},
        {"verify.random_configs", FieldKind::uint, "random multi-error configurations"},
        {"verify.samples", FieldKind::uint, "samples for sampler-vs-oracle checks"},
        {"verify.inject_fault", FieldKind::text, "none or mapping (test hook)"},
        {"output.json", FieldKind::text, "JSON result path"},
        {"output.csv", FieldKind::text, "CSV table path"},
        {"output.points_csv", FieldKind::text, "per-rung CSV path (sweep)"},
        {"output.decoder_csv", FieldKind::text, "decoder CSV path"},
        {"output.checkpoint", FieldKind::text, "sweep checkpoint path (default: <json>.cells.jsonl)"},
        {"output.export", FieldKind::text, "export the sampled batch as detector records"},
        {"output.export_encoding", FieldKind::text, "hex or binary"},
    };
    return fields;
}

inline const ConfigField *find_config_field(const std::string &path) {
    for (const auto &f : config_fields()) {
        if (path == f.path) {
            return &f;
        }
    }
    return nullptr;
}

inline nlohmann::json default_config_json() {
    nlohmann::json j;
    j["code"] = {{"family", "repetition"}, {"L", 16}};
    j["rounds"] = 16;
    j["noise"] = {{"p_x", 0.05}, {"p_z", 0.0}, {"q", nullptr}};
    j["tripartition"] = {{"shape", "strip"}, {"rows", 0},       {"wA", 1},        {"wB_min", 1},
                         {"wB_max", 5},      {"wC", 1},         {"width_cap", 64}};
    j["estimator"] = {{"method", "likelihood"}, {"correction", "miller_madow"}, {"groups", 32}, {"pattern_cap", 24}};
    j["samples"] = 1000000;
    j["seed"] = 0;
    j["jobs"] = 1;
    j["sweep"] = {{"sizes", {{16, 16}, {24, 24}, {32, 32}}},
                  {"ps", {0.05, 0.07, 0.09, 0.11, 0.13, 0.15, 0.17}},
                  {"decoder_shots", 0}};
    j["verify"] = {{"random_configs", 1000}, {"samples", 100000}, {"inject_fault", "none"}};
    j["output"] = {{"json", ""},       {"csv", ""},    {"points_csv", ""},           {"decoder_csv", ""},
                   {"checkpoint", ""}, {"export", ""}, {"export_encoding", "hex"}};
    return j;
}

inline nlohmann::json::json_pointer pointer_of(const std::string &path) {
    std::string p = "/" + path;
    std::replace(p.begin(), p.end(), '.', '/');
    return nlohmann::json::json_pointer(p);
}

namespace internal {

inline std::string trim(const std::string &s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string &s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

inline double parse_real(const std::string &path, const std::string &text) {
    char *end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') {
        throw ConfigError(path + ": expected a number, got '" + text + "'");
    }
    return v;
}

inline uint64_t parse_uint(const std::string &path, const std::string &text) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        // Accept 1e6-style literals when they are whole numbers.
        double v = parse_real(path, text);
        if (v < 0 || v != std::floor(v) || v > 1.8e19) {
            throw ConfigError(path + ": expected a non-negative integer, got '" + text + "'");
        }
        return static_cast<uint64_t>(v);
    }
    return std::stoull(text);
}

}  // namespace internal

/// Converts a textual value (flag or key=value line) to JSON for `path`.
inline nlohmann::json config_value_from_text(const std::string &path, const std::string &text) {
    const auto *f = find_config_field(path);
    if (!f) {
        throw ConfigError(path + ": unknown configuration key");
    }
    auto t = internal::trim(text);
    switch (f->kind) {
        case FieldKind::uint:
            return internal::parse_uint(path, t);
        case FieldKind::real:
            return internal::parse_real(path, t);
        case FieldKind::text:
            return t;
        case FieldKind::reals: {
            auto arr = nlohmann::json::array();
            for (const auto &item : internal::split(t, ',')) {
                arr.push_back(internal::parse_real(path, item));
            }
            return arr;
        }
        case FieldKind::sizes: {
            auto arr = nlohmann::json::array();
            for (const auto &item : internal::split(t, ',')) {
                auto parts = internal::split(item, 'x');
                if (parts.size() != 2) {
                    throw ConfigError(path + ": expected LxT pairs such as 16x16, got '" + item + "'");
                }
                arr.push_back({internal::parse_uint(path, parts[0]), internal::parse_uint(path, parts[1])});
            }
            return arr;
        }
    }
    return nullptr;
}

/// Parses a key=value file; '#' starts a comment.
inline std::vector<std::pair<std::string, nlohmann::json>> parse_key_value_config(std::istream &in) {
    std::vector<std::pair<std::string, nlohmann::json>> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = internal::trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        auto key = internal::trim(line.substr(0, eq));
        out.emplace_back(key, config_value_from_text(key, line.substr(eq + 1)));
    }
    return out;
}

/// Flattens a nested JSON config into (path, value) pairs, rejecting unknown keys.
inline void flatten_config_json(const nlohmann::json &j, const std::string &prefix,
                                std::vector<std::pair<std::string, nlohmann::json>> &out) {
    if (!j.is_object()) {
        throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
    }
    for (const auto &[key, value] : j.items()) {
        auto path = prefix.empty() ? key : prefix + "." + key;
        if (find_config_field(path)) {
            out.emplace_back(path, value);
        } else if (value.is_object()) {
            flatten_config_json(value, path, out);
        } else {
            throw ConfigError(path + ": unknown configuration key");
        }
    }
}

/// Reads a config file: JSON if it starts with '{', key=value otherwise.
inline std::vector<std::pair<std::string, nlohmann::json>> read_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config file '" + path + "' cannot be opened");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    auto text = buf.str();
    auto first = text.find_first_not_of(" \t\r\n");
    std::vector<std::pair<std::string, nlohmann::json>> out;
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError("config file '" + path + "': invalid JSON: " + e.what());
        }
        flatten_config_json(j, "", out);
    } else {
        std::istringstream s(text);
        out = parse_key_value_config(s);
    }
    return out;
}

struct ExperimentConfig {
    std::string family;
    size_t L = 0;
    size_t rounds = 0;
    NoiseModel noise;
    RegionShape shape = RegionShape::strip;
    int rows = 0;
    int wA = 1, wB_min = 1, wB_max = 5, wC = 1;
    size_t width_cap = 64;
    CmiMethod method = CmiMethod::likelihood;
    Correction correction = Correction::miller_madow;
    size_t groups = 32;
    size_t pattern_cap = kDefaultPatternCap;
    size_t samples = 0;
    uint64_t seed = 0;
    size_t jobs = 1;
    std::vector<std::pair<size_t, size_t>> sizes;
    std::vector<double> ps;
    size_t decoder_shots = 0;
    size_t verify_random = 0;
    size_t verify_samples = 0;
    std::string inject_fault;
    std::string out_json, out_csv, out_points_csv, out_decoder_csv, out_checkpoint, out_export, export_encoding;

    /// Fully resolved configuration, embedded in every output.
    nlohmann::json doc;
    /// Keys set by a file or a flag rather than left at their defaults.
    std::set<std::string> explicit_keys;

    /// Hash of everything that determines the numbers (outputs and jobs excluded).
    std::string hash() const {
        auto j = doc;
        j.erase("output");
        j.erase("jobs");
        return hex64(fnv1a(j.dump()));
    }
    bool is_explicit(const std::string &path) const {
        return explicit_keys.count(path) > 0;
    }
};

/// Builds a config from defaults, then file entries, then flag overrides.
/// Every problem is reported with its field path; all problems are collected.
inline ExperimentConfig resolve_config(const std::vector<std::pair<std::string, nlohmann::json>> &file_entries,
                                       const std::vector<std::pair<std::string, nlohmann::json>> &overrides) {
    ExperimentConfig cfg;
    cfg.doc = default_config_json();
    for (const auto *entries : {&file_entries, &overrides}) {
        for (const auto &[path, value] : *entries) {
            if (!find_config_field(path)) {
                throw ConfigError(path + ": unknown configuration key");
            }
            cfg.doc[pointer_of(path)] = value;
            cfg.explicit_keys.insert(path);
        }
    }

    std::vector<std::string> errors;
    auto &d = cfg.doc;
    auto get = [&](const std::string &path) -> const nlohmann::json & { return d.at(pointer_of(path)); };
    auto as_uint = [&](const std::string &path) -> uint64_t {
        const auto &v = get(path);
        if (v.is_number_unsigned()) {
            return v.get<uint64_t>();
        }
        if (v.is_number_integer() && v.get<int64_t>() >= 0) {
            return static_cast<uint64_t>(v.get<int64_t>());
        }
        if (v.is_number_float() && v.get<double>() >= 0 && v.get<double>() == std::floor(v.get<double>())) {
            return static_cast<uint64_t>(v.get<double>());
        }
        errors.push_back(path + ": expected a non-negative integer, got " + v.dump());
        return 0;
    };
    auto as_real = [&](const std::string &path) -> double {
        const auto &v = get(path);
        if (!v.is_number()) {
            errors.push_back(path + ": expected a number, got " + v.dump());
            return 0;
        }
        return v.get<double>();
    };
    auto as_text = [&](const std::string &path) -> std::string {
        const auto &v = get(path);
        if (!v.is_string()) {
            errors.push_back(path + ": expected a string, got " + v.dump());
            return "";
        }
        return v.get<std::string>();
    };
    auto probability = [&](const std::string &path, double v) {
        if (!(v >= 0 && v <= 0.5)) {
            errors.push_back(path + ": probability out of [0, 0.5] (got " + format_double(v) + ")");
        }
    };
    auto at_least = [&](const std::string &path, uint64_t v, uint64_t lo) {
        if (v < lo) {
            errors.push_back(path + ": must be at least " + std::to_string(lo) + " (got " + std::to_string(v) + ")");
        }
    };

    cfg.family = as_text("code.family");
    if (cfg.family != "repetition" && cfg.family != "toric") {
        errors.push_back("code.family: unknown code family '" + cfg.family + "' (supported: repetition, toric)");
    }
    cfg.L = as_uint("code.L");
    at_least("code.L", cfg.L, 2);
    cfg.rounds = as_uint("rounds");
    at_least("rounds", cfg.rounds, 1);

    cfg.noise.p_x = as_real("noise.p_x");
    cfg.noise.p_z = as_real("noise.p_z");
    if (get("noise.q").is_null()) {
        d[pointer_of("noise.q")] = cfg.noise.p_x;
    }
    cfg.noise.q = as_real("noise.q");
    probability("noise.p_x", cfg.noise.p_x);
    probability("noise.p_z", cfg.noise.p_z);
    probability("noise.q", cfg.noise.q);

    try {
        cfg.shape = parse_region_shape(as_text("tripartition.shape"));
    } catch (const std::invalid_argument &e) {
        errors.push_back(std::string("tripartition.shape: ") + e.what());
    }
    cfg.rows = static_cast<int>(as_uint("tripartition.rows"));
    cfg.wA = static_cast<int>(as_uint("tripartition.wA"));
    at_least("tripartition.wA", cfg.wA, 1);
    cfg.wB_min = static_cast<int>(as_uint("tripartition.wB_min"));
    cfg.wB_max = static_cast<int>(as_uint("tripartition.wB_max"));
    if (cfg.wB_max < cfg.wB_min) {
        errors.push_back("tripartition.wB_max: must be at least tripartition.wB_min");
    }
    cfg.wC = static_cast<int>(as_uint("tripartition.wC"));
    at_least("tripartition.wC", cfg.wC, 1);
    cfg.width_cap = as_uint("tripartition.width_cap");
    at_least("tripartition.width_cap", cfg.width_cap, 1);

    try {
        cfg.method = parse_cmi_method(as_text("estimator.method"));
    } catch (const std::invalid_argument &e) {
        errors.push_back(std::string("estimator.method: ") + e.what());
    }
    auto corr = as_text("estimator.correction");
    if (corr == "none") {
        cfg.correction = Correction::none;
    } else if (corr == "miller_madow") {
        cfg.correction = Correction::miller_madow;
    } else {
        errors.push_back("estimator.correction: unknown correction '" + corr + "' (supported: none, miller_madow)");
    }
    cfg.groups = as_uint("estimator.groups");
    if (cfg.groups < 2 || cfg.groups > 64) {
        errors.push_back("estimator.groups: must lie in [2, 64] (got " + std::to_string(cfg.groups) + ")");
    }
    cfg.pattern_cap = as_uint("estimator.pattern_cap");
    if (cfg.pattern_cap < 1 || cfg.pattern_cap > 58) {
        errors.push_back("estimator.pattern_cap: must lie in [1, 58]");
    }
    cfg.samples = as_uint("samples");
    at_least("samples", cfg.samples, 1);
    cfg.seed = as_uint("seed");
    cfg.jobs = as_uint("jobs");
    at_least("jobs", cfg.jobs, 1);

    const auto &sizes = get("sweep.sizes");
    if (!sizes.is_array()) {
        errors.push_back("sweep.sizes: expected a list of [L, T] pairs");
    } else {
        for (size_t k = 0; k < sizes.size(); k++) {
            const auto &s = sizes[k];
            auto path = "sweep.sizes[" + std::to_string(k) + "]";
            auto whole = [](const nlohmann::json &v) { return v.is_number_integer() && v.get<int64_t>() >= 0; };
            if (!s.is_array() || s.size() != 2 || !whole(s[0]) || !whole(s[1])) {
                errors.push_back(path + ": expected [L, T]");
                continue;
            }
            cfg.sizes.emplace_back(s[0].get<size_t>(), s[1].get<size_t>());
            at_least(path + ".L", cfg.sizes.back().first, 2);
            at_least(path + ".T", cfg.sizes.back().second, 1);
        }
    }
    const auto &ps = get("sweep.ps");
    if (!ps.is_array()) {
        errors.push_back("sweep.ps: expected a list of probabilities");
    } else {
        for (size_t k = 0; k < ps.size(); k++) {
            auto path = "sweep.ps[" + std::to_string(k) + "]";
            if (!ps[k].is_number()) {
                errors.push_back(path + ": expected a number");
                continue;
            }
            cfg.ps.push_back(ps[k].get<double>());
            probability(path, cfg.ps.back());
        }
    }
    cfg.decoder_shots = as_uint("sweep.decoder_shots");

    cfg.verify_random = as_uint("verify.random_configs");
    cfg.verify_samples = as_uint("verify.samples");
    at_least("verify.samples", cfg.verify_samples, 1);
    cfg.inject_fault = as_text("verify.inject_fault");
    if (cfg.inject_fault != "none" && cfg.inject_fault != "mapping") {
        errors.push_back("verify.inject_fault: unknown fault '" + cfg.inject_fault + "' (supported: none, mapping)");
    }

    cfg.out_json = as_text("output.json");
    cfg.out_csv = as_text("output.csv");
    cfg.out_points_csv = as_text("output.points_csv");
    cfg.out_decoder_csv = as_text("output.decoder_csv");
    cfg.out_checkpoint = as_text("output.checkpoint");
    cfg.out_export = as_text("output.export");
    cfg.export_encoding = as_text("output.export_encoding");
    if (cfg.export_encoding != "hex" && cfg.export_encoding != "binary") {
        errors.push_back("output.export_encoding: unknown encoding '" + cfg.export_encoding +
                         "' (supported: hex, binary)");
    }

    if (!errors.empty()) {
        std::string msg;
        for (const auto &e : errors) {
            msg += (msg.empty() ? "" : "\n") + e;
        }
        throw ConfigError(msg);
    }
    return cfg;
}

inline ExperimentConfig default_config() {
    return resolve_config({}, {});
}

// ---------------------------------------------------------------------------
// Shared pieces.

/// Strip height used when tripartition.rows is 0.
inline int auto_rows(size_t L) {
    return std::max(2, static_cast<int>(L / 8));
}

inline LadderSpec ladder_spec(const ExperimentConfig &cfg, size_t L) {
    LadderSpec ls;
    ls.base.shape = cfg.shape;
    ls.base.wA = cfg.wA;
    ls.base.wC = cfg.wC;
    ls.base.rows = cfg.rows > 0 ? cfg.rows : auto_rows(L);
    ls.base.width_cap = cfg.width_cap;
    ls.wB_min = cfg.wB_min;
    ls.wB_max = cfg.wB_max;
    return ls;
}

inline CmiOptions cmi_options(const ExperimentConfig &cfg) {
    CmiOptions opt;
    opt.method = cfg.method;
    opt.samples = cfg.samples;
    opt.seed = cfg.seed;
    opt.jobs = cfg.jobs;
    opt.correction = cfg.correction;
    opt.groups = cfg.groups;
    opt.pattern_cap = cfg.pattern_cap;
    return opt;
}

inline std::string code_hash(const CssCode &code) {
    return hex64(fnv1a(code_to_json(code).dump()));
}

inline nlohmann::json provenance(const ExperimentConfig &cfg, const std::string &command, const std::string &chash) {
    return {{"tool", "stm"},       {"version", std::string(kToolVersion)}, {"command", command},
            {"config_hash", cfg.hash()}, {"code_hash", chash},              {"seed", cfg.seed}};
}

inline std::string csv_preamble(const nlohmann::json &prov) {
    return "# stm " + prov["version"].get<std::string>() + " command=" + prov["command"].get<std::string>() +
           " config_hash=" + prov["config_hash"].get<std::string>() +
           " code_hash=" + prov["code_hash"].get<std::string>() + " seed=" + std::to_string(prov["seed"].get<uint64_t>()) +
           "\n";
}

inline nlohmann::json point_json(const CmiPoint &p) {
    return {{"wB", p.wB},    {"dist", p.dist_AC}, {"cmi_bits", p.cmi},
            {"cmi_stderr", p.std_error}, {"negative", p.negative}, {"region", p.region}};
}

inline nlohmann::json fit_json(const MarkovFit &f) {
    nlohmann::json j{{"ok", f.ok}, {"used", f.used}};
    if (f.ok) {
        j["xi"] = f.xi;
        j["xi_stderr"] = f.xi_stderr;
        j["slope_ln"] = f.slope_ln;
        j["slope_log2"] = f.slope_log2;
        j["intercept_ln"] = f.intercept_ln;
        j["r2"] = f.r2;
        j["window"] = {f.window_lo, f.window_hi};
    } else {
        j["failure"] = f.failure;
    }
    return j;
}

inline nlohmann::json rate_json(const RateEstimate &r) {
    return {{"shots", r.shots}, {"logical_errors", r.errors}, {"rate", r.rate}, {"ci_low", r.ci_low},
            {"ci_high", r.ci_high}};
}

inline void write_text_file(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out << text;
}

inline std::string markov_csv_header() {
    return "code,L,T,p,q,wA,wB,dist,cmi_bits,cmi_stderr\n";
}

inline std::string markov_csv_rows(const std::string &family, size_t L, size_t T, const NoiseModel &noise, int wA,
                                   const std::vector<CmiPoint> &points) {
    std::string out;
    for (const auto &p : points) {
        out += family + "," + std::to_string(L) + "," + std::to_string(T) + "," + format_double(noise.p_x) + "," +
               format_double(noise.q) + "," + std::to_string(wA) + "," + std::to_string(p.wB) + "," +
               std::to_string(p.dist_AC) + "," + format_double(p.cmi) + "," + format_double(p.std_error) + "\n";
    }
    return out;
}

inline std::string decoder_csv_header() {
    return "L,T,p,q,shots,logical_errors,rate,ci_low,ci_high\n";
}

inline std::string decoder_csv_row(size_t L, size_t T, const NoiseModel &noise, const RateEstimate &r) {
    return std::to_string(L) + "," + std::to_string(T) + "," + format_double(noise.p_x) + "," +
           format_double(noise.q) + "," + std::to_string(r.shots) + "," + std::to_string(r.errors) + "," +
           format_double(r.rate) + "," + format_double(r.ci_low) + "," + format_double(r.ci_high) + "\n";
}

// ---------------------------------------------------------------------------
// run / ingest

struct LadderAnalysis {
    std::vector<Tripartition> rungs;
    std::vector<CmiPoint> points;
    MarkovFit fit;
    size_t n_samples = 0;
};

inline nlohmann::json ladder_json(const ExperimentConfig &cfg, const DetectorModel &model, const LadderAnalysis &a,
                                  const std::string &command) {
    auto chash = code_hash(model.code);
    auto j = provenance(cfg, command, chash);
    j["model_hash"] = hex64(model.hash());
    j["config"] = cfg.doc;
    auto ls = ladder_spec(cfg, model.code.size);
    j["ladder"] = {{"shape", region_shape_name(ls.base.shape)},
                   {"rows", ls.base.rows},
                   {"wA", ls.base.wA},
                   {"wC", ls.base.wC},
                   {"wB_min", ls.wB_min},
                   {"wB_max", ls.wB_max},
                   {"region_width", ladder_region(a.rungs).size()}};
    j["estimator"] = {{"method", cmi_method_name(cfg.method)}, {"samples", a.n_samples}};
    auto pts = nlohmann::json::array();
    for (const auto &p : a.points) {
        pts.push_back(point_json(p));
    }
    j["points"] = pts;
    j["fit"] = fit_json(a.fit);
    return j;
}

inline void emit_ladder(const ExperimentConfig &cfg, const DetectorModel &model, const LadderAnalysis &a,
                        const nlohmann::json &result) {
    if (!cfg.out_json.empty()) {
        write_text_file(cfg.out_json, result.dump(2) + "\n");
    }
    if (!cfg.out_csv.empty()) {
        write_text_file(cfg.out_csv, csv_preamble(result) + markov_csv_header() +
                                         markov_csv_rows(cfg.family, cfg.L, cfg.rounds, model.noise, cfg.wA,
                                                         a.points));
    }
}

inline std::string ladder_summary(const LadderAnalysis &a) {
    std::ostringstream out;
    for (const auto &p : a.points) {
        out << "  dist=" << p.dist_AC << " cmi=" << format_double(p.cmi) << " +- " << format_double(p.std_error)
            << (p.negative ? " (negative)" : "") << "\n";
    }
    if (a.fit.ok) {
        out << "  xi=" << format_double(a.fit.xi) << " +- " << format_double(a.fit.xi_stderr)
            << " r2=" << format_double(a.fit.r2) << " used=" << a.fit.used << "\n";
    } else {
        out << "  fit failed: " << a.fit.failure << "\n";
    }
    return out.str();
}

/// One (L, p) ladder: sample once over the union region, estimate every rung, fit.
inline nlohmann::json cmd_run(const ExperimentConfig &cfg, std::ostream &log = std::cerr) {
    auto code = make_code(cfg.family, cfg.L);
    auto model = build_detector_model(code, cfg.rounds, cfg.noise);
    LadderAnalysis a;
    a.rungs = build_ladder(model, ladder_spec(cfg, cfg.L));
    auto opt = cmi_options(cfg);
    if (cfg.method == CmiMethod::exact) {
        if (!cfg.out_export.empty()) {
            throw ConfigError("output.export: the exact method draws no samples to export");
        }
        a.points = cmi_ladder(model, a.rungs, opt);
    } else {
        auto batch = sample_batch(model, ladder_region(a.rungs), cfg.samples, cfg.seed, "sampling", cfg.jobs);
        a.n_samples = batch.n_samples;
        a.points = cmi_ladder_from_batch(model, batch, a.rungs, opt);
        if (!cfg.out_export.empty()) {
            std::ofstream out(cfg.out_export, std::ios::binary);
            if (!out) {
                throw std::runtime_error("cannot write '" + cfg.out_export + "'");
            }
            write_detector_records(out, model, batch, cfg.export_encoding);
        }
    }
    a.fit = markov_length(a.points);
    auto result = ladder_json(cfg, model, a, "run");
    emit_ladder(cfg, model, a, result);
    log << ladder_summary(a);
    return result;
}

/// Analyses detector records produced elsewhere with the same ladder as run.
/// Record coordinates are matched to the configured code's detectors; the
/// likelihood method additionally uses the configured noise model.
inline nlohmann::json cmd_ingest(const ExperimentConfig &cfg, const std::string &path, std::ostream &log = std::cerr) {
    if (cfg.method == CmiMethod::exact) {
        throw ConfigError("estimator.method: ingest needs a sampling method (sampled or likelihood)");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open detector records '" + path + "'");
    }
    auto rec = read_detector_records(in);
    auto code = make_code(cfg.family, cfg.L);
    auto model = build_detector_model(code, cfg.rounds, cfg.noise);
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> index;
    for (uint32_t d = 0; d < model.num_detectors(); d++) {
        index[{model.detectors[d].check, model.detectors[d].round}] = d;
    }
    for (size_t k = 0; k < rec.coordinates.size(); k++) {
        auto it = index.find(rec.coordinates[k]);
        if (it == index.end()) {
            throw std::runtime_error("detector records: detector " + std::to_string(k) + " (check " +
                                     std::to_string(rec.coordinates[k].first) + ", round " +
                                     std::to_string(rec.coordinates[k].second) + ") is not a detector of " +
                                     cfg.family + " L=" + std::to_string(cfg.L) + " T=" + std::to_string(cfg.rounds));
        }
        rec.batch.region[k] = it->second;
    }
    LadderAnalysis a;
    a.rungs = build_ladder(model, ladder_spec(cfg, cfg.L));
    for (auto d : ladder_region(a.rungs)) {
        if (rec.batch.position_of(d) == rec.batch.width()) {
            throw std::runtime_error("detector records: ladder needs detector (check " +
                                     std::to_string(model.detectors[d].check) + ", round " +
                                     std::to_string(model.detectors[d].round) + "), absent from the file");
        }
    }
    a.n_samples = rec.batch.n_samples;
    a.points = cmi_ladder_from_batch(model, rec.batch, a.rungs, cmi_options(cfg));
    a.fit = markov_length(a.points);
    auto result = ladder_json(cfg, model, a, "ingest");
    result["source"] = {{"path", path}, {"rows", rec.batch.n_samples}, {"detectors", rec.coordinates.size()}};
    emit_ladder(cfg, model, a, result);
    log << ladder_summary(a);
    return result;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
    size_t L = 0, T = 0;
    double p = 0;
};

inline std::string cell_key(const SweepCell &c) {
    return std::to_string(c.L) + "x" + std::to_string(c.T) + "@" + format_double(c.p);
}

/// Per-cell seed derived from the root seed, so cells are independent of order.
inline uint64_t cell_seed(uint64_t root, const SweepCell &c) {
    return fnv1a("cell/" + cell_key(c), fnv1a(std::to_string(root)));
}

inline nlohmann::json run_cell(const ExperimentConfig &cfg, const SweepCell &c) {
    nlohmann::json j{{"key", cell_key(c)}, {"L", c.L}, {"T", c.T}, {"p", c.p}, {"q", c.p}};
    try {
        auto code = make_code(cfg.family, c.L);
        auto model = build_detector_model(code, c.T, NoiseModel{c.p, cfg.noise.p_z, c.p});
        j["code_hash"] = code_hash(code);
        j["model_hash"] = hex64(model.hash());
        auto seed = cell_seed(cfg.seed, c);
        auto opt = cmi_options(cfg);
        opt.seed = seed;
        auto rungs = build_ladder(model, ladder_spec(cfg, c.L));
        auto points = cmi_ladder(model, rungs, opt);
        auto fit = markov_length(points);
        auto pts = nlohmann::json::array();
        for (const auto &p : points) {
            pts.push_back(point_json(p));
        }
        j["points"] = pts;
        j["fit"] = fit_json(fit);
        j["status"] = fit.ok ? "ok" : "fit_failed";
        if (!fit.ok) {
            j["message"] = fit.failure;
        }
        if (cfg.decoder_shots > 0) {
            j["decoder"] = rate_json(logical_error_rate(model, cfg.decoder_shots, seed, cfg.jobs));
        }
    } catch (const std::exception &e) {
        j["status"] = "error";
        j["message"] = e.what();
    }
    return j;
}

struct SweepOutcome {
    nlohmann::json result;
    size_t computed = 0;
    size_t reused = 0;
};

/// Grid over sizes x p. Completed cells are appended to a JSONL checkpoint;
/// with `resume` the checkpoint's cells are reused and only missing ones run.
inline SweepOutcome cmd_sweep(const ExperimentConfig &cfg, bool resume, std::ostream &log = std::cerr) {
    if (cfg.sizes.empty() || cfg.ps.empty()) {
        throw ConfigError("sweep.sizes / sweep.ps: sweep needs at least one size and one p");
    }
    std::vector<SweepCell> cells;
    for (const auto &[L, T] : cfg.sizes) {
        for (double p : cfg.ps) {
            cells.push_back({L, T, p});
        }
    }
    std::string checkpoint = cfg.out_checkpoint;
    if (checkpoint.empty() && !cfg.out_json.empty()) {
        checkpoint = cfg.out_json + ".cells.jsonl";
    }
    if (resume && checkpoint.empty()) {
        throw ConfigError("output.checkpoint: --resume needs a checkpoint (set output.checkpoint or output.json)");
    }

    std::map<std::string, nlohmann::json> done;
    if (resume) {
        std::ifstream in(checkpoint);
        std::string line;
        size_t lineno = 0;
        while (in && std::getline(in, line)) {
            lineno++;
            if (line.empty()) {
                continue;
            }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception &) {
                // A line cut short by an interruption; that cell is recomputed.
                log << "checkpoint line " << lineno << " is incomplete; recomputing that cell\n";
                continue;
            }
            if (j.contains("config_hash")) {
                if (j["config_hash"] != cfg.hash()) {
                    throw ConfigError("output.checkpoint: '" + checkpoint +
                                      "' belongs to a different configuration (config_hash " +
                                      j["config_hash"].get<std::string>() + ", this run " + cfg.hash() + ")");
                }
                continue;
            }
            done[j.at("key").get<std::string>()] = j;
        }
    }

    std::ofstream ck;
    if (!checkpoint.empty()) {
        // Rewrite the checkpoint from the reusable cells, then append as we go.
        ck.open(checkpoint, std::ios::trunc);
        if (!ck) {
            throw std::runtime_error("cannot write checkpoint '" + checkpoint + "'");
        }
        ck << nlohmann::json{{"config_hash", cfg.hash()}}.dump() << "\n";
        for (const auto &c : cells) {
            auto it = done.find(cell_key(c));
            if (it != done.end()) {
                ck << it->second.dump() << "\n";
            }
        }
        ck.flush();
    }

    SweepOutcome outcome;
    std::vector<nlohmann::json> results;
    for (const auto &c : cells) {
        auto it = done.find(cell_key(c));
        if (it != done.end()) {
            results.push_back(it->second);
            outcome.reused++;
            continue;
        }
        auto t0 = std::chrono::steady_clock::now();
        auto j = run_cell(cfg, c);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << "cell L=" << c.L << " T=" << c.T << " p=" << format_double(c.p) << ": " << j["status"].get<std::string>();
        if (j.contains("fit") && j["fit"]["ok"].get<bool>()) {
            log << " xi=" << format_double(j["fit"]["xi"].get<double>());
        }
        if (j.contains("decoder")) {
            log << " rate=" << format_double(j["decoder"]["rate"].get<double>());
        }
        if (j.contains("message")) {
            log << " (" << j["message"].get<std::string>() << ")";
        }
        log << " [" << std::fixed << std::setprecision(1) << secs << "s]\n" << std::defaultfloat;
        if (ck.is_open()) {
            ck << j.dump() << "\n";
            ck.flush();
        }
        results.push_back(j);
        outcome.computed++;
    }

    // Summary: peak of xi over p per size, and decoder crossing if decoded.
    std::string chash;
    for (const auto &r : results) {
        chash += r.value("code_hash", std::string());
    }
    auto &out = outcome.result;
    out = provenance(cfg, "sweep", hex64(fnv1a(chash)));
    out["config"] = cfg.doc;
    out["cells"] = results;
    auto peaks = nlohmann::json::array();
    std::vector<RateCurve> curves;
    size_t k = 0;
    for (const auto &[L, T] : cfg.sizes) {
        std::vector<double> xs, ys, es;
        RateCurve curve;
        curve.L = L;
        bool decoded = true;
        for (size_t i = 0; i < cfg.ps.size(); i++, k++) {
            const auto &r = results[k];
            xs.push_back(cfg.ps[i]);
            bool ok = r.contains("fit") && r["fit"]["ok"].get<bool>();
            ys.push_back(ok ? r["fit"]["xi"].get<double>() : std::numeric_limits<double>::quiet_NaN());
            es.push_back(ok ? r["fit"]["xi_stderr"].get<double>() : 0.0);
            if (r.contains("decoder")) {
                curve.ps.push_back(cfg.ps[i]);
                curve.rates.push_back(r["decoder"]["rate"].get<double>());
            } else {
                decoded = false;
            }
        }
        auto pk = find_peak(xs, ys, es);
        nlohmann::json pj{{"L", L}, {"T", T}, {"interior", pk.interior}};
        if (std::isfinite(pk.location)) {
            pj["location"] = pk.location;
            pj["height"] = pk.height;
            pj["height_stderr"] = pk.height_stderr;
            pj["grid_p"] = xs[pk.grid_index];
        }
        if (!pk.note.empty()) {
            pj["note"] = pk.note;
        }
        peaks.push_back(pj);
        if (decoded) {
            curves.push_back(curve);
        }
    }
    out["peaks"] = peaks;
    if (cfg.decoder_shots > 0) {
        auto th = threshold_estimate(curves);
        nlohmann::json tj{{"ok", th.ok}};
        if (th.ok) {
            tj["estimate"] = th.estimate;
            tj["spread"] = th.spread;
            tj["crossings"] = th.crossings;
        } else {
            tj["failure"] = th.failure;
        }
        out["decoder_crossing"] = tj;
    }

    if (!cfg.out_json.empty()) {
        write_text_file(cfg.out_json, out.dump(2) + "\n");
    }
    auto pre = csv_preamble(out);
    if (!cfg.out_csv.empty()) {
        std::string csv = pre + "code,L,T,p,q,status,xi,xi_stderr,r2,used\n";
        for (const auto &r : results) {
            bool ok = r.contains("fit") && r["fit"]["ok"].get<bool>();
            csv += cfg.family + "," + std::to_string(r["L"].get<size_t>()) + "," + std::to_string(r["T"].get<size_t>()) +
                   "," + format_double(r["p"].get<double>()) + "," + format_double(r["q"].get<double>()) + "," +
                   r["status"].get<std::string>() + "," +
                   (ok ? format_double(r["fit"]["xi"].get<double>()) + "," +
                             format_double(r["fit"]["xi_stderr"].get<double>()) + "," +
                             format_double(r["fit"]["r2"].get<double>())
                       : std::string(",,")) +
                   "," + (r.contains("fit") ? std::to_string(r["fit"]["used"].get<size_t>()) : std::string()) + "\n";
        }
        write_text_file(cfg.out_csv, csv);
    }
    if (!cfg.out_points_csv.empty()) {
        std::string csv = pre + markov_csv_header();
        for (const auto &r : results) {
            if (!r.contains("points")) {
                continue;
            }
            for (const auto &p : r["points"]) {
                csv += cfg.family + "," + std::to_string(r["L"].get<size_t>()) + "," +
                       std::to_string(r["T"].get<size_t>()) + "," + format_double(r["p"].get<double>()) + "," +
                       format_double(r["q"].get<double>()) + "," + std::to_string(cfg.wA) + "," +
                       std::to_string(p["wB"].get<int>()) + "," + std::to_string(p["dist"].get<int>()) + "," +
                       format_double(p["cmi_bits"].get<double>()) + "," + format_double(p["cmi_stderr"].get<double>()) +
                       "\n";
            }
        }
        write_text_file(cfg.out_points_csv, csv);
    }
    if (!cfg.out_decoder_csv.empty() && cfg.decoder_shots > 0) {
        std::string csv = pre + decoder_csv_header();
        for (const auto &r : results) {
            if (!r.contains("decoder")) {
                continue;
            }
            RateEstimate re;
            re.shots = r["decoder"]["shots"].get<uint64_t>();
            re.errors = r["decoder"]["logical_errors"].get<uint64_t>();
            re.rate = r["decoder"]["rate"].get<double>();
            re.ci_low = r["decoder"]["ci_low"].get<double>();
            re.ci_high = r["decoder"]["ci_high"].get<double>();
            double p = r["p"].get<double>();
            csv += decoder_csv_row(r["L"].get<size_t>(), r["T"].get<size_t>(), NoiseModel{p, 0, p}, re);
        }
        write_text_file(cfg.out_decoder_csv, csv);
    }

    for (const auto &pk : peaks) {
        log << "peak L=" << pk["L"].get<size_t>() << ": ";
        if (pk["interior"].get<bool>()) {
            log << "p=" << format_double(pk["location"].get<double>()) << " xi=" << format_double(pk["height"].get<double>());
        } else {
            log << pk.value("note", std::string("none"));
            if (pk.contains("grid_p")) {
                log << " (largest xi at p=" << format_double(pk["grid_p"].get<double>()) << ")";
            }
        }
        log << "\n";
    }
    if (out.contains("decoder_crossing")) {
        const auto &th = out["decoder_crossing"];
        if (th["ok"].get<bool>()) {
            log << "decoder crossing: p=" << format_double(th["estimate"].get<double>()) << " spread "
                << format_double(th["spread"].get<double>()) << "\n";
        } else {
            log << "decoder crossing: " << th["failure"].get<std::string>() << "\n";
        }
    }
    log << "computed " << outcome.computed << " of " << cells.size() << " cells (" << outcome.reused
        << " from checkpoint)\n";
    return outcome;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
    std::string name;
    std::string status;  // pass, fail, skipped
    std::string detail;
};

/// Largest resource state (qubits) the verification tableau is run on.
inline constexpr size_t kVerifyTableauCap = 1500;
/// Largest readout set handled by the dense brute-force decomposition oracle.
inline constexpr size_t kVerifyOracleCap = 20;

namespace internal {

inline std::vector<uint32_t> cells_flipped_by(const std::vector<PauliString> &cells, const std::vector<uint32_t> &sites) {
    auto z = PauliString::z_on(sites);
    std::vector<uint32_t> out;
    for (size_t k = 0; k < cells.size(); k++) {
        if (!cells[k].commutes_with(z)) {
            out.push_back(static_cast<uint32_t>(k));
        }
    }
    return out;
}

inline std::vector<uint32_t> random_subset(size_t n, size_t k, std::mt19937_64 &rng) {
    std::vector<uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(k, n));
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace internal

/// Tableau pipeline (map to Z errors, measure X, evaluate cells) against the
/// circuit-level detector bits, for every single mechanism and random sets.
inline CheckResult check_foliation_correspondence(const CssCode &code, size_t rounds, size_t random_configs,
                                                  uint64_t seed, MappingVariant variant) {
    CheckResult r{"foliation_correspondence", "pass", ""};
    auto rs = foliate(code, rounds + 1);
    if (rs.num_sites() > kVerifyTableauCap) {
        r.status = "skipped";
        r.detail = "resource state of " + std::to_string(rs.num_sites()) + " qubits exceeds the tableau cap of " +
                   std::to_string(kVerifyTableauCap);
        return r;
    }
    auto cells = detector_cells(rs);
    // Every mechanism kind present; the rate only matters for the random sets.
    auto model = build_detector_model(code, rounds, NoiseModel{0.1, 0.1, 0.1});
    auto clean = init_graph_state(rs);
    size_t mismatches = 0, tested = 0;
    auto run = [&](const std::vector<uint32_t> &fired, uint64_t counter) {
        tested++;
        auto t = clean;
        BitRow e(model.num_mechanisms());
        try {
            for (auto k : fired) {
                apply_z(t, map_circuit_error(rs, event_of(model.mechanisms[k]), variant));
                e.set(k, !e.get(k));
            }
        } catch (const std::out_of_range &) {
            mismatches++;
            return;
        }
        auto rng = stream_rng(seed, "tableau", counter);
        auto rec = measure_x_all(t, rs, rng);
        mismatches += evaluate_detectors(rec, cells) != model.detectors_of(e);
    };
    for (uint32_t k = 0; k < model.num_mechanisms(); k++) {
        run({k}, k);
    }
    auto rng = stream_rng(seed, "verify");
    for (size_t c = 0; c < random_configs; c++) {
        std::vector<uint32_t> fired;
        for (uint32_t k = 0; k < model.num_mechanisms(); k++) {
            if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.1) {
                fired.push_back(k);
            }
        }
        run(fired, model.num_mechanisms() + c);
    }
    r.detail = std::to_string(model.num_mechanisms()) + " single mechanisms + " + std::to_string(random_configs) +
               " random configurations, " + std::to_string(mismatches) + " mismatches";
    if (mismatches) {
        r.status = "fail";
    }
    return r;
}

/// Detector cells and consistency operators against the graph-state generators.
inline CheckResult check_stabilizer_audit(const CssCode &code, size_t rounds) {
    CheckResult r{"stabilizer_audit", "pass", ""};
    auto rs = foliate(code, rounds + 1);
    if (rs.num_sites() > kVerifyTableauCap) {
        r.status = "skipped";
        r.detail = "resource state of " + std::to_string(rs.num_sites()) + " qubits exceeds the tableau cap of " +
                   std::to_string(kVerifyTableauCap);
        return r;
    }
    auto cells = detector_cells(rs);
    auto lbl = lbl_stabilizers(rs);
    size_t bad = 0, tested = 0;
    for (auto frame : {LogicalFrame::z, LogicalFrame::x}) {
        auto gens = graph_generators(rs, frame);
        auto tab = init_graph_state(rs, frame);
        for (const auto &g : gens) {
            bad += tab.expectation(g) != +1;
            tested++;
        }
        for (const auto &cell : cells) {
            for (const auto &g : gens) {
                bad += !cell.commutes_with(g);
            }
            bad += tab.expectation(cell) != +1;
            tested++;
        }
        for (const auto &s : lbl) {
            if (s.z_type != (frame == LogicalFrame::z)) {
                continue;
            }
            for (const auto &g : gens) {
                bad += !s.op().commutes_with(g);
            }
            bad += tab.expectation(s.op()) != +1;
            tested++;
        }
    }
    r.detail = std::to_string(tested) + " operators over both frames, " + std::to_string(bad) + " violations";
    if (bad) {
        r.status = "fail";
    }
    return r;
}

inline CheckResult check_entropy_decomposition(const CssCode &code, size_t rounds, const NoiseModel &noise) {
    CheckResult r{"entropy_decomposition", "pass", ""};
    size_t total = code.num_checks() * (rounds + 1);
    if (total > kVerifyOracleCap) {
        r.status = "skipped";
        r.detail = std::to_string(total) + " readouts exceed the brute-force cap of " + std::to_string(kVerifyOracleCap);
        return r;
    }
    std::vector<uint32_t> all(total);
    std::iota(all.begin(), all.end(), 0u);
    auto rep = entropy_decomposition_check(code, rounds, noise, all);
    r.detail = "H(s)=" + format_double(rep.h_s) + " H(d)=" + format_double(rep.h_d) + " |s|=" +
               std::to_string(rep.s_bits) + " |d|=" + std::to_string(rep.d_bits) +
               " residual=" + format_double(rep.residual);
    if (!(std::abs(rep.residual) <= 1e-10)) {
        r.status = "fail";
    }
    return r;
}

/// At p = 1/2, GF(2) ranks against dense enumeration on random regions, and
/// CMI = 0 on separating tripartitions that fit in the lattice.
inline CheckResult check_rank_oracle(const CssCode &code, size_t rounds, uint64_t seed) {
    CheckResult r{"rank_oracle", "pass", ""};
    auto model = build_detector_model(code, rounds, NoiseModel{0.5, code.family == "toric" ? 0.5 : 0.0, 0.5});
    // Mechanisms that never fire are left out of the half-rate model.
    for (auto &m : model.mechanisms) {
        if (m.probability == 0) {
            m.probability = 0.5;
        }
    }
    auto rng = stream_rng(seed, "verify/rank");
    size_t bad = 0;
    for (int trial = 0; trial < 50; trial++) {
        size_t k = 1 + rng() % std::min<size_t>(12, model.num_detectors());
        auto region = internal::random_subset(model.num_detectors(), k, rng);
        double rank = rank_entropy_half(model, region);
        double brute = exact_marginal(model, region).entropy();
        bad += std::abs(rank - brute) > 1e-9;
    }
    size_t separating = 0;
    for (int trial = 0; trial < 20; trial++) {
        TripartitionSpec spec;
        spec.shape = RegionShape::strip;
        spec.wA = 1;
        spec.wB = 1 + static_cast<int>(rng() % 2);
        spec.wC = 1;
        spec.rows = 1;
        spec.width_cap = kVerifyOracleCap;
        Tripartition t;
        try {
            t = build_tripartition(model, spec);
        } catch (const std::exception &) {
            continue;
        }
        separating++;
        auto cat = [](std::vector<uint32_t> a, const std::vector<uint32_t> &b) {
            a.insert(a.end(), b.begin(), b.end());
            return a;
        };
        double cmi_rank = rank_entropy_half(model, cat(t.A, t.B)) + rank_entropy_half(model, cat(t.B, t.C)) -
                          rank_entropy_half(model, t.B) - rank_entropy_half(model, t.ABC());
        bad += cmi_rank != 0;
        bad += std::abs(cmi_exact(model, t).cmi) > 1e-9;
    }
    r.detail = "50 random regions, " + std::to_string(separating) + " separating tripartitions, " +
               std::to_string(bad) + " mismatches";
    if (bad) {
        r.status = "fail";
    }
    return r;
}

inline CheckResult check_flip_rates(const DetectorModel &model, size_t samples, uint64_t seed) {
    CheckResult r{"sampler_flip_rates", "pass", ""};
    auto rng = stream_rng(seed, "verify/flip");
    auto dets = internal::random_subset(model.num_detectors(), 20, rng);
    auto batch = sample_batch(model, dets, samples, seed, "verify/flip");
    double worst = 0;
    size_t bad = 0;
    for (size_t k = 0; k < dets.size(); k++) {
        double expect = detector_flip_probability(model, dets[k]);
        size_t ones = 0;
        for (auto w : batch.column(k)) {
            ones += static_cast<size_t>(std::popcount(w));
        }
        double rate = static_cast<double>(ones) / static_cast<double>(samples);
        double sigma = std::sqrt(expect * (1 - expect) / static_cast<double>(samples));
        if (sigma == 0) {
            bad += rate != expect;
            continue;
        }
        double z = std::abs(rate - expect) / sigma;
        worst = std::max(worst, z);
        bad += z > 4;
    }
    r.detail = std::to_string(dets.size()) + " detectors at n=" + std::to_string(samples) +
               ", largest deviation " + format_double(std::round(worst * 100) / 100) + " sigma (limit 4)";
    if (bad) {
        r.status = "fail";
    }
    return r;
}

inline CheckResult check_cmi_oracle(const DetectorModel &model, size_t samples, uint64_t seed) {
    CheckResult r{"cmi_vs_exact", "pass", ""};
    auto rng = stream_rng(seed, "verify/cmi");
    size_t bad = 0, tested = 0;
    for (int trial = 0; tested < 10 && trial < 200; trial++) {
        // Eight detectors keep the plug-in histograms well resolved at modest n.
        auto region = internal::random_subset(model.num_detectors(), 8, rng);
        std::vector<uint32_t> A, B, C;
        for (auto d : region) {
            switch (rng() % 3) {
                case 0: A.push_back(d); break;
                case 1: B.push_back(d); break;
                default: C.push_back(d); break;
            }
        }
        if (A.empty() || C.empty()) {
            continue;
        }
        auto t = make_tripartition(model, A, B, C);
        double exact = cmi_exact(model, t).cmi;
        CmiOptions opt;
        opt.samples = samples;
        opt.seed = seed + static_cast<uint64_t>(trial);
        for (auto method : {CmiMethod::sampled, CmiMethod::likelihood}) {
            opt.method = method;
            auto s = cmi(model, t, opt);
            bad += std::abs(s.cmi - exact) > 4 * s.std_error + 1e-12;
        }
        tested++;
    }
    r.detail = std::to_string(tested) + " random tripartitions, sampled and likelihood at n=" +
               std::to_string(samples) + ", " + std::to_string(bad) + " outside 4 sigma";
    if (bad) {
        r.status = "fail";
    }
    return r;
}

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool ok() const {
        return std::none_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.status == "fail"; });
    }
};

/// Small default instance for verify when the size is not configured.
inline constexpr size_t kVerifyDefaultL = 5;
inline constexpr size_t kVerifyDefaultRounds = 3;

inline VerifyReport cmd_verify(const ExperimentConfig &cfg, nlohmann::json *result = nullptr,
                               std::ostream &log = std::cerr) {
    size_t L = cfg.is_explicit("code.L") ? cfg.L : kVerifyDefaultL;
    size_t rounds = cfg.is_explicit("rounds") ? cfg.rounds : kVerifyDefaultRounds;
    auto code = make_code(cfg.family, L);
    auto model = build_detector_model(code, rounds, cfg.noise);
    auto variant = cfg.inject_fault == "mapping" ? MappingVariant::swapped_data_rules : MappingVariant::standard;

    VerifyReport rep;
    auto add = [&](CheckResult c) {
        log << c.name << ": " << (c.status == "fail" ? "FAIL" : c.status) << " (" << c.detail << ")\n";
        rep.checks.push_back(std::move(c));
    };
    add(check_foliation_correspondence(code, rounds, cfg.verify_random, cfg.seed, variant));
    add(check_stabilizer_audit(code, rounds));
    add(check_entropy_decomposition(code, rounds, cfg.noise));
    add(check_rank_oracle(code, rounds, cfg.seed));
    add(check_flip_rates(model, cfg.verify_samples, cfg.seed));
    add(check_cmi_oracle(model, cfg.verify_samples, cfg.seed));

    auto j = provenance(cfg, "verify", code_hash(code));
    j["model_hash"] = hex64(model.hash());
    j["config"] = cfg.doc;
    j["instance"] = {{"family", cfg.family}, {"L", L}, {"rounds", rounds}};
    auto checks = nlohmann::json::array();
    for (const auto &c : rep.checks) {
        checks.push_back({{"name", c.name}, {"status", c.status}, {"detail", c.detail}});
    }
    j["checks"] = checks;
    j["ok"] = rep.ok();
    if (!cfg.out_json.empty()) {
        write_text_file(cfg.out_json, j.dump(2) + "\n");
    }
    if (result) {
        *result = j;
    }
    return rep;
}

}  // namespace stm

#endif
