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

// stm: spacetime Markov length experiments.
//
//   stm run    --L 16 --rounds 16 --p 0.09 --wB-max 5 --out run.json
//   stm sweep  --sizes 16x16,24x24 --ps 0.05,0.09,0.13 --out sweep.json [--resume]
//   stm verify [--inject-fault mapping]
//   stm ingest records.txt --L 16 --rounds 16 --p 0.09 --method sampled
//
// Exit codes: 0 success, 1 verification failure, 2 configuration or input error.

#include <chrono>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "stm/experiment.h"

namespace {

struct FlagSpec {
    const char *flag;
    const char *path;
};

// Command-line spellings of the configuration keys.
const FlagSpec kFlags[] = {
    {"--code", "code.family"},
    {"--L", "code.L"},
    {"--rounds", "rounds"},
    {"--p", "noise.p_x"},
    {"--p-z", "noise.p_z"},
    {"--q", "noise.q"},
    {"--shape", "tripartition.shape"},
    {"--rows", "tripartition.rows"},
    {"--wA", "tripartition.wA"},
    {"--wB-min", "tripartition.wB_min"},
    {"--wB-max", "tripartition.wB_max"},
    {"--wC", "tripartition.wC"},
    {"--width-cap", "tripartition.width_cap"},
    {"--method", "estimator.method"},
    {"--correction", "estimator.correction"},
    {"--groups", "estimator.groups"},
    {"--pattern-cap", "estimator.pattern_cap"},
    {"--samples", "samples"},
    {"--seed", "seed"},
    {"--jobs", "jobs"},
    {"--sizes", "sweep.sizes"},
    {"--ps", "sweep.ps"},
    {"--decoder-shots", "sweep.decoder_shots"},
    {"--random-configs", "verify.random_configs"},
    {"--verify-samples", "verify.samples"},
    {"--inject-fault", "verify.inject_fault"},
    {"--out", "output.json"},
    {"--csv", "output.csv"},
    {"--points-csv", "output.points_csv"},
    {"--decoder-csv", "output.decoder_csv"},
    {"--checkpoint", "output.checkpoint"},
    {"--export", "output.export"},
    {"--export-encoding", "output.export_encoding"},
};

struct Invocation {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_options(CLI::App *cmd, Invocation &inv) {
    cmd->add_option("--config", inv.config_file, "config file (JSON or key=value); flags override it");
    for (const auto &f : kFlags) {
        const auto *field = stm::find_config_field(f.path);
        std::string help = std::string(field->help) + " [" + f.path + "]";
        std::string path = f.path;
        // A repeated flag keeps its last value.
        cmd->add_option_function<std::string>(
               f.flag, [&inv, path](const std::string &v) { inv.overrides.emplace_back(path, v); }, help)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

stm::ExperimentConfig load(const Invocation &inv) {
    std::vector<std::pair<std::string, nlohmann::json>> file;
    if (!inv.config_file.empty()) {
        file = stm::read_config_file(inv.config_file);
    }
    std::vector<std::pair<std::string, nlohmann::json>> flags;
    for (const auto &[path, text] : inv.overrides) {
        flags.emplace_back(path, stm::config_value_from_text(path, text));
    }
    return stm::resolve_config(file, flags);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Spacetime Markov length of syndrome data (stm " + std::string(stm::kToolVersion) + ")"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(stm::kToolVersion));

    Invocation inv;
    auto *run = app.add_subcommand("run", "one CMI ladder at a single (L, p): CSV + JSON Markov-length fit");
    add_config_options(run, inv);
    auto *sweep = app.add_subcommand("sweep", "grid over sizes and p with peak summary");
    add_config_options(sweep, inv);
    bool resume = false;
    sweep->add_flag("--resume", resume, "reuse completed cells from the checkpoint");
    auto *verify = app.add_subcommand("verify", "correspondence, decomposition and oracle checks");
    add_config_options(verify, inv);
    auto *ingest = app.add_subcommand("ingest", "CMI ladder from a detector-records file");
    add_config_options(ingest, inv);
    std::string input;
    ingest->add_option("input", input, "detector records (JSON header line + hex or binary rows)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto t0 = std::chrono::steady_clock::now();
    int status = 0;
    try {
        auto cfg = load(inv);
        if (run->parsed()) {
            stm::cmd_run(cfg);
        } else if (sweep->parsed()) {
            stm::cmd_sweep(cfg, resume);
        } else if (verify->parsed()) {
            auto rep = stm::cmd_verify(cfg);
            status = rep.ok() ? 0 : 1;
            std::cerr << (rep.ok() ? "verify: all checks passed\n" : "verify: FAILED\n");
        } else if (ingest->parsed()) {
            stm::cmd_ingest(cfg, input);
        }
    } catch (const stm::ConfigError &e) {
        std::cerr << "configuration error:\n" << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "runtime %.1fs\n", secs);
    return status;
}
