// Copyright 2026 The semdec Authors
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


#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "semdec/pipeline.hpp"

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kStageFailure = 1;
constexpr int kConfigError = 2;
constexpr int kBoundViolated = 3;

std::vector<std::size_t>
parse_list(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, comma - start);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size() || v == 0) {
            throw semdec::ConfigError(std::string(flag) + ": expected positive integers separated by commas, got '" +
                                      text + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
        start = comma + 1;
    }
    return out;
}

}  // namespace

int
main(int argc, char** argv) {
    CLI::App app{"semdec: semantic-ID recommendation decoding lab"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> objective;
    std::optional<std::string> beam;
    std::optional<std::string> topk;
    bool force = false;

    app.add_option("--config", config_path, "TOML run configuration (defaults apply when omitted)");
    app.add_option("--out", out_dir, "Output directory (overrides out_dir)");
    app.add_option("--seed", seed, "Global seed (overrides seed)");
    app.add_flag("--force", force, "Recompute stages whose outputs already exist");
    app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);
    app.add_option("--objective", objective, "Objectives to train and decode")
        ->check(CLI::IsMember({"ar", "parallel", "simgr", "all"}));
    app.add_option("--beam", beam, "Beam widths of the overlap analysis, e.g. 1,5,20");
    app.add_option("--topk", topk, "Cut-offs K for metrics and overlap, e.g. 1,5,10");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"tokenize", "Prepare data and fit semantic IDs"},
        {"train", "Train one model per objective"},
        {"decode", "Write top-K lists per paradigm"},
        {"evaluate", "Compute HR, NDCG, Entropy and coverage"},
        {"analyze", "Check beam-overlap and chi-square shift bounds"},
        {"all", "Run every stage"},
        {"compare", "Tabulate the three paradigms"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    semdec::RunConfig cfg;
    semdec::LogLevel level = semdec::LogLevel::Info;
    try {
        level = semdec::log_level_from_env();
        if (!config_path.empty()) {
            cfg = semdec::RunConfig::load(config_path);
        }
        if (out_dir) {
            cfg.out_dir = *out_dir;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (threads) {
            cfg.threads = *threads;
        }
        if (objective && *objective != "all") {
            cfg.train.objectives = {semdec::parse_objective(*objective)};
        } else if (objective) {
            cfg.train.objectives = {semdec::Objective::Ar, semdec::Objective::Parallel, semdec::Objective::SimGR};
        }
        if (beam) {
            cfg.decode.beam_sizes = parse_list(*beam, "--beam");
        }
        if (topk) {
            cfg.decode.ks = parse_list(*topk, "--topk");
        }
        cfg.validate();
    } catch (const semdec::Error& e) {
        std::cerr << "semdec: config error: " << e.what() << "\n";
        return kConfigError;
    }

    try {
        semdec::Pipeline pipe(cfg, force, level);
        semdec::RunStatus status;
        if (command == "all") {
            status = pipe.run_all();
        } else {
            pipe.begin();
            pipe.tokenize();
            if (command != "tokenize") {
                pipe.train();
            }
            if (command == "decode" || command == "evaluate" || command == "compare") {
                pipe.decode();
            }
            if (command == "evaluate" || command == "compare") {
                pipe.evaluate();
            }
            if (command == "analyze") {
                status = pipe.analyze();
            }
            if (command == "compare") {
                pipe.compare();
            }
        }
        if (!status.violations.empty()) {
            for (const auto& v : status.violations) {
                std::cerr << "semdec: bound violated: " << v << "\n";
            }
            return kBoundViolated;
        }
    } catch (const semdec::StageError& e) {
        std::cerr << "semdec: " << e.what() << "\n";
        return kStageFailure;
    } catch (const std::exception& e) {
        std::cerr << "semdec: stage failure: " << e.what() << "\n";
        return kStageFailure;
    }
    return kOk;
}
