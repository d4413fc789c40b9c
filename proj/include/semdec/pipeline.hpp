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


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semdec/aggregator.hpp"
#include "semdec/dataio.hpp"
#include "semdec/evalharness.hpp"
#include "semdec/seqmodel.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

/// Invalid or unreadable run configuration. The CLI maps it to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A stage that could not complete. The CLI maps it to exit code 1.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(stage) {
    }
    const std::string&
    stage() const noexcept {
        return stage_;
    }

private:
    std::string stage_;
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Reads SEMDEC_LOG (error|info|debug, default info); ConfigError otherwise.
LogLevel
log_level_from_env();

struct DataSettings {
    /// "synthetic" or "csv".
    std::string source = "synthetic";
    std::filesystem::path interactions;
    std::filesystem::path item_vectors;
    /// Optional for CSV sources; items then fall back to their first token.
    std::filesystem::path categories;
    SynthConfig synth;
    SplitConfig split;
};

struct TrainSettings {
    std::vector<Objective> objectives{Objective::Ar, Objective::Parallel, Objective::SimGR};
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    AdamWConfig adamw{.lr = 3e-3};
};

struct DecodeSettings {
    /// Beam width of the AR recommender whose lists are evaluated.
    std::size_t beam_size = 20;
    /// Beam widths of the overlap analysis.
    std::vector<std::size_t> beam_sizes{1, 2, 5, 10, 20, 50, 512};
    std::vector<std::size_t> ks{1, 5, 10};
};

struct AnalysisSettings {
    bool enabled = true;
    /// Users (in split order) included in the beam-overlap analysis; 0 = all.
    std::size_t users = 100;
    bool per_user = false;
    bool theorem2 = true;
    std::size_t theorem2_instances = 1000;
    /// Also sweep many-to-one sequence-to-item maps.
    bool theorem2_many_to_one = false;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "runs/default";
    std::size_t threads = 1;
    DataSettings data;
    KMeansOptions tokenizer;
    ModelConfig model;
    TrainSettings train;
    DecodeSettings decode;
    AnalysisSettings analysis;

    /// Parses a TOML file. Every field has a default; unknown keys are
    /// rejected. ConfigError names the file, line and column.
    static RunConfig
    load(const std::filesystem::path& path);

    /// ConfigError on inconsistent values or missing input files.
    void
    validate() const;

    /// Canonical TOML rendering of every field.
    std::string
    to_toml() const;
};

/// Items a test prediction conditions on: the training items plus the
/// validation item, truncated to the most recent max_len.
std::vector<ItemIndex>
test_history(const UserSplit& user, std::size_t max_len);

/// Paradigm labels used in file names and reports.
inline constexpr const char* kParadigms[] = {"ar", "parallel", "simgr"};

struct ComparisonRow {
    std::string paradigm;
    MetricsReport metrics;
    std::uint64_t split_fingerprint = 0;
    double decode_seconds = 0.0;
};

/// paradigm,hr@1,hr@5,hr@10,ndcg@5,ndcg@10,entropy@10,coverage@10,decode_seconds.
/// InputError naming a missing paradigm, a K the reports lack, or differing
/// split fingerprints.
std::string
compare_paradigms(const std::vector<ComparisonRow>& rows);

/// Outcome of a stage sequence.
struct RunStatus {
    /// Bound checks that failed, e.g. "theorem1 B=2 K=5".
    std::vector<std::string> violations;
};

/// Stage orchestration over one output directory. Each stage reads its
/// inputs from files written by earlier stages, so subcommands can run
/// separately. A stage whose outputs exist is skipped unless `force`.
class Pipeline {
public:
    Pipeline(RunConfig cfg, bool force, LogLevel level);

    /// Creates the output directory and writes resolved_config.toml.
    void
    begin();
    void
    tokenize();
    void
    train();
    void
    decode();
    void
    evaluate();
    /// Appends failed bound checks to the returned status.
    RunStatus
    analyze();
    void
    compare();
    /// begin() and every stage in order; compare runs when all three
    /// paradigms were trained.
    RunStatus
    run_all();

    const RunConfig&
    config() const noexcept {
        return cfg_;
    }

private:
    std::filesystem::path
    out(const std::string& name) const;
    bool
    skip(const std::string& stage, const std::vector<std::filesystem::path>& outputs) const;
    void
    log(LogLevel level, const std::string& msg) const;
    void
    record_time(const std::string& key, double seconds);

    RunConfig cfg_;
    bool force_;
    LogLevel level_;
};

}  // namespace semdec
