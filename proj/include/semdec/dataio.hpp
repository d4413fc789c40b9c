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
#include <string>
#include <vector>

#include "semdec/common.hpp"
#include "semdec/evalharness.hpp"
#include "semdec/seqmodel.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
    std::size_t n_items = 512;
    std::size_t n_users = 1000;
    std::size_t dim = 32;
    std::size_t n_categories = 8;
    /// Standard deviation of items around their category center.
    double cluster_spread = 0.35;
    std::size_t min_seq_len = 5;
    std::size_t max_seq_len = 20;
    /// Softmax temperature over item-preference affinities.
    double preference_temperature = 0.25;
    /// Step size with which the preference moves toward each consumed item.
    double drift = 0.3;
    std::uint64_t seed = 0;

    /// Throws InputError on zero counts, non-positive spread or temperature,
    /// drift outside [0,1] or max_seq_len > n_items.
    void
    validate() const;
};

struct SyntheticData {
    ItemVectors items;
    std::vector<std::uint32_t> categories;
    Interactions interactions;
};

/// Items are category centers plus Gaussian noise. Each user starts from a
/// preference near one category center and draws distinct items by a
/// temperature softmax over affinity <pref, item> / sqrt(dim); after every
/// draw the preference drifts toward the drawn item. Every item and user owns
/// an RNG stream keyed by (seed, index), so output is independent of `threads`.
SyntheticData
generate_synthetic(const SynthConfig& cfg, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// CSV

/// Header `user_id,item_id,timestamp`. Users come out in ascending id order,
/// each sequence sorted by timestamp with ties kept in file order. A header
/// with no rows gives an empty dataset. ParseError carries the line number.
Interactions
load_interactions_csv(const std::filesystem::path& path);

/// Writes one row per interaction with the position as timestamp.
void
save_interactions_csv(const Interactions& data, const std::filesystem::path& path);

/// Header `item_id,v0,...,vD`; ids must cover 0..n-1 exactly once.
ItemVectors
load_item_vectors_csv(const std::filesystem::path& path);

void
save_item_vectors_csv(const ItemVectors& items, const std::filesystem::path& path);

/// Header `item_id,category`; ids must cover 0..n-1 exactly once.
std::vector<std::uint32_t>
load_categories_csv(const std::filesystem::path& path);

void
save_categories_csv(const std::vector<std::uint32_t>& categories, const std::filesystem::path& path);

/// Header `item_id,t1,...,tL,tdedup`. Level vocabulary sizes are not stored in
/// the rows; the loader takes them from a leading `# vocab v1 ... vdedup` line.
SemanticIdTable
load_semantic_ids_csv(const std::filesystem::path& path);

void
save_semantic_ids_csv(const SemanticIdTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: magic "SEMDECKP", uint32 version, uint64 header length, JSON header
// (kind, config, block names and shapes), concatenated little-endian float64
// block payloads, trailing uint64 FNV-1a checksum of every preceding byte.

inline constexpr std::uint32_t kCheckpointVersion = 1;

class VersionError : public Error {
public:
    using Error::Error;
};

struct CheckpointBlock {
    std::string name;
    Matrix value;

    bool
    operator==(const CheckpointBlock&) const = default;
};

struct Checkpoint {
    /// "model" or "codebooks".
    std::string kind;
    /// Serialized configuration echo.
    std::string config_json;
    std::vector<CheckpointBlock> blocks;
};

/// Writes to a sibling temporary file and renames it into place.
void
write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// InputError when the file cannot be opened; IntegrityError on bad magic,
/// truncation or checksum mismatch; VersionError on another format version.
Checkpoint
read_checkpoint(const std::filesystem::path& path);

std::string
model_config_to_json(const ModelConfig& cfg);

/// SchemaError on missing or mistyped fields.
ModelConfig
model_config_from_json(const std::string& text);

void
save_params(const ModelParams& params, const std::filesystem::path& path);

/// Rebuilds the parameters from the stored configuration.
ModelParams
load_params(const std::filesystem::path& path);

/// Loads into the shapes implied by `expected`; SchemaError naming the first
/// block whose stored shape differs, or when a block is missing.
ModelParams
load_params(const std::filesystem::path& path, const ModelConfig& expected);

void
save_codebooks(const Codebooks& books, const std::filesystem::path& path);

Codebooks
load_codebooks(const std::filesystem::path& path);

}  // namespace semdec
