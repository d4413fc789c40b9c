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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semdec/aggregator.hpp"
#include "semdec/common.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

/// Shape of the sequence model. `level_vocab_sizes` covers every position of a
/// semantic ID, dedup position included.
struct ModelConfig {
    std::size_t dim = 32;
    std::vector<std::size_t> level_vocab_sizes;
    std::size_t context_len = 105;
    /// 0 bypasses the encoder: the state is token + position embedding.
    std::size_t encoder_blocks = 1;
    std::size_t heads = 2;
    std::size_t ff_mult = 4;
    /// Parallel heads start at zero (uniform marginals) when set.
    bool zero_init_heads = true;
    SimGRConfig simgr;
    std::uint64_t seed = 0;

    std::size_t
    levels() const noexcept {
        return level_vocab_sizes.size();
    }
    /// First global token id of a level's slice of the embedding table.
    std::size_t
    level_offset(std::size_t level) const;
    /// Begin-of-context token, placed after the level slices.
    Token
    bos_token() const;
    std::size_t
    vocab_size() const;
    std::size_t
    aggregated_tokens() const noexcept {
        return simgr.include_dedup || levels() == 0 ? levels() : levels() - 1;
    }

    /// Throws InputError on inconsistent sizes.
    void
    validate() const;

    bool
    operator==(const ModelConfig&) const = default;
};

/// Indices of the named parameter blocks inside ModelParams.
struct ParamLayout {
    struct Encoder {
        std::size_t ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::size_t token_embeddings = 0;
    std::size_t position_embeddings = 0;
    std::vector<Encoder> encoder;
    std::size_t lnf_g = 0;
    std::size_t lnf_b = 0;
    std::vector<std::size_t> heads;
    std::vector<std::size_t> aggregator;
};

/// All trainable weights. One trunk, three read-outs: the AR head is the
/// token-embedding table itself (tied), the parallel heads are untied
/// per-level matrices, and SimGR pools token embeddings per item.
///
/// Matrices that act on a vector are stored (out x in), so y = W x.
class ModelParams {
public:
    ModelParams() = default;
    /// Zero-valued parameters of the right shapes.
    explicit ModelParams(ModelConfig config);

    /// Seeded random initialisation.
    static ModelParams
    initialize(const ModelConfig& config);

    /// Same shapes, all zeros (gradient accumulator).
    static ModelParams
    zeros_like(const ModelParams& other);

    const ModelConfig&
    config() const noexcept {
        return config_;
    }
    const ParamLayout&
    layout() const noexcept {
        return layout_;
    }

    std::size_t
    block_count() const noexcept {
        return blocks_.size();
    }
    const std::string&
    block_name(std::size_t i) const {
        return names_[i];
    }
    Matrix&
    block(std::size_t i) {
        return blocks_[i];
    }
    const Matrix&
    block(std::size_t i) const {
        return blocks_[i];
    }
    /// LookupError when no block has this name.
    std::size_t
    block_index(std::string_view name) const;

    std::size_t
    parameter_count() const noexcept;

    AggregatorWeights
    aggregator_weights() const;

    bool
    operator==(const ModelParams& other) const {
        return config_ == other.config_ && blocks_ == other.blocks_;
    }

private:
    std::size_t
    add(std::string name, std::size_t rows, std::size_t cols);

    ModelConfig config_;
    ParamLayout layout_;
    std::vector<std::string> names_;
    std::vector<Matrix> blocks_;
};

/// Copy of the AR output projection for a level: rows of the token-embedding
/// table belonging to that level.
Matrix
ar_output_matrix(const ModelParams& params, std::size_t level);

/// Final-layer state at the last position.
using HiddenState = std::vector<double>;

struct EncoderTape;

/// Incremental causal encoder. Pushing tokens one at a time computes exactly
/// the same arithmetic as encoding the full sequence, so truncating and
/// re-extending reproduces states bitwise. Holds per-block keys and values.
class EncoderCache {
public:
    explicit EncoderCache(const ModelParams& params);

    /// Appends a global token id. InputError when out of range or over length.
    void
    push(Token token);

    void
    truncate(std::size_t length);

    std::size_t
    length() const noexcept {
        return length_;
    }

    /// Final-layer state at position pos (default: last).
    std::span<const double>
    hidden(std::size_t pos) const;
    std::span<const double>
    hidden() const;

    void
    attach_tape(EncoderTape* tape) noexcept {
        tape_ = tape;
    }

private:
    friend class Backprop;

    const ModelParams* params_;
    std::size_t length_ = 0;
    std::vector<Matrix> keys_;
    std::vector<Matrix> values_;
    Matrix hidden_;
    EncoderTape* tape_ = nullptr;

    // scratch
    std::vector<double> x_, a_, q_, o_, tmp_, u_, g_, scores_;
};

/// BOS followed by each item's semantic-ID tokens (global ids), oldest first.
TokenSeq
serialize_history(const ModelConfig& config,
                  const SemanticIdTable& table,
                  std::span<const ItemIndex> items);

/// Global id of a level-local token.
Token
global_token(const ModelConfig& config, std::size_t level, Token local);

HiddenState
encode(const ModelParams& params, std::span<const Token> context);

/// Next-token logits over the vocabulary of level |prefix|, computed from
/// encode(context ++ prefix) and the tied embedding slice. prefix holds
/// level-local tokens.
std::vector<double>
ar_logits(const ModelParams& params, std::span<const Token> context, std::span<const Token> prefix);

/// Per-level marginal logits from one forward pass of the context.
std::vector<std::vector<double>>
parallel_logits(const ModelParams& params, std::span<const Token> context);

/// Per-level logits from a hidden state.
std::vector<std::vector<double>>
parallel_logits_from_state(const ModelParams& params, std::span<const double> state);

/// log-softmax / softmax helpers (max-subtracted).
std::vector<double>
log_softmax(std::span<const double> logits);
std::vector<double>
softmax(std::span<const double> logits);

enum class Objective { Ar, Parallel, SimGR };

std::string_view
objective_name(Objective o) noexcept;

Objective
parse_objective(std::string_view name);

/// One user history used for teacher-forced training. Every item is a
/// prediction target given the items before it (the first one given BOS
/// only); the loss averages over all such targets in a batch.
struct TrainExample {
    std::vector<ItemIndex> items;
};

struct TrainBatch {
    std::vector<TrainExample> examples;
};

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double warmup_ratio = 0.01;
    /// Length of the cosine schedule; 0 keeps lr constant.
    std::size_t total_steps = 0;
};

struct OptimizerState {
    std::size_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

OptimizerState
make_optimizer_state(const ModelParams& params);

/// Scheduled learning rate for a 0-based step.
double
scheduled_lr(const AdamWConfig& cfg, std::size_t step);

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grad;
    std::size_t targets = 0;
};

/// Mean negative log-likelihood over the batch and its exact gradient.
/// TrainingError if an example's loss is not finite.
LossAndGrad
loss_and_gradients(const ModelParams& params,
                   const TrainBatch& batch,
                   Objective objective,
                   const SemanticIdTable& table);

/// Loss only (used by finite differences).
double
batch_loss(const ModelParams& params,
           const TrainBatch& batch,
           Objective objective,
           const SemanticIdTable& table);

/// One AdamW step (decoupled weight decay). Returns the pre-update loss.
double
train_step(ModelParams& params,
           OptimizerState& state,
           const TrainBatch& batch,
           Objective objective,
           const AdamWConfig& hyper,
           const SemanticIdTable& table);

struct GradCheckBlock {
    std::string name;
    std::size_t coordinates = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::vector<GradCheckBlock> blocks;
    bool passed = false;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    std::size_t samples_per_block = 64;
    /// Denominator floor of the relative error, so gradients that are zero on
    /// both sides compare as equal instead of 0/0.
    double abs_floor = 1e-6;
    std::uint64_t seed = 17;
    /// Mutation control: negate the analytic gradient of this block.
    std::optional<std::string> corrupt_block;
};

/// Analytic gradients vs central finite differences on every block.
GradCheckReport
grad_check(const ModelParams& params,
           const TrainExample& example,
           Objective objective,
           const SemanticIdTable& table,
           const GradCheckOptions& opts = {});

}  // namespace semdec
