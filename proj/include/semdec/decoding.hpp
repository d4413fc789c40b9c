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
#include <map>
#include <span>
#include <vector>

#include "semdec/common.hpp"
#include "semdec/seqmodel.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

/// Source of next-token logits for one fixed context. prefix holds the
/// level-local tokens decoded so far; the result covers the vocabulary of
/// level |prefix|.
class StepModel {
public:
    virtual ~StepModel() = default;
    virtual std::vector<double>
    step_logits(std::span<const Token> prefix) = 0;
};

/// Source of per-level marginal logits for one fixed context.
class MarginalModel {
public:
    virtual ~MarginalModel() = default;
    virtual std::vector<std::vector<double>>
    marginal_logits() = 0;
};

/// Hand-specified step distributions keyed by prefix. Probabilities are given
/// directly and turned into log-probability logits.
class TabularStepModel : public StepModel {
public:
    void
    set(TokenSeq prefix, std::vector<double> probabilities);

    std::vector<double>
    step_logits(std::span<const Token> prefix) override;

private:
    std::map<TokenSeq, std::vector<double>> table_;
};

class TabularMarginalModel : public MarginalModel {
public:
    explicit TabularMarginalModel(std::vector<std::vector<double>> probabilities);

    std::vector<std::vector<double>>
    marginal_logits() override;

private:
    std::vector<std::vector<double>> logits_;
};

/// AR read-out of a trained model. Successive prefixes share their common
/// part through one incremental encoder cache.
class TransformerStepModel : public StepModel {
public:
    TransformerStepModel(const ModelParams& params, std::span<const Token> context);

    std::vector<double>
    step_logits(std::span<const Token> prefix) override;

    /// Tokens pushed through the encoder so far (context included).
    std::size_t
    tokens_encoded() const noexcept {
        return pushed_;
    }

private:
    const ModelParams* params_;
    EncoderCache cache_;
    std::size_t context_len_;
    TokenSeq cached_prefix_;
    std::size_t pushed_ = 0;
};

/// Parallel-head read-out of a trained model; one encoder pass at construction.
class TransformerMarginalModel : public MarginalModel {
public:
    TransformerMarginalModel(const ModelParams& params, std::span<const Token> context);

    std::vector<std::vector<double>>
    marginal_logits() override {
        return logits_;
    }

private:
    std::vector<std::vector<double>> logits_;
};

struct BeamConfig {
    std::size_t beam_size = 20;
    std::size_t top_k = 10;
    /// Renormalise each step distribution over the trie-valid tokens.
    bool renormalize_over_valid = true;
};

/// Log step-probabilities of the valid children of the node reached by prefix,
/// aligned with trie.children(node).
std::vector<double>
step_log_probs(StepModel& model, const PrefixTrie& trie, std::span<const Token> prefix, bool renormalize);

/// Trie-constrained breadth-first beam search. Each level keeps the B best
/// prefixes ordered by (cumulative log-prob desc, last-step log-prob desc,
/// prefix asc); final leaves are ranked (score desc, item asc) and cut to K.
ScoredList
beam_search(StepModel& model, const PrefixTrie& trie, const BeamConfig& cfg);

/// Exact chain-rule log-probability of every item plus, per item, the rank of
/// each of its tokens within the step distribution at its true prefix.
struct TreeScores {
    std::vector<double> item_log_prob;
    std::vector<std::vector<std::uint32_t>> rank_profile;
};

/// Depth-first walk of the whole trie with shared-prefix score caching.
/// Cumulative sums are formed in the same order as beam_search, so scores of
/// items found by both agree bitwise.
TreeScores
enumerate_tree(StepModel& model, const PrefixTrie& trie, bool renormalize = true);

/// Exact top-K by full enumeration.
ScoredList
exact_search(StepModel& model, const PrefixTrie& trie, std::size_t k, bool renormalize = true);

/// Top-K of precomputed tree scores (score desc, item asc).
ScoredList
top_k_of(const std::vector<double>& scores, std::size_t k);

/// Sum over levels of the log step-probability of a full valid sequence.
/// InputError for sequences that are not trie paths.
double
sequence_logprob(StepModel& model, const PrefixTrie& trie, std::span<const Token> sequence, bool renormalize = true);

/// 1-based rank of each of the item's tokens among the valid tokens at its
/// prefix; ties go to the smaller token.
std::vector<std::uint32_t>
rank_profile(StepModel& model, const PrefixTrie& trie, ItemIndex item, bool renormalize = true);

/// Scores every leaf by the sum of per-level log marginals of its tokens; only
/// trie paths are visited. Top-K, (score desc, item asc).
ScoredList
parallel_decode(MarginalModel& model, const PrefixTrie& trie, std::size_t k);

/// Log marginal-product score of every item (the full vector behind
/// parallel_decode).
std::vector<double>
parallel_item_scores(MarginalModel& model, const PrefixTrie& trie);

// Convenience overloads that wrap a trained model and a context.

ScoredList
beam_search(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, const BeamConfig& cfg);

ScoredList
exact_search(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, std::size_t k);

ScoredList
parallel_decode(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, std::size_t k);

}  // namespace semdec
