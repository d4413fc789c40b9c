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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semdec/common.hpp"

namespace semdec {

/// How an item's token embeddings are pooled into one item vector.
enum class AggregatorKind { Mean, ConcatProject, ProjectPool, Gating, CrossAttention };

std::string_view
aggregator_name(AggregatorKind kind) noexcept;

AggregatorKind
parse_aggregator(std::string_view name);

/// Learned weights of the aggregator, by kind:
///   Mean            none
///   ConcatProject   a: d x (L*d) projection
///   ProjectPool     a: d x d projection applied per token before the mean
///   Gating          a: 1 x d gate vector, gate logit_l = <a, x_l>
///   CrossAttention  a: 1 x d query, b: d x d value map
struct AggregatorWeights {
    AggregatorKind kind = AggregatorKind::Mean;
    const Matrix* a = nullptr;
    const Matrix* b = nullptr;
};

/// Shapes (rows, cols) of the learned blocks for a kind; empty for Mean.
std::vector<std::pair<std::size_t, std::size_t>>
aggregator_block_shapes(AggregatorKind kind, std::size_t tokens, std::size_t dim);

/// Initial values: every learned kind starts as an exact mean pool.
std::vector<Matrix>
aggregator_initial_blocks(AggregatorKind kind, std::size_t tokens, std::size_t dim);

/// Pools the rows of `tokens` (L x d) into a d-vector.
std::vector<double>
aggregate_item(const Matrix& tokens, const AggregatorWeights& w);

/// Accumulates d(loss)/d(tokens) into dtokens and weight gradients into
/// da/db (which may be null for kinds that do not use them).
void
aggregate_backward(const Matrix& tokens,
                   const AggregatorWeights& w,
                   std::span<const double> dy,
                   Matrix& dtokens,
                   Matrix* da,
                   Matrix* db);

/// Temperature, pooling and scoring options for similarity retrieval.
struct SimGRConfig {
    double tau = 0.07;
    AggregatorKind aggregator = AggregatorKind::Mean;
    /// Include the trailing dedup token in the pooled embedding.
    bool include_dedup = true;
    /// Ablation only: L2-normalise user and item vectors before the inner product.
    bool cosine = false;

    bool
    operator==(const SimGRConfig&) const = default;
};

}  // namespace semdec
