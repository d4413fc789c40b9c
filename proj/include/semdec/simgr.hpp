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
#include <span>
#include <vector>

#include "semdec/common.hpp"
#include "semdec/seqmodel.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

/// Aggregated item representations, one row per item.
struct ItemMatrix {
    Matrix rows;
    /// Training step at which the rows were materialized.
    std::size_t refresh_stamp = 0;

    std::size_t
    item_count() const noexcept {
        return rows.rows();
    }
};

/// Token embeddings of one item's pooled tokens (L' x d).
Matrix
item_token_matrix(const ModelParams& params, const TokenSeq& ids);

/// Pools every item of the table with the model's aggregator.
ItemMatrix
materialize_items(const ModelParams& params, const SemanticIdTable& table, std::size_t stamp = 0);

/// Softmax over <h, item>/tau (cosine similarity when `cosine`).
/// InputError for non-finite h or tau <= 0.
std::vector<double>
score_all_items(std::span<const double> h, const ItemMatrix& items, double tau, bool cosine = false);

struct SimGRLoss {
    double loss = 0.0;
    std::vector<double> grad_h;
    Matrix grad_items;
};

/// Full-softmax cross-entropy of the target item and its exact gradients.
SimGRLoss
simgr_loss(std::span<const double> h, const ItemMatrix& items, ItemIndex target, double tau, bool cosine = false);

/// As simgr_loss, but adds weight * gradients into grad_h and (when non-null)
/// grad_items instead of allocating. Returns the unweighted loss.
double
simgr_loss_accumulate(std::span<const double> h,
                      const ItemMatrix& items,
                      ItemIndex target,
                      double tau,
                      bool cosine,
                      double weight,
                      std::span<double> grad_h,
                      Matrix* grad_items);

/// Top-K items by probability, ties broken by item index. One encoder pass.
ScoredList
simgr_topk(const ModelParams& params, const ItemMatrix& items, std::span<const Token> context, std::size_t k);

/// Convenience overload that materializes the item matrix first.
ScoredList
simgr_topk(const ModelParams& params,
           const SemanticIdTable& table,
           std::span<const Token> context,
           std::size_t k);

}  // namespace semdec
