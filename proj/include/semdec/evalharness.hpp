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
#include <string>
#include <vector>

#include "semdec/common.hpp"

namespace semdec {

using UserId = std::uint64_t;

/// Per-user chronological item sequences.
struct Interactions {
    std::vector<UserId> users;
    std::vector<std::vector<ItemIndex>> sequences;

    std::size_t
    size() const noexcept {
        return users.size();
    }
    bool
    operator==(const Interactions&) const = default;
};

struct UserSplit {
    UserId user = 0;
    std::vector<ItemIndex> train;
    ItemIndex validation = 0;
    ItemIndex test = 0;

    bool
    operator==(const UserSplit&) const = default;
};

struct SplitDataset {
    std::vector<UserSplit> users;
    /// Users removed for having fewer than the threshold interactions.
    std::size_t dropped = 0;
};

struct SplitConfig {
    /// Users with fewer interactions are dropped; values below 3 are rejected.
    std::size_t min_interactions = 5;
    /// Train sequences keep their most recent max_len items.
    std::size_t max_len = 20;
};

/// Last item is the test target, second-to-last the validation target.
/// InputError on an empty input or when every user is dropped.
SplitDataset
leave_one_out_split(const Interactions& data, const SplitConfig& cfg = {});

using UserLists = std::map<UserId, ScoredList>;
using UserTargets = std::map<UserId, ItemIndex>;

/// Fraction of target users whose target is within the top k of their list.
/// Lists shorter than k count as the whole catalog. InputError when a target
/// user has no list or there are no targets.
double
hit_rate_at_k(const UserLists& lists, const UserTargets& targets, std::size_t k);

/// Mean over target users of 1/log2(rank+1) for rank <= k, else 0.
double
ndcg_at_k(const UserLists& lists, const UserTargets& targets, std::size_t k);

/// Shannon entropy of the category distribution pooled over every user's
/// top-k items, in nats (or bits). InputError when a recommended item has no
/// category (index past the end of `categories`).
double
entropy_at_k(const UserLists& lists,
             const std::vector<std::uint32_t>& categories,
             std::size_t k,
             bool bits = false);

/// |distinct items in all top-k lists| / item_count.
double
coverage(const UserLists& lists, std::size_t item_count, std::size_t k);

struct MetricsReport {
    std::vector<std::size_t> ks;
    std::map<std::size_t, double> hr;
    std::map<std::size_t, double> ndcg;
    /// Nats.
    std::map<std::size_t, double> entropy;
    std::map<std::size_t, double> coverage;
    std::size_t users = 0;
    std::size_t item_count = 0;

    std::string
    to_json() const;
    /// One row per K: k,hr,ndcg,entropy,coverage.
    std::string
    to_csv() const;
};

/// All four metrics for each k. Per-user terms are computed in parallel and
/// reduced in user order, so the report does not depend on `threads`.
MetricsReport
evaluate(const UserLists& lists,
         const UserTargets& targets,
         const std::vector<std::uint32_t>& categories,
         std::size_t item_count,
         const std::vector<std::size_t>& ks,
         std::size_t threads = 1);

}  // namespace semdec
