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
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "semdec/common.hpp"
#include "semdec/decoding.hpp"
#include "semdec/seqmodel.hpp"
#include "semdec/tokenizer.hpp"

namespace semdec {

// ---------------------------------------------------------------------------
// Beam-search overlap

/// |top-K(a) ∩ top-K(b)| / K. InputError if either list is shorter than K.
double
overlap_at_k(const ScoredList& a, const ScoredList& b, std::size_t k);

/// Per-user overlap between beam(B) top-K and exact top-K. A beam narrower
/// than K returns fewer than K items; the fraction is still taken over K.
struct OverlapReport {
    std::size_t beam_size = 0;
    std::size_t top_k = 0;
    std::vector<double> per_user;
    double mean = 0.0;
    /// Sum over users of the intersection sizes.
    std::size_t intersect_total = 0;
};

/// Rank-event bound on the overlap. Rank events are 0/1 for a frozen model,
/// so each user's joint-event probability is the fraction of their exact
/// top-K items whose every token ranks within B.
struct BoundEstimate {
    std::size_t beam_size = 0;
    std::size_t top_k = 0;
    std::vector<double> per_user;
    double theorem1_upper = 0.0;
    /// Sum over users of the number of exact top-K items with all ranks <= B.
    std::size_t admissible_total = 0;
};

OverlapReport
measure_overlap(const ModelParams& params,
                const PrefixTrie& trie,
                const std::vector<TokenSeq>& contexts,
                std::size_t beam_size,
                std::size_t k,
                std::size_t threads = 1);

BoundEstimate
theorem1_upper_bound(const ModelParams& params,
                     const PrefixTrie& trie,
                     const std::vector<TokenSeq>& contexts,
                     std::size_t beam_size,
                     std::size_t k,
                     std::size_t threads = 1);

/// 1 - sum_l (1 - q_l), unclamped. InputError when some q_l is outside [0,1].
double
union_lower_bound(std::span<const double> q);

/// Per-level rank marginals of the users' target items and the joint event.
struct MarginalEstimate {
    std::size_t beam_size = 0;
    std::vector<double> q;
    /// Fraction of users whose target has every rank <= B.
    double joint_frequency = 0.0;
    std::vector<std::size_t> level_counts;
    std::size_t joint_count = 0;
    std::size_t users = 0;
};

MarginalEstimate
estimate_marginal_q(const ModelParams& params,
                    const PrefixTrie& trie,
                    const std::vector<TokenSeq>& contexts,
                    std::span<const ItemIndex> targets,
                    std::size_t beam_size,
                    std::size_t threads = 1);

/// Same estimate from precomputed rank profiles (one per user).
MarginalEstimate
marginal_q_from_ranks(const std::vector<std::vector<std::uint32_t>>& target_ranks, std::size_t beam_size);

/// One (B, K) cell of a beam sweep.
struct SweepCell {
    OverlapReport overlap;
    BoundEstimate bound;
    /// Inequality checked on integer totals, so it is exact.
    bool theorem1_holds = false;
};

/// One B row of the marginal analysis.
struct SweepMarginals {
    MarginalEstimate targets;
    double union_lower = 0.0;
    /// union_lower <= joint_frequency, checked on integer counts.
    bool union_holds = false;
};

struct BeamSweep {
    std::vector<std::size_t> beam_sizes;
    std::vector<std::size_t> top_ks;
    /// cells[b][k] for beam_sizes[b], top_ks[k].
    std::vector<std::vector<SweepCell>> cells;
    std::vector<SweepMarginals> marginals;
};

/// Builds the step model of one user (called once per user, possibly from
/// several threads).
using StepModelFactory = std::function<std::unique_ptr<StepModel>(std::size_t user)>;

/// Exact enumeration once per user, one beam search per B, every K from the
/// same lists. Equivalent to calling measure_overlap, theorem1_upper_bound and
/// estimate_marginal_q for each combination.
BeamSweep
run_beam_sweep(const StepModelFactory& make_model,
               std::size_t users,
               const PrefixTrie& trie,
               std::span<const ItemIndex> targets,
               const std::vector<std::size_t>& beam_sizes,
               const std::vector<std::size_t>& top_ks,
               std::size_t threads = 1);

BeamSweep
run_beam_sweep(const ModelParams& params,
               const PrefixTrie& trie,
               const std::vector<TokenSeq>& contexts,
               std::span<const ItemIndex> targets,
               const std::vector<std::size_t>& beam_sizes,
               const std::vector<std::size_t>& top_ks,
               std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Marginal-product shift

/// Exact joint over a grid of token sequences (row-major, last level fastest)
/// and its marginal-product approximation. item_map sends each sequence to an
/// item and may be many-to-one.
struct DistributionPair {
    std::vector<std::size_t> vocab;
    std::vector<double> p_star;
    std::vector<double> p_tilde;
    std::vector<ItemIndex> item_map;
    std::size_t item_count = 0;
};

/// Per-position marginals multiplied back out over the full grid.
/// InputError when p_star is not a distribution (sum off by > 1e-9).
std::vector<double>
product_of_marginals(std::span<const double> p_star, std::span<const std::size_t> vocab);

/// sum_s (p~(s) - p*(s))^2 / p*(s). DomainError when p*(s) = 0 < p~(s).
double
chi_square(std::span<const double> p_star, std::span<const double> p_tilde);

struct ShiftReport {
    double chi_square = 0.0;
    std::vector<double> per_item_terms;
    /// sum of per-item terms (at most chi_square).
    double item_chi_square = 0.0;
    double bound = 0.0;
    ItemIndex witness_item = 0;
    double max_term = 0.0;
    /// max_term >= bound.
    bool holds = false;
    /// item_chi_square <= chi_square (up to 1e-12 relative rounding).
    bool grouped_holds = false;
};

ShiftReport
verify_theorem2(const DistributionPair& pair);

/// Strictly positive Dirichlet(1) joint over levels x vocab, its product of
/// marginals, and an item map: identity when !many_to_one, otherwise a random
/// surjection onto between 2 and |S|-1 items.
DistributionPair
random_distribution_pair(std::mt19937_64& rng, std::size_t levels, std::size_t vocab, bool many_to_one);

struct Theorem2Sweep {
    std::size_t instances = 0;
    std::size_t violations = 0;
    std::size_t grouped_violations = 0;
    /// Smallest max_term / bound observed (infinity when every bound is 0).
    double worst_ratio = 0.0;
};

/// Random sweep over levels in {2,3} and vocab in {2,3,4}.
Theorem2Sweep
theorem2_sweep(std::uint64_t seed, std::size_t instances, bool many_to_one);

}  // namespace semdec
