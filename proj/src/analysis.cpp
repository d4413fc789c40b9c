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

#include "semdec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "semdec/parallel.hpp"
#include "semdec/rng.hpp"

namespace semdec {

double
overlap_at_k(const ScoredList& a, const ScoredList& b, std::size_t k) {
    if (k == 0) {
        throw InputError("overlap_at_k: K must be >= 1");
    }
    if (a.size() < k || b.size() < k) {
        throw InputError("overlap_at_k: list shorter than K");
    }
    std::set<ItemIndex> left;
    for (std::size_t r = 0; r < k; ++r) {
        left.insert(a.entries[r].item);
    }
    std::size_t shared = 0;
    for (std::size_t r = 0; r < k; ++r) {
        shared += left.count(b.entries[r].item);
    }
    return static_cast<double>(shared) / static_cast<double>(k);
}

double
union_lower_bound(std::span<const double> q) {
    double s = 0.0;
    for (double v : q) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InputError("union_lower_bound: q outside [0,1]");
        }
        s += 1.0 - v;
    }
    return 1.0 - s;
}

namespace {

double
mean_of(const std::vector<double>& xs) {
    if (xs.empty()) {
        return 0.0;
    }
    CompensatedSum s;
    for (double x : xs) {
        s.add(x);
    }
    return s.value() / static_cast<double>(xs.size());
}

struct UserSweep {
    // [b][k]
    std::vector<std::vector<std::size_t>> intersect;
    std::vector<std::vector<std::size_t>> admissible;
    std::vector<std::uint32_t> target_ranks;
};

void
require_sizes(const std::vector<std::size_t>& xs, const char* what) {
    if (xs.empty()) {
        throw InputError(std::string(what) + " list is empty");
    }
    for (auto x : xs) {
        if (x == 0) {
            throw InputError(std::string(what) + " values must be >= 1");
        }
    }
}

}  // namespace

MarginalEstimate
marginal_q_from_ranks(const std::vector<std::vector<std::uint32_t>>& target_ranks, std::size_t beam_size) {
    MarginalEstimate out;
    out.beam_size = beam_size;
    out.users = target_ranks.size();
    if (target_ranks.empty()) {
        throw InputError("marginal estimate over zero users");
    }
    const std::size_t levels = target_ranks.front().size();
    out.level_counts.assign(levels, 0);
    for (const auto& r : target_ranks) {
        bool all = true;
        for (std::size_t l = 0; l < levels; ++l) {
            if (r[l] <= beam_size) {
                ++out.level_counts[l];
            } else {
                all = false;
            }
        }
        out.joint_count += all ? 1 : 0;
    }
    const double n = static_cast<double>(out.users);
    for (auto c : out.level_counts) {
        out.q.push_back(static_cast<double>(c) / n);
    }
    out.joint_frequency = static_cast<double>(out.joint_count) / n;
    return out;
}

BeamSweep
run_beam_sweep(const ModelParams& params,
               const PrefixTrie& trie,
               const std::vector<TokenSeq>& contexts,
               std::span<const ItemIndex> targets,
               const std::vector<std::size_t>& beam_sizes,
               const std::vector<std::size_t>& top_ks,
               std::size_t threads) {
    auto factory = [&](std::size_t u) -> std::unique_ptr<StepModel> {
        return std::make_unique<TransformerStepModel>(params, contexts[u]);
    };
    return run_beam_sweep(factory, contexts.size(), trie, targets, beam_sizes, top_ks, threads);
}

BeamSweep
run_beam_sweep(const StepModelFactory& make_model,
               std::size_t users,
               const PrefixTrie& trie,
               std::span<const ItemIndex> targets,
               const std::vector<std::size_t>& beam_sizes,
               const std::vector<std::size_t>& top_ks,
               std::size_t threads) {
    require_sizes(beam_sizes, "beam size");
    require_sizes(top_ks, "top-K");
    if (users == 0) {
        throw InputError("beam sweep over zero users");
    }
    if (!targets.empty() && targets.size() != users) {
        throw InputError("one target per user required");
    }
    const std::size_t max_k = *std::max_element(top_ks.begin(), top_ks.end());
    std::vector<UserSweep> per_user(users);
    parallel_for(users, threads, [&](std::size_t u) {
        const auto model_ptr = make_model(u);
        StepModel& model = *model_ptr;
        const TreeScores tree = enumerate_tree(model, trie);
        const ScoredList exact = top_k_of(tree.item_log_prob, max_k);
        UserSweep& out = per_user[u];
        for (std::size_t b : beam_sizes) {
            const ScoredList beam = beam_search(model, trie, {.beam_size = b, .top_k = max_k});
            std::vector<std::size_t> inter_row, adm_row;
            for (std::size_t k : top_ks) {
                std::set<ItemIndex> beam_items;
                for (std::size_t r = 0; r < std::min(k, beam.size()); ++r) {
                    beam_items.insert(beam.entries[r].item);
                }
                std::size_t inter = 0;
                std::size_t adm = 0;
                for (std::size_t r = 0; r < std::min(k, exact.size()); ++r) {
                    const ItemIndex item = exact.entries[r].item;
                    inter += beam_items.count(item);
                    const auto& ranks = tree.rank_profile[item];
                    adm += std::all_of(ranks.begin(), ranks.end(), [&](std::uint32_t x) { return x <= b; }) ? 1 : 0;
                }
                inter_row.push_back(inter);
                adm_row.push_back(adm);
            }
            out.intersect.push_back(std::move(inter_row));
            out.admissible.push_back(std::move(adm_row));
        }
        if (!targets.empty()) {
            if (targets[u] >= tree.rank_profile.size()) {
                throw InputError("target item " + std::to_string(targets[u]) + " not in the trie");
            }
            out.target_ranks = tree.rank_profile[targets[u]];
        }
    });

    BeamSweep sweep;
    sweep.beam_sizes = beam_sizes;
    sweep.top_ks = top_ks;
    for (std::size_t bi = 0; bi < beam_sizes.size(); ++bi) {
        std::vector<SweepCell> row;
        for (std::size_t ki = 0; ki < top_ks.size(); ++ki) {
            SweepCell cell;
            const double k = static_cast<double>(top_ks[ki]);
            cell.overlap.beam_size = cell.bound.beam_size = beam_sizes[bi];
            cell.overlap.top_k = cell.bound.top_k = top_ks[ki];
            for (const auto& u : per_user) {
                cell.overlap.per_user.push_back(static_cast<double>(u.intersect[bi][ki]) / k);
                cell.bound.per_user.push_back(static_cast<double>(u.admissible[bi][ki]) / k);
                cell.overlap.intersect_total += u.intersect[bi][ki];
                cell.bound.admissible_total += u.admissible[bi][ki];
            }
            cell.overlap.mean = mean_of(cell.overlap.per_user);
            cell.bound.theorem1_upper = mean_of(cell.bound.per_user);
            cell.theorem1_holds = cell.overlap.intersect_total <= cell.bound.admissible_total;
            row.push_back(std::move(cell));
        }
        sweep.cells.push_back(std::move(row));
        if (!targets.empty()) {
            std::vector<std::vector<std::uint32_t>> ranks;
            ranks.reserve(per_user.size());
            for (const auto& u : per_user) {
                ranks.push_back(u.target_ranks);
            }
            SweepMarginals m;
            m.targets = marginal_q_from_ranks(ranks, beam_sizes[bi]);
            m.union_lower = union_lower_bound(m.targets.q);
            // n * (1 - sum_l (1 - q_l)) <= J  <=>  n + sum_l c_l <= J + L n, in integers.
            const std::size_t n = m.targets.users;
            const std::size_t lhs = n + std::accumulate(m.targets.level_counts.begin(),
                                                        m.targets.level_counts.end(), std::size_t{0});
            const std::size_t rhs = m.targets.joint_count + m.targets.level_counts.size() * n;
            m.union_holds = lhs <= rhs;
            sweep.marginals.push_back(std::move(m));
        }
    }
    return sweep;
}

OverlapReport
measure_overlap(const ModelParams& params,
                const PrefixTrie& trie,
                const std::vector<TokenSeq>& contexts,
                std::size_t beam_size,
                std::size_t k,
                std::size_t threads) {
    return run_beam_sweep(params, trie, contexts, {}, {beam_size}, {k}, threads).cells[0][0].overlap;
}

BoundEstimate
theorem1_upper_bound(const ModelParams& params,
                     const PrefixTrie& trie,
                     const std::vector<TokenSeq>& contexts,
                     std::size_t beam_size,
                     std::size_t k,
                     std::size_t threads) {
    return run_beam_sweep(params, trie, contexts, {}, {beam_size}, {k}, threads).cells[0][0].bound;
}

MarginalEstimate
estimate_marginal_q(const ModelParams& params,
                    const PrefixTrie& trie,
                    const std::vector<TokenSeq>& contexts,
                    std::span<const ItemIndex> targets,
                    std::size_t beam_size,
                    std::size_t threads) {
    if (targets.size() != contexts.size()) {
        throw InputError("one target per user required");
    }
    std::vector<std::vector<std::uint32_t>> ranks(contexts.size());
    parallel_for(contexts.size(), threads, [&](std::size_t u) {
        TransformerStepModel model(params, contexts[u]);
        ranks[u] = rank_profile(model, trie, targets[u]);
    });
    return marginal_q_from_ranks(ranks, beam_size);
}

// ---------------------------------------------------------------------------
// Marginal-product shift

namespace {

std::size_t
grid_size(std::span<const std::size_t> vocab) {
    std::size_t n = 1;
    for (auto v : vocab) {
        if (v == 0) {
            throw InputError("empty vocabulary in joint distribution");
        }
        n *= v;
    }
    return n;
}

}  // namespace

std::vector<double>
product_of_marginals(std::span<const double> p_star, std::span<const std::size_t> vocab) {
    const std::size_t n = grid_size(vocab);
    if (p_star.size() != n) {
        throw InputError("joint table size does not match the vocabulary grid");
    }
    CompensatedSum total;
    for (double p : p_star) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw InputError("joint table has a negative or non-finite entry");
        }
        total.add(p);
    }
    if (std::abs(total.value() - 1.0) > 1e-9) {
        throw InputError("joint table does not sum to 1");
    }
    const std::size_t L = vocab.size();
    std::vector<std::vector<double>> marg(L);
    for (std::size_t l = 0; l < L; ++l) {
        marg[l].assign(vocab[l], 0.0);
    }
    std::vector<std::size_t> digits(L);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t rest = s;
        for (std::size_t l = L; l-- > 0;) {
            digits[l] = rest % vocab[l];
            rest /= vocab[l];
        }
        for (std::size_t l = 0; l < L; ++l) {
            marg[l][digits[l]] += p_star[s];
        }
    }
    std::vector<double> out(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t rest = s;
        double p = 1.0;
        for (std::size_t l = L; l-- > 0;) {
            p *= marg[l][rest % vocab[l]];
            rest /= vocab[l];
        }
        out[s] = p;
    }
    return out;
}

double
chi_square(std::span<const double> p_star, std::span<const double> p_tilde) {
    if (p_star.size() != p_tilde.size()) {
        throw InputError("chi_square: size mismatch");
    }
    CompensatedSum s;
    for (std::size_t i = 0; i < p_star.size(); ++i) {
        const double diff = p_tilde[i] - p_star[i];
        if (p_star[i] <= 0.0) {
            if (diff != 0.0) {
                throw DomainError("chi_square: p* is zero where the approximation is not");
            }
            continue;
        }
        s.add(diff * diff / p_star[i]);
    }
    return s.value();
}

ShiftReport
verify_theorem2(const DistributionPair& pair) {
    const std::size_t n = pair.p_star.size();
    if (pair.p_tilde.size() != n || pair.item_map.size() != n) {
        throw InputError("distribution pair: inconsistent sizes");
    }
    if (pair.item_count == 0) {
        throw InputError("distribution pair: no items");
    }
    ShiftReport r;
    r.chi_square = chi_square(pair.p_star, pair.p_tilde);
    std::vector<CompensatedSum> ps(pair.item_count), pt(pair.item_count);
    for (std::size_t s = 0; s < n; ++s) {
        if (pair.item_map[s] >= pair.item_count) {
            throw InputError("distribution pair: item index out of range");
        }
        ps[pair.item_map[s]].add(pair.p_star[s]);
        pt[pair.item_map[s]].add(pair.p_tilde[s]);
    }
    std::vector<double> p_item(pair.item_count), q_item(pair.item_count);
    for (std::size_t i = 0; i < pair.item_count; ++i) {
        p_item[i] = ps[i].value();
        q_item[i] = pt[i].value();
    }
    r.per_item_terms.resize(pair.item_count);
    CompensatedSum total;
    for (std::size_t i = 0; i < pair.item_count; ++i) {
        const double diff = q_item[i] - p_item[i];
        if (p_item[i] <= 0.0) {
            if (diff != 0.0) {
                throw DomainError("item with zero true probability receives mass");
            }
            r.per_item_terms[i] = 0.0;
        } else {
            r.per_item_terms[i] = diff * diff / p_item[i];
        }
        total.add(r.per_item_terms[i]);
        if (r.per_item_terms[i] > r.max_term) {
            r.max_term = r.per_item_terms[i];
            r.witness_item = static_cast<ItemIndex>(i);
        }
    }
    r.item_chi_square = total.value();
    r.bound = r.chi_square / static_cast<double>(pair.item_count);
    r.holds = r.max_term >= r.bound;
    r.grouped_holds = r.item_chi_square <= r.chi_square * (1.0 + 1e-12);
    return r;
}

DistributionPair
random_distribution_pair(std::mt19937_64& rng, std::size_t levels, std::size_t vocab, bool many_to_one) {
    DistributionPair pair;
    pair.vocab.assign(levels, vocab);
    const std::size_t n = grid_size(pair.vocab);
    std::exponential_distribution<double> gamma1(1.0);
    pair.p_star.resize(n);
    double z = 0.0;
    for (double& p : pair.p_star) {
        do {
            p = gamma1(rng);
        } while (!(p > 0.0));
        z += p;
    }
    for (double& p : pair.p_star) {
        p /= z;
    }
    pair.p_tilde = product_of_marginals(pair.p_star, pair.vocab);
    pair.item_map.resize(n);
    if (!many_to_one || n < 3) {
        std::iota(pair.item_map.begin(), pair.item_map.end(), ItemIndex{0});
        std::shuffle(pair.item_map.begin(), pair.item_map.end(), rng);
        pair.item_count = n;
        return pair;
    }
    pair.item_count = std::uniform_int_distribution<std::size_t>(2, n - 1)(rng);
    std::uniform_int_distribution<ItemIndex> pick(0, static_cast<ItemIndex>(pair.item_count - 1));
    for (std::size_t s = 0; s < n; ++s) {
        pair.item_map[s] = s < pair.item_count ? static_cast<ItemIndex>(s) : pick(rng);
    }
    std::shuffle(pair.item_map.begin(), pair.item_map.end(), rng);
    return pair;
}

Theorem2Sweep
theorem2_sweep(std::uint64_t seed, std::size_t instances, bool many_to_one) {
    auto rng = make_stream(seed, many_to_one ? "theorem2.many" : "theorem2.bijective");
    Theorem2Sweep out;
    out.worst_ratio = std::numeric_limits<double>::infinity();
    std::uniform_int_distribution<std::size_t> level_pick(2, 3);
    std::uniform_int_distribution<std::size_t> vocab_pick(2, 4);
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t levels = level_pick(rng);
        const std::size_t vocab = vocab_pick(rng);
        const auto pair = random_distribution_pair(rng, levels, vocab, many_to_one);
        const auto r = verify_theorem2(pair);
        ++out.instances;
        out.violations += r.holds ? 0 : 1;
        out.grouped_violations += r.grouped_holds ? 0 : 1;
        if (r.bound > 0.0) {
            out.worst_ratio = std::min(out.worst_ratio, r.max_term / r.bound);
        }
    }
    return out;
}

}  // namespace semdec
