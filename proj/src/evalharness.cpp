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


#include "semdec/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "semdec/parallel.hpp"

namespace semdec {

SplitDataset
leave_one_out_split(const Interactions& data, const SplitConfig& cfg) {
    if (cfg.min_interactions < 3) {
        throw InputError("leave_one_out_split: min_interactions must be >= 3");
    }
    if (cfg.max_len == 0) {
        throw InputError("leave_one_out_split: max_len must be >= 1");
    }
    if (data.users.size() != data.sequences.size()) {
        throw InputError("leave_one_out_split: users and sequences differ in length");
    }
    if (data.users.empty()) {
        throw InputError("leave_one_out_split: empty dataset");
    }
    SplitDataset out;
    for (std::size_t u = 0; u < data.users.size(); ++u) {
        const auto& seq = data.sequences[u];
        if (seq.size() < cfg.min_interactions) {
            ++out.dropped;
            continue;
        }
        UserSplit s;
        s.user = data.users[u];
        s.test = seq[seq.size() - 1];
        s.validation = seq[seq.size() - 2];
        const std::size_t n_train = seq.size() - 2;
        const std::size_t begin = n_train > cfg.max_len ? n_train - cfg.max_len : 0;
        s.train.assign(seq.begin() + static_cast<std::ptrdiff_t>(begin),
                       seq.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.users.push_back(std::move(s));
    }
    if (out.users.empty()) {
        throw InputError("leave_one_out_split: every user has fewer than " +
                         std::to_string(cfg.min_interactions) + " interactions");
    }
    return out;
}

namespace {

// 1-based rank of target within the first k entries, 0 when absent.
std::size_t
rank_within(const ScoredList& list, ItemIndex target, std::size_t k) {
    const std::size_t n = std::min(k, list.entries.size());
    for (std::size_t r = 0; r < n; ++r) {
        if (list.entries[r].item == target) {
            return r + 1;
        }
    }
    return 0;
}

const ScoredList&
list_for(const UserLists& lists, UserId user) {
    const auto it = lists.find(user);
    if (it == lists.end()) {
        throw InputError("no recommendation list for user " + std::to_string(user));
    }
    return it->second;
}

void
check_targets(const UserTargets& targets, std::size_t k) {
    if (targets.empty()) {
        throw InputError("metrics: no target users");
    }
    if (k == 0) {
        throw InputError("metrics: k must be >= 1");
    }
}

double
ndcg_term(std::size_t rank) {
    return rank == 0 ? 0.0 : 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

}  // namespace

double
hit_rate_at_k(const UserLists& lists, const UserTargets& targets, std::size_t k) {
    check_targets(targets, k);
    std::size_t hits = 0;
    for (const auto& [user, target] : targets) {
        hits += rank_within(list_for(lists, user), target, k) != 0 ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double
ndcg_at_k(const UserLists& lists, const UserTargets& targets, std::size_t k) {
    check_targets(targets, k);
    double sum = 0.0;
    for (const auto& [user, target] : targets) {
        sum += ndcg_term(rank_within(list_for(lists, user), target, k));
    }
    return sum / static_cast<double>(targets.size());
}

double
entropy_at_k(const UserLists& lists,
             const std::vector<std::uint32_t>& categories,
             std::size_t k,
             bool bits) {
    std::map<std::uint32_t, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& [user, list] : lists) {
        const std::size_t n = std::min(k, list.entries.size());
        for (std::size_t r = 0; r < n; ++r) {
            const ItemIndex item = list.entries[r].item;
            if (item >= categories.size()) {
                throw InputError("entropy_at_k: item " + std::to_string(item) + " of user " +
                                 std::to_string(user) + " has no category");
            }
            ++counts[categories[item]];
            ++total;
        }
    }
    if (total == 0) {
        return 0.0;
    }
    double h = 0.0;
    for (const auto& [cat, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return bits ? h / std::log(2.0) : h;
}

double
coverage(const UserLists& lists, std::size_t item_count, std::size_t k) {
    if (item_count == 0) {
        throw InputError("coverage: item_count must be >= 1");
    }
    std::set<ItemIndex> seen;
    for (const auto& [user, list] : lists) {
        const std::size_t n = std::min(k, list.entries.size());
        for (std::size_t r = 0; r < n; ++r) {
            seen.insert(list.entries[r].item);
        }
    }
    return static_cast<double>(seen.size()) / static_cast<double>(item_count);
}

MetricsReport
evaluate(const UserLists& lists,
         const UserTargets& targets,
         const std::vector<std::uint32_t>& categories,
         std::size_t item_count,
         const std::vector<std::size_t>& ks,
         std::size_t threads) {
    if (ks.empty()) {
        throw InputError("evaluate: empty K list");
    }
    const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
    check_targets(targets, std::min<std::size_t>(max_k, *std::min_element(ks.begin(), ks.end())));
    std::vector<std::pair<UserId, ItemIndex>> order(targets.begin(), targets.end());
    std::vector<const ScoredList*> user_lists;
    user_lists.reserve(order.size());
    for (const auto& [user, target] : order) {
        user_lists.push_back(&list_for(lists, user));
    }
    std::vector<std::size_t> ranks(order.size());
    parallel_for(order.size(), threads, [&](std::size_t i) {
        ranks[i] = rank_within(*user_lists[i], order[i].second, max_k);
    });

    MetricsReport rep;
    rep.ks = ks;
    rep.users = order.size();
    rep.item_count = item_count;
    const double n = static_cast<double>(order.size());
    for (std::size_t k : ks) {
        std::size_t hits = 0;
        double dcg = 0.0;
        for (std::size_t r : ranks) {
            if (r != 0 && r <= k) {
                ++hits;
                dcg += ndcg_term(r);
            }
        }
        rep.hr[k] = static_cast<double>(hits) / n;
        rep.ndcg[k] = dcg / n;
        rep.entropy[k] = entropy_at_k(lists, categories, k);
        rep.coverage[k] = coverage(lists, item_count, k);
    }
    return rep;
}

std::string
MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["users"] = users;
    j["item_count"] = item_count;
    j["ks"] = ks;
    auto by_k = [&](const std::map<std::size_t, double>& m) {
        nlohmann::ordered_json o = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m) {
            o[std::to_string(k)] = v;
        }
        return o;
    };
    j["hr"] = by_k(hr);
    j["ndcg"] = by_k(ndcg);
    j["entropy"] = by_k(entropy);
    j["coverage"] = by_k(coverage);
    return j.dump(2) + "\n";
}

std::string
MetricsReport::to_csv() const {
    std::string out = "k,hr,ndcg,entropy,coverage\n";
    char buf[160];
    for (std::size_t k : ks) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", k, hr.at(k), ndcg.at(k),
                      entropy.at(k), coverage.at(k));
        out += buf;
    }
    return out;
}

}  // namespace semdec
