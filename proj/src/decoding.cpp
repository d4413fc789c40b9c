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

#include "semdec/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "semdec/simd.hpp"

namespace semdec {

// ---------------------------------------------------------------------------
// Models

void
TabularStepModel::set(TokenSeq prefix, std::vector<double> probabilities) {
    table_[std::move(prefix)] = std::move(probabilities);
}

std::vector<double>
TabularStepModel::step_logits(std::span<const Token> prefix) {
    const auto it = table_.find(TokenSeq(prefix.begin(), prefix.end()));
    if (it == table_.end()) {
        throw LookupError("tabular model has no distribution for this prefix");
    }
    std::vector<double> out(it->second.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::log(it->second[i]);
    }
    return out;
}

TabularMarginalModel::TabularMarginalModel(std::vector<std::vector<double>> probabilities) {
    for (auto& level : probabilities) {
        for (double& p : level) {
            p = std::log(p);
        }
    }
    logits_ = std::move(probabilities);
}

std::vector<std::vector<double>>
TabularMarginalModel::marginal_logits() {
    return logits_;
}

TransformerStepModel::TransformerStepModel(const ModelParams& params, std::span<const Token> context)
    : params_(&params), cache_(params), context_len_(context.size()) {
    if (context.empty()) {
        throw InputError("decoding needs a non-empty context");
    }
    for (Token t : context) {
        cache_.push(t);
    }
    pushed_ = context.size();
}

std::vector<double>
TransformerStepModel::step_logits(std::span<const Token> prefix) {
    const auto& cfg = params_->config();
    if (prefix.size() >= cfg.levels()) {
        throw InputError("step_logits: prefix already covers every level");
    }
    std::size_t common = 0;
    while (common < prefix.size() && common < cached_prefix_.size() && prefix[common] == cached_prefix_[common]) {
        ++common;
    }
    cache_.truncate(context_len_ + common);
    for (std::size_t l = common; l < prefix.size(); ++l) {
        cache_.push(global_token(cfg, l, prefix[l]));
        ++pushed_;
    }
    cached_prefix_.assign(prefix.begin(), prefix.end());
    const std::size_t level = prefix.size();
    std::vector<double> out(cfg.level_vocab_sizes[level]);
    const Matrix& emb = params_->block(params_->layout().token_embeddings);
    simd::matvec(emb.row(cfg.level_offset(level)).data(), cache_.hidden(), out);
    return out;
}

TransformerMarginalModel::TransformerMarginalModel(const ModelParams& params, std::span<const Token> context)
    : logits_(parallel_logits(params, context)) {
}

// ---------------------------------------------------------------------------
// Step distributions

namespace {

std::vector<double>
child_log_probs(StepModel& model,
                const PrefixTrie& trie,
                PrefixTrie::NodeId node,
                std::span<const Token> prefix,
                bool renormalize) {
    const auto children = trie.children(node);
    const auto logits = model.step_logits(prefix);
    for (const auto& c : children) {
        if (c.token >= logits.size()) {
            throw InputError("trie token " + std::to_string(c.token) + " outside the model vocabulary");
        }
    }
    std::vector<double> out(children.size());
    if (renormalize) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& c : children) {
            m = std::max(m, logits[c.token]);
        }
        double z = 0.0;
        for (const auto& c : children) {
            z += std::exp(logits[c.token] - m);
        }
        const double lse = m + std::log(z);
        for (std::size_t i = 0; i < children.size(); ++i) {
            out[i] = logits[children[i].token] - lse;
        }
    } else {
        const auto lp = log_softmax(logits);
        for (std::size_t i = 0; i < children.size(); ++i) {
            out[i] = lp[children[i].token];
        }
    }
    return out;
}

// Rank of entry i: 1 + entries with a higher value, or an equal value and a
// smaller index (children are sorted by token).
std::uint32_t
rank_within(const std::vector<double>& lp, std::size_t i) {
    std::uint32_t r = 1;
    for (std::size_t j = 0; j < lp.size(); ++j) {
        if (lp[j] > lp[i] || (lp[j] == lp[i] && j < i)) {
            ++r;
        }
    }
    return r;
}

void
require_items(const PrefixTrie& trie) {
    if (trie.leaf_count() == 0 || trie.node_count() == 0) {
        throw InputError("decoding over an empty trie");
    }
}

}  // namespace

std::vector<double>
step_log_probs(StepModel& model, const PrefixTrie& trie, std::span<const Token> prefix, bool renormalize) {
    return child_log_probs(model, trie, trie.find(prefix), prefix, renormalize);
}

// ---------------------------------------------------------------------------
// Decoders

ScoredList
beam_search(StepModel& model, const PrefixTrie& trie, const BeamConfig& cfg) {
    require_items(trie);
    if (cfg.beam_size == 0 || cfg.top_k == 0) {
        throw InputError("beam size and top-K must be >= 1");
    }
    struct Hyp {
        TokenSeq prefix;
        PrefixTrie::NodeId node;
        double score;
        double last;
    };
    auto better = [](const Hyp& a, const Hyp& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.last != b.last) {
            return a.last > b.last;
        }
        return a.prefix < b.prefix;
    };
    std::vector<Hyp> beams{{{}, PrefixTrie::kRoot, 0.0, 0.0}};
    for (std::size_t level = 0; level < trie.depth(); ++level) {
        std::vector<Hyp> cand;
        for (const auto& h : beams) {
            const auto lp = child_log_probs(model, trie, h.node, h.prefix, cfg.renormalize_over_valid);
            const auto children = trie.children(h.node);
            for (std::size_t i = 0; i < children.size(); ++i) {
                Hyp next{h.prefix, children[i].node, h.score + lp[i], lp[i]};
                next.prefix.push_back(children[i].token);
                cand.push_back(std::move(next));
            }
        }
        const std::size_t keep = std::min(cfg.beam_size, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), better);
        cand.resize(keep);
        beams = std::move(cand);
    }
    std::vector<ScoredItem> out;
    out.reserve(beams.size());
    for (const auto& h : beams) {
        out.push_back({trie.leaf_item(h.node), h.score});
    }
    rank_and_truncate(out, cfg.top_k);
    return {std::move(out)};
}

TreeScores
enumerate_tree(StepModel& model, const PrefixTrie& trie, bool renormalize) {
    require_items(trie);
    TreeScores out;
    out.item_log_prob.assign(trie.leaf_count(), -std::numeric_limits<double>::infinity());
    out.rank_profile.assign(trie.leaf_count(), {});
    TokenSeq prefix;
    std::vector<std::uint32_t> ranks;
    auto visit = [&](auto&& self, PrefixTrie::NodeId node, double score) -> void {
        if (trie.is_leaf(node)) {
            const ItemIndex item = trie.leaf_item(node);
            if (item >= out.item_log_prob.size()) {
                throw InputError("trie item indices are not dense");
            }
            out.item_log_prob[item] = score;
            out.rank_profile[item] = ranks;
            return;
        }
        const auto lp = child_log_probs(model, trie, node, prefix, renormalize);
        const auto children = trie.children(node);
        for (std::size_t i = 0; i < children.size(); ++i) {
            prefix.push_back(children[i].token);
            ranks.push_back(rank_within(lp, i));
            self(self, children[i].node, score + lp[i]);
            ranks.pop_back();
            prefix.pop_back();
        }
    };
    visit(visit, PrefixTrie::kRoot, 0.0);
    return out;
}

ScoredList
top_k_of(const std::vector<double>& scores, std::size_t k) {
    std::vector<ScoredItem> all(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        all[i] = {static_cast<ItemIndex>(i), scores[i]};
    }
    rank_and_truncate(all, k);
    return {std::move(all)};
}

ScoredList
exact_search(StepModel& model, const PrefixTrie& trie, std::size_t k, bool renormalize) {
    return top_k_of(enumerate_tree(model, trie, renormalize).item_log_prob, k);
}

double
sequence_logprob(StepModel& model, const PrefixTrie& trie, std::span<const Token> sequence, bool renormalize) {
    require_items(trie);
    if (sequence.size() != trie.depth()) {
        throw InputError("sequence length does not match the trie depth");
    }
    PrefixTrie::NodeId node = PrefixTrie::kRoot;
    double score = 0.0;
    for (std::size_t l = 0; l < sequence.size(); ++l) {
        const auto children = trie.children(node);
        const auto it = std::find_if(children.begin(), children.end(),
                                     [&](const PrefixTrie::Child& c) { return c.token == sequence[l]; });
        if (it == children.end()) {
            throw InputError("sequence leaves the trie at position " + std::to_string(l));
        }
        const auto lp = child_log_probs(model, trie, node, sequence.first(l), renormalize);
        score = score + lp[static_cast<std::size_t>(it - children.begin())];
        node = it->node;
    }
    return score;
}

std::vector<std::uint32_t>
rank_profile(StepModel& model, const PrefixTrie& trie, ItemIndex item, bool renormalize) {
    const TokenSeq& seq = trie.sequence_of(item);
    std::vector<std::uint32_t> out;
    PrefixTrie::NodeId node = PrefixTrie::kRoot;
    for (std::size_t l = 0; l < seq.size(); ++l) {
        const auto children = trie.children(node);
        const auto it = std::find_if(children.begin(), children.end(),
                                     [&](const PrefixTrie::Child& c) { return c.token == seq[l]; });
        const auto lp = child_log_probs(model, trie, node, std::span<const Token>(seq).first(l), renormalize);
        out.push_back(rank_within(lp, static_cast<std::size_t>(it - children.begin())));
        node = it->node;
    }
    return out;
}

std::vector<double>
parallel_item_scores(MarginalModel& model, const PrefixTrie& trie) {
    require_items(trie);
    const auto logits = model.marginal_logits();
    if (logits.size() != trie.depth()) {
        throw InputError("marginal model level count does not match the trie depth");
    }
    std::vector<std::vector<double>> lm;
    lm.reserve(logits.size());
    for (const auto& l : logits) {
        lm.push_back(log_softmax(l));
    }
    std::vector<double> out(trie.leaf_count(), -std::numeric_limits<double>::infinity());
    auto visit = [&](auto&& self, PrefixTrie::NodeId node, std::size_t level, double score) -> void {
        if (trie.is_leaf(node)) {
            const ItemIndex item = trie.leaf_item(node);
            if (item >= out.size()) {
                throw InputError("trie item indices are not dense");
            }
            out[item] = score;
            return;
        }
        for (const auto& c : trie.children(node)) {
            if (c.token >= lm[level].size()) {
                throw InputError("trie token outside the marginal vocabulary");
            }
            self(self, c.node, level + 1, score + lm[level][c.token]);
        }
    };
    visit(visit, PrefixTrie::kRoot, 0, 0.0);
    return out;
}

ScoredList
parallel_decode(MarginalModel& model, const PrefixTrie& trie, std::size_t k) {
    return top_k_of(parallel_item_scores(model, trie), k);
}

ScoredList
beam_search(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, const BeamConfig& cfg) {
    TransformerStepModel m(params, context);
    return beam_search(m, trie, cfg);
}

ScoredList
exact_search(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, std::size_t k) {
    TransformerStepModel m(params, context);
    return exact_search(m, trie, k);
}

ScoredList
parallel_decode(const ModelParams& params, const PrefixTrie& trie, std::span<const Token> context, std::size_t k) {
    TransformerMarginalModel m(params, context);
    return parallel_decode(m, trie, k);
}

}  // namespace semdec
