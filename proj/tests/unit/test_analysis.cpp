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


#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "semdec/analysis.hpp"

using namespace semdec;

namespace {

ScoredList
list_of(std::vector<ItemIndex> items) {
    ScoredList l;
    double s = 0.0;
    for (auto i : items) {
        l.entries.push_back({i, s});
        s -= 1.0;
    }
    return l;
}

SemanticIdTable
grid_table(Token a, Token b, Token c) {
    SemanticIdTable t;
    t.level_vocab_sizes = {a, b, c};
    for (Token i = 0; i < a; ++i) {
        for (Token j = 0; j < b; ++j) {
            for (Token k = 0; k < c; ++k) {
                t.ids.push_back({i, j, k});
            }
        }
    }
    return t;
}

// The correlated 2x2 joint .4/.1/.1/.4 over sequences aa, ab, ba, bb.
DistributionPair
fixture_pair() {
    DistributionPair p;
    p.vocab = {2, 2};
    p.p_star = {0.4, 0.1, 0.1, 0.4};
    p.p_tilde = product_of_marginals(p.p_star, p.vocab);
    p.item_map = {0, 1, 2, 3};
    p.item_count = 4;
    return p;
}

struct ToyRun {
    SemanticIdTable table = grid_table(4, 4, 4);
    PrefixTrie trie = build_prefix_trie(table);
    ModelParams params;
    std::vector<TokenSeq> contexts;
    std::vector<ItemIndex> targets;

    ToyRun() {
        ModelConfig cfg;
        cfg.dim = 16;
        cfg.level_vocab_sizes = table.level_vocab_sizes;
        cfg.context_len = 16;
        cfg.seed = 21;
        params = ModelParams::initialize(cfg);
        auto st = make_optimizer_state(params);
        std::mt19937_64 rng(3);
        TrainBatch batch;
        for (int u = 0; u < 24; ++u) {
            TrainExample ex;
            ItemIndex cur = static_cast<ItemIndex>(rng() % 64);
            for (int j = 0; j < 4; ++j) {
                ex.items.push_back(cur);
                cur = (cur * 5 + 3) % 64;
            }
            batch.examples.push_back(ex);
        }
        for (int i = 0; i < 40; ++i) {
            train_step(params, st, batch, Objective::Ar, {.lr = 1e-2}, table);
        }
        for (int u = 0; u < 30; ++u) {
            std::vector<ItemIndex> hist{static_cast<ItemIndex>(rng() % 64), static_cast<ItemIndex>(rng() % 64)};
            contexts.push_back(serialize_history(cfg, table, hist));
            targets.push_back((hist.back() * 5 + 3) % 64);
        }
    }
};

}  // namespace

TEST_CASE("overlap counting") {
    CHECK(overlap_at_k(list_of({1, 2, 3}), list_of({1, 2, 3}), 3) == 1.0);
    CHECK(overlap_at_k(list_of({1, 2, 3}), list_of({4, 5, 6}), 3) == 0.0);
    CHECK(overlap_at_k(list_of({1, 2, 3, 4, 5}), list_of({9, 3, 1, 8, 5}), 5) == doctest::Approx(0.6));
    CHECK(overlap_at_k(list_of({1, 2, 3, 4, 5}), list_of({1, 2, 3}), 2) == 1.0);
    CHECK_THROWS_AS(overlap_at_k(list_of({1, 2}), list_of({1, 2, 3}), 3), InputError);
}

TEST_CASE("union lower bound arithmetic") {
    CHECK(union_lower_bound(std::vector<double>{1, 1, 1, 1}) == 1.0);
    CHECK(union_lower_bound(std::vector<double>{0.9, 0.9, 0.9, 0.9}) == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(union_lower_bound(std::vector<double>{0.1, 0.2}) == doctest::Approx(-0.7));
    CHECK_THROWS_AS(union_lower_bound(std::vector<double>{1.2}), InputError);
    CHECK_THROWS_AS(union_lower_bound(std::vector<double>{-0.1}), InputError);
}

TEST_CASE("product of marginals") {
    // Independent joint with dyadic entries reproduces itself exactly.
    const std::vector<double> a{0.25, 0.75};
    const std::vector<double> b{0.5, 0.125, 0.375};
    std::vector<double> joint;
    for (double x : a) {
        for (double y : b) {
            joint.push_back(x * y);
        }
    }
    const std::vector<std::size_t> vocab{2, 3};
    CHECK(product_of_marginals(joint, vocab) == joint);

    const auto fx = fixture_pair();
    double total = 0.0;
    for (double p : fx.p_tilde) {
        CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
        total += p;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);

    const std::vector<double> bad{0.5, 0.4, 0.05, 0.0};
    CHECK_THROWS_AS(product_of_marginals(bad, std::vector<std::size_t>{2, 2}), InputError);
    CHECK_THROWS_AS(product_of_marginals(joint, std::vector<std::size_t>{2, 2}), InputError);
}

TEST_CASE("chi-square arithmetic and domain") {
    const auto fx = fixture_pair();
    const double oracle = 2 * (0.15 * 0.15 / 0.4) + 2 * (0.15 * 0.15 / 0.1);
    CHECK(oracle == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(chi_square(fx.p_star, fx.p_tilde) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(chi_square(fx.p_star, fx.p_star) == 0.0);
    const std::vector<double> zero{0.0, 1.0};
    const std::vector<double> pos{0.5, 0.5};
    CHECK_THROWS_AS(chi_square(zero, pos), DomainError);
    CHECK(chi_square(zero, zero) == 0.0);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_distribution_pair(rng, 2, 3, false);
        CHECK(chi_square(p.p_star, p.p_tilde) >= 0.0);
    }
}

TEST_CASE("item-level shift on the 2x2 fixture") {
    const auto r = verify_theorem2(fixture_pair());
    CHECK(r.chi_square == doctest::Approx(0.5625).epsilon(1e-14));
    CHECK(r.bound == doctest::Approx(0.140625).epsilon(1e-14));
    CHECK(r.max_term == doctest::Approx(0.225).epsilon(1e-14));
    CHECK((r.witness_item == 1 || r.witness_item == 2));
    CHECK(r.holds);
    CHECK(r.grouped_holds);
}

TEST_CASE("item-level shift is zero when the product is exact") {
    auto p = fixture_pair();
    p.p_tilde = p.p_star;
    const auto r = verify_theorem2(p);
    CHECK(r.chi_square == 0.0);
    CHECK(r.bound == 0.0);
    CHECK(r.max_term == 0.0);
    CHECK(r.holds);
}

TEST_CASE("bijective item maps satisfy the per-item bound on every random joint") {
    const auto s = theorem2_sweep(1, 1000, false);
    CHECK(s.instances == 1000);
    CHECK(s.violations == 0);
    CHECK(s.grouped_violations == 0);
    CHECK(s.worst_ratio >= 1.0);
}

TEST_CASE("many-to-one item maps keep the grouped inequality") {
    const auto s = theorem2_sweep(2, 1000, true);
    CHECK(s.grouped_violations == 0);
}

TEST_CASE("a many-to-one item map can hide the whole shift") {
    auto p = fixture_pair();
    p.item_map = {0, 0, 1, 1};  // {aa, ab} -> 0, {ba, bb} -> 1
    p.item_count = 2;
    const auto r = verify_theorem2(p);
    CHECK(r.chi_square == doctest::Approx(0.5625));
    CHECK(r.max_term == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(r.holds);
    CHECK(r.grouped_holds);
}

TEST_CASE("random pairs are strictly positive and normalized") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_distribution_pair(rng, 2 + i % 2, 2 + i % 3, i % 2 == 0);
        double a = 0.0;
        double b = 0.0;
        for (std::size_t s = 0; s < p.p_star.size(); ++s) {
            CHECK(p.p_star[s] > 0.0);
            a += p.p_star[s];
            b += p.p_tilde[s];
        }
        CHECK(std::abs(a - 1.0) <= 1e-12);
        CHECK(std::abs(b - 1.0) <= 1e-12);
        std::vector<int> used(p.item_count, 0);
        for (auto i2 : p.item_map) {
            used[i2] = 1;
        }
        CHECK(std::accumulate(used.begin(), used.end(), 0) == static_cast<int>(p.item_count));
    }
}

TEST_CASE("hand-built model: greedy beam bound is below one and above the overlap") {
    SemanticIdTable t;
    t.level_vocab_sizes = {2, 2};
    t.ids = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const auto trie = build_prefix_trie(t);
    auto factory = [](std::size_t) -> std::unique_ptr<StepModel> {
        auto m = std::make_unique<TabularStepModel>();
        m->set({}, {0.6, 0.4});
        m->set({0}, {0.5, 0.5});
        m->set({1}, {0.9, 0.1});
        return m;
    };
    const std::vector<ItemIndex> targets{2};
    const auto sweep = run_beam_sweep(factory, 1, trie, targets, {1, 2, 4}, {1, 2});
    // K=1: exact top item is ba, whose first token ranks 2nd.
    const auto& b1k1 = sweep.cells[0][0];
    CHECK(b1k1.bound.theorem1_upper == 0.0);
    CHECK(b1k1.overlap.mean == 0.0);
    CHECK(b1k1.theorem1_holds);
    // K=2: exact top-2 is {ba, aa}; only aa is greedy-consistent.
    const auto& b1k2 = sweep.cells[0][1];
    CHECK(b1k2.bound.theorem1_upper == 0.5);
    CHECK(b1k2.overlap.mean <= b1k2.bound.theorem1_upper);
    CHECK(b1k2.overlap.per_user.size() == 1);
    // B = 4 covers every leaf.
    CHECK(sweep.cells[2][0].overlap.mean == 1.0);
    CHECK(sweep.cells[2][1].bound.theorem1_upper == 1.0);
    CHECK(sweep.marginals[0].targets.q == std::vector<double>{0.0, 1.0});
    CHECK(sweep.marginals[1].targets.q == std::vector<double>{1.0, 1.0});
}

TEST_CASE("trained toy model: overlap, bound and marginal estimates") {
    ToyRun run;
    const std::vector<std::size_t> beams{1, 2, 3, 5, 64};
    const std::vector<std::size_t> ks{1, 5, 10};
    const auto sweep = run_beam_sweep(run.params, run.trie, run.contexts, run.targets, beams, ks, 2);
    for (std::size_t b = 0; b < beams.size(); ++b) {
        for (std::size_t k = 0; k < ks.size(); ++k) {
            const auto& c = sweep.cells[b][k];
            CAPTURE(beams[b]);
            CAPTURE(ks[k]);
            CHECK(c.theorem1_holds);
            CHECK(c.overlap.mean <= c.bound.theorem1_upper);
            for (std::size_t u = 0; u < run.contexts.size(); ++u) {
                CHECK(c.overlap.per_user[u] <= c.bound.per_user[u]);
            }
        }
        const auto& m = sweep.marginals[b];
        CHECK(m.union_holds);
        CHECK(m.union_lower <= m.targets.joint_frequency);
    }
    // Saturation: every vocabulary has 4 tokens and there are 64 leaves.
    for (std::size_t k = 0; k < ks.size(); ++k) {
        CHECK(sweep.cells[4][k].overlap.mean == 1.0);
        CHECK(sweep.cells[4][k].bound.theorem1_upper == 1.0);
    }
    CHECK(sweep.marginals[4].targets.q == std::vector<double>{1.0, 1.0, 1.0});

    // Single-call entry points agree with the sweep.
    const auto ov = measure_overlap(run.params, run.trie, run.contexts, 2, 5);
    CHECK(ov.per_user == sweep.cells[1][1].overlap.per_user);
    const auto bd = theorem1_upper_bound(run.params, run.trie, run.contexts, 2, 5);
    CHECK(bd.theorem1_upper == sweep.cells[1][1].bound.theorem1_upper);
    const auto q = estimate_marginal_q(run.params, run.trie, run.contexts, run.targets, 2);
    CHECK(q.q == sweep.marginals[1].targets.q);

    const std::vector<TokenSeq> one{run.contexts[0]};
    CHECK(measure_overlap(run.params, run.trie, one, 3, 5).per_user.size() == 1);
}

TEST_CASE("a user whose target is greedy at every step has q = 1 at B = 1") {
    ToyRun run;
    TransformerStepModel sm(run.params, run.contexts[0]);
    const auto greedy = beam_search(sm, run.trie, {.beam_size = 1, .top_k = 1}).entries[0].item;
    const std::vector<ItemIndex> targets{greedy};
    const std::vector<TokenSeq> ctx{run.contexts[0]};
    const auto q = estimate_marginal_q(run.params, run.trie, ctx, targets, 1);
    CHECK(q.q == std::vector<double>{1.0, 1.0, 1.0});
}
