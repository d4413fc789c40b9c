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

#include "semdec/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "semdec/rng.hpp"
#include "semdec/simd.hpp"

namespace semdec {

ItemVectors::ItemVectors(Matrix data) : data_(std::move(data)) {
    if (data_.rows() == 0 || data_.cols() == 0) {
        throw InputError("item vectors: need at least one item and one dimension");
    }
    for (std::size_t i = 0; i < data_.rows(); ++i) {
        for (double v : data_.row(i)) {
            if (!std::isfinite(v)) {
                throw InputError("item vectors: non-finite entry in row " + std::to_string(i));
            }
        }
    }
}

std::size_t
nearest_centroid(const Matrix& centroids, std::span<const double> x) {
    const auto& k = simd::active();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = k.squared_distance(centroids.row(c).data(), x.data(), x.size());
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

namespace {

struct KMeansRun {
    Matrix centroids;
    double sse = 0.0;
};

// Assigns every row, returns SSE and fills per-row distance.
double
assign_all(const Matrix& data,
           const Matrix& centroids,
           std::vector<std::size_t>& assign,
           std::vector<double>& dist) {
    const auto& k = simd::active();
    CompensatedSum sse;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const std::size_t c = nearest_centroid(centroids, data.row(i));
        assign[i] = c;
        dist[i] = k.squared_distance(centroids.row(c).data(), data.row(i).data(), data.cols());
        sse.add(dist[i]);
    }
    return sse.value();
}

KMeansRun
lloyd(const Matrix& data, std::size_t k, std::size_t iters, std::mt19937_64& rng) {
    const std::size_t n = data.rows();
    const std::size_t dim = data.cols();

    // Seeded sample of k distinct row indices (partial Fisher-Yates).
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    KMeansRun run{Matrix(k, dim), 0.0};
    for (std::size_t c = 0; c < k; ++c) {
        std::copy_n(data.row(idx[c]).begin(), dim, run.centroids.row(c).begin());
    }

    std::vector<std::size_t> assign(n, 0);
    std::vector<std::size_t> previous(n, std::numeric_limits<std::size_t>::max());
    std::vector<double> dist(n, 0.0);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < iters; ++it) {
        assign_all(data, run.centroids, assign, dist);
        if (assign == previous) {
            break;
        }
        previous = assign;

        Matrix sums(k, dim);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            simd::axpy(1.0, data.row(i), sums.row(assign[i]));
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed on the point farthest from its centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (dist[i] > dist[far]) {
                        far = i;
                    }
                }
                std::copy_n(data.row(far).begin(), dim, run.centroids.row(c).begin());
                dist[far] = -1.0;
                continue;
            }
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (std::size_t j = 0; j < dim; ++j) {
                run.centroids(c, j) = sums(c, j) * inv;
            }
        }
    }
    run.sse = assign_all(data, run.centroids, assign, dist);
    return run;
}

}  // namespace

Codebooks
fit_residual_codebooks(const ItemVectors& vectors, const KMeansOptions& opts) {
    if (vectors.count() == 0) {
        throw InputError("fit_residual_codebooks: empty item set");
    }
    if (opts.levels == 0 || opts.codebook_size == 0) {
        throw InputError("fit_residual_codebooks: levels and codebook_size must be >= 1");
    }
    if (opts.codebook_size > vectors.count()) {
        throw InputError("fit_residual_codebooks: codebook_size " +
                         std::to_string(opts.codebook_size) + " exceeds item count " +
                         std::to_string(vectors.count()));
    }
    if (opts.iters == 0) {
        throw InputError("fit_residual_codebooks: iters must be >= 1");
    }

    Matrix residual = vectors.matrix();
    Codebooks books;
    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    for (std::size_t level = 0; level < opts.levels; ++level) {
        KMeansRun best;
        best.sse = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < restarts; ++r) {
            auto rng = make_stream(opts.seed, "kmeans", level * 1'000'003ULL + r);
            KMeansRun run = lloyd(residual, opts.codebook_size, opts.iters, rng);
            if (run.sse < best.sse) {
                best = std::move(run);
            }
        }
        for (std::size_t i = 0; i < residual.rows(); ++i) {
            const std::size_t c = nearest_centroid(best.centroids, residual.row(i));
            simd::axpy(-1.0, best.centroids.row(c), residual.row(i));
        }
        books.centroids.push_back(std::move(best.centroids));
    }
    return books;
}

double
quantization_error(const ItemVectors& vectors, const Codebooks& books) {
    CompensatedSum total;
    std::vector<double> r(vectors.dim());
    for (std::size_t i = 0; i < vectors.count(); ++i) {
        std::copy(vectors.row(i).begin(), vectors.row(i).end(), r.begin());
        for (const Matrix& level : books.centroids) {
            const std::size_t c = nearest_centroid(level, r);
            simd::axpy(-1.0, level.row(c), r);
        }
        total.add(simd::dot(r, r));
    }
    return total.value();
}

SemanticIdTable
assign_semantic_ids(const ItemVectors& vectors, const Codebooks& books) {
    if (books.levels() == 0) {
        throw InputError("assign_semantic_ids: codebooks have no levels");
    }
    if (books.dim() != vectors.dim()) {
        throw InputError("assign_semantic_ids: vector dim " + std::to_string(vectors.dim()) +
                         " != centroid dim " + std::to_string(books.dim()));
    }
    const std::size_t levels = books.levels();
    SemanticIdTable table;
    table.ids.resize(vectors.count());
    std::vector<double> r(vectors.dim());
    std::map<TokenSeq, Token> next_dedup;
    Token max_dedup = 0;
    for (std::size_t i = 0; i < vectors.count(); ++i) {
        std::copy(vectors.row(i).begin(), vectors.row(i).end(), r.begin());
        TokenSeq& seq = table.ids[i];
        seq.reserve(levels + 1);
        for (const Matrix& level : books.centroids) {
            const std::size_t c = nearest_centroid(level, r);
            seq.push_back(static_cast<Token>(c));
            simd::axpy(-1.0, level.row(c), r);
        }
        Token& counter = next_dedup[seq];
        seq.push_back(counter);
        max_dedup = std::max(max_dedup, counter);
        ++counter;
    }
    for (const Matrix& level : books.centroids) {
        table.level_vocab_sizes.push_back(level.rows());
    }
    table.level_vocab_sizes.push_back(static_cast<std::size_t>(max_dedup) + 1);
    return table;
}

void
validate_table(const SemanticIdTable& table) {
    std::map<TokenSeq, std::size_t> seen;
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        const TokenSeq& seq = table.ids[i];
        if (seq.size() != table.length()) {
            throw IntegrityError("semantic id of item " + std::to_string(i) + " has length " +
                                 std::to_string(seq.size()) + ", expected " +
                                 std::to_string(table.length()));
        }
        for (std::size_t l = 0; l < seq.size(); ++l) {
            if (seq[l] >= table.level_vocab_sizes[l]) {
                throw IntegrityError("semantic id of item " + std::to_string(i) + ": token " +
                                     std::to_string(seq[l]) + " out of range at level " +
                                     std::to_string(l));
            }
        }
        auto [it, inserted] = seen.emplace(seq, i);
        if (!inserted) {
            throw IntegrityError("items " + std::to_string(it->second) + " and " +
                                 std::to_string(i) + " share a semantic id");
        }
    }
}

ItemIndex
PrefixTrie::leaf_item(NodeId node) const {
    if (node >= nodes_.size() || nodes_[node].item < 0) {
        throw LookupError("trie node " + std::to_string(node) + " is not a leaf");
    }
    return static_cast<ItemIndex>(nodes_[node].item);
}

std::optional<PrefixTrie::NodeId>
PrefixTrie::child(NodeId node, Token token) const {
    const auto& ch = nodes_[node].children;
    auto it = std::lower_bound(ch.begin(), ch.end(), token,
                               [](const Child& c, Token t) { return c.token < t; });
    if (it == ch.end() || it->token != token) {
        return std::nullopt;
    }
    return it->node;
}

PrefixTrie::NodeId
PrefixTrie::find(std::span<const Token> prefix) const {
    if (nodes_.empty()) {
        throw LookupError("trie is empty");
    }
    NodeId node = kRoot;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        auto next = child(node, prefix[i]);
        if (!next) {
            throw LookupError("prefix not in trie (token " + std::to_string(prefix[i]) +
                              " at position " + std::to_string(i) + ")");
        }
        node = *next;
    }
    return node;
}

ItemIndex
PrefixTrie::item_for(std::span<const Token> sequence) const {
    if (sequence.size() != depth_) {
        throw LookupError("sequence length " + std::to_string(sequence.size()) +
                          " != trie depth " + std::to_string(depth_));
    }
    return leaf_item(find(sequence));
}

const TokenSeq&
PrefixTrie::sequence_of(ItemIndex item) const {
    if (item >= sequences_.size()) {
        throw LookupError("item " + std::to_string(item) + " not in trie");
    }
    return sequences_[item];
}

PrefixTrie
build_prefix_trie(const SemanticIdTable& table) {
    PrefixTrie trie;
    trie.depth_ = table.length();
    trie.nodes_.emplace_back();
    trie.sequences_ = table.ids;
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        const TokenSeq& seq = table.ids[i];
        if (seq.size() != trie.depth_) {
            throw IntegrityError("item " + std::to_string(i) + " has a sequence of length " +
                                 std::to_string(seq.size()));
        }
        PrefixTrie::NodeId node = PrefixTrie::kRoot;
        for (Token t : seq) {
            auto& ch = trie.nodes_[node].children;
            auto it = std::lower_bound(ch.begin(), ch.end(), t,
                                       [](const PrefixTrie::Child& c, Token x) { return c.token < x; });
            if (it != ch.end() && it->token == t) {
                node = it->node;
                continue;
            }
            const auto created = static_cast<PrefixTrie::NodeId>(trie.nodes_.size());
            ch.insert(it, PrefixTrie::Child{t, created});
            trie.nodes_.emplace_back();
            node = created;
        }
        if (trie.nodes_[node].item >= 0) {
            throw IntegrityError("items " + std::to_string(trie.nodes_[node].item) + " and " +
                                 std::to_string(i) + " share a semantic id");
        }
        trie.nodes_[node].item = static_cast<std::int64_t>(i);
        ++trie.leaf_count_;
    }
    return trie;
}

std::vector<Token>
valid_next_tokens(const PrefixTrie& trie, std::span<const Token> prefix) {
    const auto node = trie.find(prefix);
    std::vector<Token> out;
    for (const auto& c : trie.children(node)) {
        out.push_back(c.token);
    }
    return out;
}

}  // namespace semdec
