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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semdec/common.hpp"

namespace semdec {

/// Row-major item latent vectors (one row per item).
class ItemVectors {
public:
    ItemVectors() = default;
    /// Validates shape and finiteness; throws InputError otherwise.
    explicit ItemVectors(Matrix data);

    std::size_t
    count() const noexcept {
        return data_.rows();
    }
    std::size_t
    dim() const noexcept {
        return data_.cols();
    }
    std::span<const double>
    row(std::size_t i) const {
        return data_.row(i);
    }
    const Matrix&
    matrix() const noexcept {
        return data_;
    }

private:
    Matrix data_;
};

/// One centroid matrix (codebook_size x dim) per quantization level.
struct Codebooks {
    std::vector<Matrix> centroids;

    std::size_t
    levels() const noexcept {
        return centroids.size();
    }
    std::size_t
    codebook_size() const noexcept {
        return centroids.empty() ? 0 : centroids.front().rows();
    }
    std::size_t
    dim() const noexcept {
        return centroids.empty() ? 0 : centroids.front().cols();
    }
};

struct KMeansOptions {
    std::size_t levels = 4;
    std::size_t codebook_size = 16;
    std::size_t iters = 25;
    /// Independent seeded initialisations per level; the lowest-SSE run wins.
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
};

/// Residual k-means. Level l is fitted on the residuals left after subtracting
/// the nearest centroids of levels < l.
Codebooks
fit_residual_codebooks(const ItemVectors& vectors, const KMeansOptions& opts);

/// Index of the nearest centroid (lowest index on ties).
std::size_t
nearest_centroid(const Matrix& centroids, std::span<const double> x);

/// Sum over items of the squared norm of the residual after all levels.
double
quantization_error(const ItemVectors& vectors, const Codebooks& books);

/// Item -> fixed-length token sequence. The last position is the dedup level.
struct SemanticIdTable {
    std::vector<TokenSeq> ids;
    std::vector<std::size_t> level_vocab_sizes;

    std::size_t
    item_count() const noexcept {
        return ids.size();
    }
    /// Sequence length including the dedup position.
    std::size_t
    length() const noexcept {
        return level_vocab_sizes.size();
    }
};

/// Nearest-centroid tokens per level plus one trailing dedup token that
/// numbers items sharing the same semantic prefix 0,1,2,... in item order.
SemanticIdTable
assign_semantic_ids(const ItemVectors& vectors, const Codebooks& books);

/// Throws IntegrityError if two items share a full sequence or a token is out
/// of its level's range.
void
validate_table(const SemanticIdTable& table);

/// Trie over semantic-ID sequences. Node 0 is the root; every leaf sits at
/// depth() and maps to exactly one item.
class PrefixTrie {
public:
    using NodeId = std::uint32_t;
    static constexpr NodeId kRoot = 0;

    struct Child {
        Token token;
        NodeId node;
    };

    std::size_t
    depth() const noexcept {
        return depth_;
    }
    std::size_t
    node_count() const noexcept {
        return nodes_.size();
    }
    std::size_t
    leaf_count() const noexcept {
        return leaf_count_;
    }

    /// Children sorted by token.
    std::span<const Child>
    children(NodeId node) const {
        return nodes_[node].children;
    }
    bool
    is_leaf(NodeId node) const {
        return nodes_[node].item >= 0;
    }
    ItemIndex
    leaf_item(NodeId node) const;

    std::optional<NodeId>
    child(NodeId node, Token token) const;

    /// Node reached by following prefix from the root; LookupError if absent.
    NodeId
    find(std::span<const Token> prefix) const;

    /// Leaf for a full sequence; LookupError if absent.
    ItemIndex
    item_for(std::span<const Token> sequence) const;

    /// Full sequence of an item; LookupError if the item is not in the trie.
    const TokenSeq&
    sequence_of(ItemIndex item) const;

private:
    friend PrefixTrie build_prefix_trie(const SemanticIdTable& table);

    struct Node {
        std::vector<Child> children;
        std::int64_t item = -1;
    };

    std::vector<Node> nodes_;
    std::vector<TokenSeq> sequences_;
    std::size_t depth_ = 0;
    std::size_t leaf_count_ = 0;
};

PrefixTrie
build_prefix_trie(const SemanticIdTable& table);

/// Child tokens of the node reached by prefix, ascending.
std::vector<Token>
valid_next_tokens(const PrefixTrie& trie, std::span<const Token> prefix);

}  // namespace semdec
