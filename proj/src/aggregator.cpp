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

#include "semdec/aggregator.hpp"

#include <cmath>
#include <limits>

#include "semdec/simd.hpp"

namespace semdec {

std::string_view
aggregator_name(AggregatorKind kind) noexcept {
    switch (kind) {
        case AggregatorKind::Mean:
            return "mean";
        case AggregatorKind::ConcatProject:
            return "concat_project";
        case AggregatorKind::ProjectPool:
            return "project_pool";
        case AggregatorKind::Gating:
            return "gating";
        case AggregatorKind::CrossAttention:
            return "cross_attention";
    }
    return "mean";
}

AggregatorKind
parse_aggregator(std::string_view name) {
    for (auto k : {AggregatorKind::Mean, AggregatorKind::ConcatProject, AggregatorKind::ProjectPool,
                   AggregatorKind::Gating, AggregatorKind::CrossAttention}) {
        if (aggregator_name(k) == name) {
            return k;
        }
    }
    throw InputError("unknown aggregator '" + std::string(name) + "'");
}

std::vector<std::pair<std::size_t, std::size_t>>
aggregator_block_shapes(AggregatorKind kind, std::size_t tokens, std::size_t dim) {
    switch (kind) {
        case AggregatorKind::Mean:
            return {};
        case AggregatorKind::ConcatProject:
            return {{dim, tokens * dim}};
        case AggregatorKind::ProjectPool:
            return {{dim, dim}};
        case AggregatorKind::Gating:
            return {{1, dim}};
        case AggregatorKind::CrossAttention:
            return {{1, dim}, {dim, dim}};
    }
    return {};
}

std::vector<Matrix>
aggregator_initial_blocks(AggregatorKind kind, std::size_t tokens, std::size_t dim) {
    std::vector<Matrix> out;
    for (auto [r, c] : aggregator_block_shapes(kind, tokens, dim)) {
        out.emplace_back(r, c);
    }
    switch (kind) {
        case AggregatorKind::ConcatProject:
            for (std::size_t l = 0; l < tokens; ++l) {
                for (std::size_t j = 0; j < dim; ++j) {
                    out[0](j, l * dim + j) = 1.0 / static_cast<double>(tokens);
                }
            }
            break;
        case AggregatorKind::ProjectPool:
            for (std::size_t j = 0; j < dim; ++j) {
                out[0](j, j) = 1.0;
            }
            break;
        case AggregatorKind::CrossAttention:
            for (std::size_t j = 0; j < dim; ++j) {
                out[1](j, j) = 1.0;
            }
            break;
        default:
            break;
    }
    return out;
}

namespace {

void
check_weights(const Matrix& tokens, const AggregatorWeights& w) {
    if (tokens.rows() == 0 || tokens.cols() == 0) {
        throw InputError("aggregate_item: need at least one token of width >= 1");
    }
    const auto shapes = aggregator_block_shapes(w.kind, tokens.rows(), tokens.cols());
    const Matrix* blocks[2] = {w.a, w.b};
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (blocks[i] == nullptr || blocks[i]->rows() != shapes[i].first ||
            blocks[i]->cols() != shapes[i].second) {
            throw InputError("aggregate_item: " + std::string(aggregator_name(w.kind)) +
                             " weight block " + std::to_string(i) + " has the wrong shape");
        }
    }
}

// Softmax weights over tokens for Gating (scale 1) and CrossAttention (1/sqrt(d)).
std::vector<double>
token_weights(const Matrix& tokens, std::span<const double> query, double scale) {
    const std::size_t n = tokens.rows();
    std::vector<double> s(n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l) {
        s[l] = simd::dot(query, tokens.row(l)) * scale;
        m = std::max(m, s[l]);
    }
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - m);
        z += v;
    }
    for (double& v : s) {
        v /= z;
    }
    return s;
}

double
attention_scale(std::size_t dim) {
    return 1.0 / std::sqrt(static_cast<double>(dim));
}

}  // namespace

std::vector<double>
aggregate_item(const Matrix& tokens, const AggregatorWeights& w) {
    check_weights(tokens, w);
    const std::size_t n = tokens.rows();
    const std::size_t d = tokens.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> y(d, 0.0);
    switch (w.kind) {
        case AggregatorKind::Mean:
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(1.0, tokens.row(l), y);
            }
            for (double& v : y) {
                v *= inv_n;
            }
            break;
        case AggregatorKind::ConcatProject:
            simd::matvec(w.a->data(), tokens.values(), y);
            break;
        case AggregatorKind::ProjectPool: {
            std::vector<double> mean(d, 0.0);
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(inv_n, tokens.row(l), mean);
            }
            simd::matvec(w.a->data(), mean, y);
            break;
        }
        case AggregatorKind::Gating: {
            const auto p = token_weights(tokens, w.a->row(0), 1.0);
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(p[l], tokens.row(l), y);
            }
            break;
        }
        case AggregatorKind::CrossAttention: {
            const auto p = token_weights(tokens, w.a->row(0), attention_scale(d));
            std::vector<double> pooled(d, 0.0);
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(p[l], tokens.row(l), pooled);
            }
            simd::matvec(w.b->data(), pooled, y);
            break;
        }
    }
    return y;
}

void
aggregate_backward(const Matrix& tokens,
                   const AggregatorWeights& w,
                   std::span<const double> dy,
                   Matrix& dtokens,
                   Matrix* da,
                   Matrix* db) {
    const std::size_t n = tokens.rows();
    const std::size_t d = tokens.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    switch (w.kind) {
        case AggregatorKind::Mean:
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(inv_n, dy, dtokens.row(l));
            }
            break;
        case AggregatorKind::ConcatProject: {
            // y = A x with x = concat(tokens): dA += dy x^T, dx = A^T dy.
            std::span<double> dx(dtokens.data(), n * d);
            for (std::size_t o = 0; o < d; ++o) {
                simd::axpy(dy[o], w.a->row(o), dx);
                if (da != nullptr) {
                    simd::axpy(dy[o], tokens.values(), da->row(o));
                }
            }
            break;
        }
        case AggregatorKind::ProjectPool: {
            std::vector<double> mean(d, 0.0);
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(inv_n, tokens.row(l), mean);
            }
            std::vector<double> dmean(d, 0.0);
            for (std::size_t o = 0; o < d; ++o) {
                simd::axpy(dy[o], w.a->row(o), dmean);
                if (da != nullptr) {
                    simd::axpy(dy[o], mean, da->row(o));
                }
            }
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(inv_n, dmean, dtokens.row(l));
            }
            break;
        }
        case AggregatorKind::Gating: {
            const auto p = token_weights(tokens, w.a->row(0), 1.0);
            std::vector<double> dp(n);
            double mix = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                dp[l] = simd::dot(dy, tokens.row(l));
                mix += p[l] * dp[l];
            }
            for (std::size_t l = 0; l < n; ++l) {
                const double ds = p[l] * (dp[l] - mix);
                simd::axpy(p[l], dy, dtokens.row(l));
                simd::axpy(ds, w.a->row(0), dtokens.row(l));
                if (da != nullptr) {
                    simd::axpy(ds, tokens.row(l), da->row(0));
                }
            }
            break;
        }
        case AggregatorKind::CrossAttention: {
            const double scale = attention_scale(d);
            const auto p = token_weights(tokens, w.a->row(0), scale);
            // y = B pooled, pooled = sum_l p_l x_l.
            std::vector<double> dpooled(d, 0.0);
            std::vector<double> pooled(d, 0.0);
            for (std::size_t l = 0; l < n; ++l) {
                simd::axpy(p[l], tokens.row(l), pooled);
            }
            for (std::size_t o = 0; o < d; ++o) {
                simd::axpy(dy[o], w.b->row(o), dpooled);
                if (db != nullptr) {
                    simd::axpy(dy[o], pooled, db->row(o));
                }
            }
            std::vector<double> dp(n);
            double mix = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                dp[l] = simd::dot(dpooled, tokens.row(l));
                mix += p[l] * dp[l];
            }
            for (std::size_t l = 0; l < n; ++l) {
                const double ds = p[l] * (dp[l] - mix) * scale;
                simd::axpy(p[l], dpooled, dtokens.row(l));
                simd::axpy(ds, w.a->row(0), dtokens.row(l));
                if (da != nullptr) {
                    simd::axpy(ds, tokens.row(l), da->row(0));
                }
            }
            break;
        }
    }
}

}  // namespace semdec
