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

#include "semdec/simgr.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "semdec/simd.hpp"

namespace semdec {

namespace {

void
require_finite(std::span<const double> h) {
    for (double v : h) {
        if (!std::isfinite(v)) {
            throw InputError("non-finite hidden state");
        }
    }
}

void
require_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InputError("temperature must be finite and > 0");
    }
}

double
norm(std::span<const double> x) {
    return std::sqrt(simd::dot(x, x));
}

// Scaled similarities <h', y'_i>/tau where primes denote optional unit
// normalisation.
std::vector<double>
logits(std::span<const double> h, const ItemMatrix& items, double tau, bool cosine) {
    std::vector<double> out(items.item_count());
    simd::matvec(items.rows.data(), h, out);
    double hn = cosine ? norm(h) : 1.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = out[i];
        if (cosine) {
            const double yn = norm(items.rows.row(i));
            s = (hn > 0.0 && yn > 0.0) ? s / (hn * yn) : 0.0;
        }
        out[i] = s / tau;
    }
    return out;
}

// d/dx of x/|x| applied to upstream g: (g - u <u, g>) / |x|.
void
unit_backward(std::span<const double> x, std::span<const double> g, double weight, std::span<double> out) {
    const double n = norm(x);
    if (n == 0.0) {
        return;
    }
    const double ug = simd::dot(x, g) / (n * n);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] += weight * (g[i] - x[i] * ug) / n;
    }
}

}  // namespace

Matrix
item_token_matrix(const ModelParams& params, const TokenSeq& ids) {
    const auto& cfg = params.config();
    const std::size_t L = cfg.aggregated_tokens();
    if (ids.size() < L) {
        throw InputError("semantic id shorter than the pooled token count");
    }
    const Matrix& emb = params.block(params.layout().token_embeddings);
    Matrix out(L, cfg.dim);
    for (std::size_t l = 0; l < L; ++l) {
        const auto src = emb.row(global_token(cfg, l, ids[l]));
        std::copy(src.begin(), src.end(), out.row(l).begin());
    }
    return out;
}

ItemMatrix
materialize_items(const ModelParams& params, const SemanticIdTable& table, std::size_t stamp) {
    const auto w = params.aggregator_weights();
    ItemMatrix out{Matrix(table.item_count(), params.config().dim), stamp};
    for (std::size_t i = 0; i < table.item_count(); ++i) {
        const auto y = aggregate_item(item_token_matrix(params, table.ids[i]), w);
        std::copy(y.begin(), y.end(), out.rows.row(i).begin());
    }
    return out;
}

std::vector<double>
score_all_items(std::span<const double> h, const ItemMatrix& items, double tau, bool cosine) {
    require_tau(tau);
    require_finite(h);
    if (h.size() != items.rows.cols()) {
        throw InputError("hidden state width does not match the item matrix");
    }
    return softmax(logits(h, items, tau, cosine));
}

double
simgr_loss_accumulate(std::span<const double> h,
                      const ItemMatrix& items,
                      ItemIndex target,
                      double tau,
                      bool cosine,
                      double weight,
                      std::span<double> grad_h,
                      Matrix* grad_items) {
    if (target >= items.item_count()) {
        throw InputError("target item " + std::to_string(target) + " out of range");
    }
    const auto p = score_all_items(h, items, tau, cosine);
    const auto lp = log_softmax(logits(h, items, tau, cosine));
    const std::size_t d = h.size();

    // dlogit_i = p_i - [i == target]; logit_i = <h', y'_i>/tau.
    std::vector<double> hu(h.begin(), h.end());
    const double hn = norm(h);
    if (cosine && hn > 0.0) {
        for (double& v : hu) {
            v /= hn;
        }
    }
    std::vector<double> dhu(d, 0.0);
    std::vector<double> yu(d), dyu(d);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = (p[i] - (i == target ? 1.0 : 0.0)) / tau;
        if (g == 0.0) {
            continue;
        }
        const auto y = items.rows.row(i);
        if (!cosine) {
            simd::axpy(g, y, dhu);
            if (grad_items != nullptr) {
                simd::axpy(weight * g, hu, grad_items->row(i));
            }
            continue;
        }
        const double yn = norm(y);
        if (yn == 0.0 || hn == 0.0) {
            continue;
        }
        for (std::size_t k = 0; k < d; ++k) {
            yu[k] = y[k] / yn;
            dyu[k] = g * hu[k];
        }
        simd::axpy(g, yu, dhu);
        if (grad_items != nullptr) {
            unit_backward(y, dyu, weight, grad_items->row(i));
        }
    }
    if (cosine) {
        unit_backward(h, dhu, weight, grad_h);
    } else {
        simd::axpy(weight, dhu, grad_h);
    }
    return -lp[target];
}

SimGRLoss
simgr_loss(std::span<const double> h, const ItemMatrix& items, ItemIndex target, double tau, bool cosine) {
    SimGRLoss out{0.0, std::vector<double>(h.size(), 0.0), Matrix(items.item_count(), items.rows.cols())};
    out.loss = simgr_loss_accumulate(h, items, target, tau, cosine, 1.0, out.grad_h, &out.grad_items);
    return out;
}

ScoredList
simgr_topk(const ModelParams& params, const ItemMatrix& items, std::span<const Token> context, std::size_t k) {
    const auto h = encode(params, context);
    const auto& s = params.config().simgr;
    const auto p = score_all_items(h, items, s.tau, s.cosine);
    std::vector<ScoredItem> all(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        all[i] = {static_cast<ItemIndex>(i), p[i]};
    }
    rank_and_truncate(all, k);
    return {std::move(all)};
}

ScoredList
simgr_topk(const ModelParams& params,
           const SemanticIdTable& table,
           std::span<const Token> context,
           std::size_t k) {
    return simgr_topk(params, materialize_items(params, table), context, k);
}

}  // namespace semdec
