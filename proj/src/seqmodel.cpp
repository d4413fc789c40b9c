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

#include "semdec/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "semdec/rng.hpp"
#include "semdec/simd.hpp"
#include "semdec/simgr.hpp"

namespace semdec {

namespace {

constexpr double kLayerNormEps = 1e-5;

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and parameter layout

std::size_t
ModelConfig::level_offset(std::size_t level) const {
    if (level >= levels()) {
        throw InputError("level " + std::to_string(level) + " out of range");
    }
    return std::accumulate(level_vocab_sizes.begin(), level_vocab_sizes.begin() + level, std::size_t{0});
}

Token
ModelConfig::bos_token() const {
    return static_cast<Token>(
        std::accumulate(level_vocab_sizes.begin(), level_vocab_sizes.end(), std::size_t{0}));
}

std::size_t
ModelConfig::vocab_size() const {
    return static_cast<std::size_t>(bos_token()) + 1;
}

void
ModelConfig::validate() const {
    if (dim == 0 || heads == 0 || context_len == 0 || ff_mult == 0) {
        throw InputError("model config: dim, heads, context_len and ff_mult must be >= 1");
    }
    if (dim % heads != 0) {
        throw InputError("model config: dim " + std::to_string(dim) + " not divisible by heads " +
                         std::to_string(heads));
    }
    if (level_vocab_sizes.empty()) {
        throw InputError("model config: no semantic-id levels");
    }
    for (std::size_t v : level_vocab_sizes) {
        if (v == 0) {
            throw InputError("model config: empty level vocabulary");
        }
    }
    if (!(simgr.tau > 0.0) || !std::isfinite(simgr.tau)) {
        throw InputError("model config: temperature must be finite and > 0");
    }
    if (aggregated_tokens() == 0) {
        throw InputError("model config: aggregator would pool zero tokens");
    }
}

Token
global_token(const ModelConfig& config, std::size_t level, Token local) {
    if (local >= config.level_vocab_sizes.at(level)) {
        throw InputError("token " + std::to_string(local) + " out of range for level " +
                         std::to_string(level));
    }
    return static_cast<Token>(config.level_offset(level) + local);
}

std::size_t
ModelParams::add(std::string name, std::size_t rows, std::size_t cols) {
    names_.push_back(std::move(name));
    blocks_.emplace_back(rows, cols);
    return blocks_.size() - 1;
}

ModelParams::ModelParams(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::size_t d = config_.dim;
    const std::size_t f = d * config_.ff_mult;
    layout_.token_embeddings = add("token_embeddings", config_.vocab_size(), d);
    layout_.position_embeddings = add("position_embeddings", config_.context_len, d);
    for (std::size_t b = 0; b < config_.encoder_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        ParamLayout::Encoder e{};
        e.ln1_g = add(p + "ln1.gain", 1, d);
        e.ln1_b = add(p + "ln1.bias", 1, d);
        e.wq = add(p + "attn.wq", d, d);
        e.wk = add(p + "attn.wk", d, d);
        e.wv = add(p + "attn.wv", d, d);
        e.wo = add(p + "attn.wo", d, d);
        e.ln2_g = add(p + "ln2.gain", 1, d);
        e.ln2_b = add(p + "ln2.bias", 1, d);
        e.w1 = add(p + "ff.w1", f, d);
        e.b1 = add(p + "ff.b1", 1, f);
        e.w2 = add(p + "ff.w2", d, f);
        e.b2 = add(p + "ff.b2", 1, d);
        layout_.encoder.push_back(e);
    }
    if (config_.encoder_blocks > 0) {
        layout_.lnf_g = add("final_ln.gain", 1, d);
        layout_.lnf_b = add("final_ln.bias", 1, d);
    }
    for (std::size_t l = 0; l < config_.levels(); ++l) {
        layout_.heads.push_back(add("parallel_head." + std::to_string(l), config_.level_vocab_sizes[l], d));
    }
    const auto shapes =
        aggregator_block_shapes(config_.simgr.aggregator, config_.aggregated_tokens(), d);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        layout_.aggregator.push_back(add("aggregator." + std::to_string(i), shapes[i].first, shapes[i].second));
    }
}

ModelParams
ModelParams::initialize(const ModelConfig& config) {
    ModelParams p(config);
    const std::size_t d = config.dim;
    auto gaussian = [&](std::size_t block, double stddev) {
        auto rng = make_stream(config.seed, "init", block);
        std::normal_distribution<double> dist(0.0, stddev);
        for (double& v : p.blocks_[block].values()) {
            v = dist(rng);
        }
    };
    const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
    gaussian(p.layout_.token_embeddings, emb_std);
    gaussian(p.layout_.position_embeddings, emb_std);
    for (const auto& e : p.layout_.encoder) {
        p.blocks_[e.ln1_g].fill(1.0);
        p.blocks_[e.ln2_g].fill(1.0);
        for (std::size_t w : {e.wq, e.wk, e.wv, e.wo, e.w1, e.w2}) {
            gaussian(w, 1.0 / std::sqrt(static_cast<double>(p.blocks_[w].cols())));
        }
    }
    if (config.encoder_blocks > 0) {
        p.blocks_[p.layout_.lnf_g].fill(1.0);
    }
    if (!config.zero_init_heads) {
        for (std::size_t h : p.layout_.heads) {
            gaussian(h, emb_std);
        }
    }
    auto agg = aggregator_initial_blocks(config.simgr.aggregator, config.aggregated_tokens(), d);
    for (std::size_t i = 0; i < agg.size(); ++i) {
        p.blocks_[p.layout_.aggregator[i]] = std::move(agg[i]);
    }
    return p;
}

ModelParams
ModelParams::zeros_like(const ModelParams& other) {
    return ModelParams(other.config_);
}

std::size_t
ModelParams::block_index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            return i;
        }
    }
    throw LookupError("no parameter block named '" + std::string(name) + "'");
}

std::size_t
ModelParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks_) {
        n += b.size();
    }
    return n;
}

AggregatorWeights
ModelParams::aggregator_weights() const {
    AggregatorWeights w;
    w.kind = config_.simgr.aggregator;
    if (!layout_.aggregator.empty()) {
        w.a = &blocks_[layout_.aggregator[0]];
    }
    if (layout_.aggregator.size() > 1) {
        w.b = &blocks_[layout_.aggregator[1]];
    }
    return w;
}

Matrix
ar_output_matrix(const ModelParams& params, std::size_t level) {
    const auto& cfg = params.config();
    const std::size_t off = cfg.level_offset(level);
    const std::size_t n = cfg.level_vocab_sizes[level];
    const Matrix& e = params.block(params.layout().token_embeddings);
    Matrix out(n, cfg.dim);
    std::copy_n(e.row(off).data(), n * cfg.dim, out.data());
    return out;
}

// ---------------------------------------------------------------------------
// Forward pass

/// Activations recorded during a forward pass, consumed by the backward pass.
struct EncoderTape {
    struct Block {
        Matrix x_in, xhat1, a, q, o, x_mid, xhat2, bn, u, g, att;
        std::vector<double> rstd1, rstd2;
    };
    std::vector<Block> blocks;
    Matrix xhat_f;
    std::vector<double> rstd_f;
    TokenSeq tokens;

    explicit EncoderTape(const ModelConfig& cfg) {
        const std::size_t t = cfg.context_len;
        const std::size_t d = cfg.dim;
        const std::size_t f = d * cfg.ff_mult;
        for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
            Block blk;
            for (Matrix* m : {&blk.x_in, &blk.xhat1, &blk.a, &blk.q, &blk.o, &blk.x_mid, &blk.xhat2, &blk.bn}) {
                *m = Matrix(t, d);
            }
            blk.u = Matrix(t, f);
            blk.g = Matrix(t, f);
            blk.att = Matrix(t, cfg.heads * t);
            blk.rstd1.assign(t, 0.0);
            blk.rstd2.assign(t, 0.0);
            blocks.push_back(std::move(blk));
        }
        xhat_f = Matrix(t, d);
        rstd_f.assign(t, 0.0);
    }
};

namespace {

// y = gain * xhat + bias; returns rstd.
double
layer_norm(std::span<const double> x,
           std::span<const double> gain,
           std::span<const double> bias,
           std::span<double> xhat,
           std::span<double> y) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t i = 0; i < n; ++i) {
        xhat[i] = (x[i] - mean) * rstd;
        y[i] = gain[i] * xhat[i] + bias[i];
    }
    return rstd;
}

// Accumulates gain/bias gradients and writes dx (overwrites).
void
layer_norm_backward(std::span<const double> dy,
                    std::span<const double> xhat,
                    double rstd,
                    std::span<const double> gain,
                    std::span<double> dgain,
                    std::span<double> dbias,
                    std::span<double> dx) {
    const std::size_t n = dy.size();
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dgain[i] += dy[i] * xhat[i];
        dbias[i] += dy[i];
        const double dxh = dy[i] * gain[i];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * xhat[i];
    }
    mean_dxhat /= static_cast<double>(n);
    mean_dxhat_xhat /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dxh = dy[i] * gain[i];
        dx[i] = rstd * (dxh - mean_dxhat - xhat[i] * mean_dxhat_xhat);
    }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double
gelu(double u) {
    return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
}

double
gelu_grad(double u) {
    const double th = std::tanh(kGeluC * (u + kGeluA * u * u * u));
    return 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

}  // namespace

EncoderCache::EncoderCache(const ModelParams& params) : params_(&params) {
    const auto& cfg = params.config();
    for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
        keys_.emplace_back(cfg.context_len, cfg.dim);
        values_.emplace_back(cfg.context_len, cfg.dim);
    }
    hidden_ = Matrix(cfg.context_len, cfg.dim);
    const std::size_t f = cfg.dim * cfg.ff_mult;
    x_.assign(cfg.dim, 0.0);
    a_.assign(cfg.dim, 0.0);
    q_.assign(cfg.dim, 0.0);
    o_.assign(cfg.dim, 0.0);
    tmp_.assign(cfg.dim, 0.0);
    u_.assign(f, 0.0);
    g_.assign(f, 0.0);
    scores_.assign(cfg.context_len, 0.0);
}

void
EncoderCache::truncate(std::size_t length) {
    length_ = std::min(length_, length);
}

std::span<const double>
EncoderCache::hidden(std::size_t pos) const {
    if (pos >= length_) {
        throw InputError("hidden state requested past the encoded length");
    }
    return hidden_.row(pos);
}

std::span<const double>
EncoderCache::hidden() const {
    if (length_ == 0) {
        throw InputError("encoder cache is empty");
    }
    return hidden_.row(length_ - 1);
}

void
EncoderCache::push(Token token) {
    const ModelParams& p = *params_;
    const auto& cfg = p.config();
    const auto& lay = p.layout();
    if (token >= cfg.vocab_size()) {
        throw InputError("token " + std::to_string(token) + " out of range (vocab " +
                         std::to_string(cfg.vocab_size()) + ")");
    }
    if (length_ >= cfg.context_len) {
        throw InputError("context longer than context_len " + std::to_string(cfg.context_len));
    }
    const std::size_t t = length_;
    const std::size_t d = cfg.dim;
    const std::size_t dh = d / cfg.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto& k = simd::active();

    const auto emb = p.block(lay.token_embeddings).row(token);
    const auto pos = p.block(lay.position_embeddings).row(t);
    for (std::size_t i = 0; i < d; ++i) {
        x_[i] = emb[i] + pos[i];
    }

    for (std::size_t b = 0; b < lay.encoder.size(); ++b) {
        const auto& e = lay.encoder[b];
        EncoderTape::Block* tb = tape_ != nullptr ? &tape_->blocks[b] : nullptr;
        std::vector<double> xhat(d);
        if (tb != nullptr) {
            std::copy(x_.begin(), x_.end(), tb->x_in.row(t).begin());
        }
        const double r1 = layer_norm(x_, p.block(e.ln1_g).row(0), p.block(e.ln1_b).row(0), xhat, a_);
        k.matvec(p.block(e.wq).data(), d, a_.data(), d, q_.data());
        k.matvec(p.block(e.wk).data(), d, a_.data(), d, keys_[b].row(t).data());
        k.matvec(p.block(e.wv).data(), d, a_.data(), d, values_[b].row(t).data());

        std::fill(o_.begin(), o_.end(), 0.0);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::size_t off = h * dh;
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= t; ++j) {
                scores_[j] = k.dot(q_.data() + off, keys_[b].row(j).data() + off, dh) * scale;
                m = std::max(m, scores_[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j <= t; ++j) {
                scores_[j] = std::exp(scores_[j] - m);
                z += scores_[j];
            }
            for (std::size_t j = 0; j <= t; ++j) {
                scores_[j] /= z;
                k.axpy(scores_[j], values_[b].row(j).data() + off, o_.data() + off, dh);
            }
            if (tb != nullptr) {
                std::copy_n(scores_.begin(), t + 1, tb->att.row(t).begin() + h * cfg.context_len);
            }
        }
        k.matvec(p.block(e.wo).data(), d, o_.data(), d, tmp_.data());
        for (std::size_t i = 0; i < d; ++i) {
            x_[i] += tmp_[i];
        }
        if (tb != nullptr) {
            tb->rstd1[t] = r1;
            std::copy(xhat.begin(), xhat.end(), tb->xhat1.row(t).begin());
            std::copy(a_.begin(), a_.end(), tb->a.row(t).begin());
            std::copy(q_.begin(), q_.end(), tb->q.row(t).begin());
            std::copy(o_.begin(), o_.end(), tb->o.row(t).begin());
            std::copy(x_.begin(), x_.end(), tb->x_mid.row(t).begin());
        }

        const double r2 = layer_norm(x_, p.block(e.ln2_g).row(0), p.block(e.ln2_b).row(0), xhat, a_);
        const std::size_t f = u_.size();
        k.matvec(p.block(e.w1).data(), f, a_.data(), d, u_.data());
        const auto b1 = p.block(e.b1).row(0);
        for (std::size_t i = 0; i < f; ++i) {
            u_[i] += b1[i];
            g_[i] = gelu(u_[i]);
        }
        k.matvec(p.block(e.w2).data(), d, g_.data(), f, tmp_.data());
        const auto b2 = p.block(e.b2).row(0);
        for (std::size_t i = 0; i < d; ++i) {
            x_[i] += tmp_[i] + b2[i];
        }
        if (tb != nullptr) {
            tb->rstd2[t] = r2;
            std::copy(xhat.begin(), xhat.end(), tb->xhat2.row(t).begin());
            std::copy(a_.begin(), a_.end(), tb->bn.row(t).begin());
            std::copy(u_.begin(), u_.end(), tb->u.row(t).begin());
            std::copy(g_.begin(), g_.end(), tb->g.row(t).begin());
        }
    }

    auto out = hidden_.row(t);
    if (lay.encoder.empty()) {
        std::copy(x_.begin(), x_.end(), out.begin());
    } else {
        std::vector<double> xhat(d);
        const double rf = layer_norm(x_, p.block(lay.lnf_g).row(0), p.block(lay.lnf_b).row(0), xhat, out);
        if (tape_ != nullptr) {
            tape_->rstd_f[t] = rf;
            std::copy(xhat.begin(), xhat.end(), tape_->xhat_f.row(t).begin());
        }
    }
    if (tape_ != nullptr) {
        tape_->tokens.resize(t);
        tape_->tokens.push_back(token);
    }
    length_ = t + 1;
}

// ---------------------------------------------------------------------------
// Backward pass

/// Reverse-mode pass over a taped forward. dh holds d(loss)/d(hidden) for
/// every encoded position.
class Backprop {
public:
    static void
    run(const ModelParams& p, const EncoderCache& cache, const EncoderTape& tape, Matrix dh, ModelParams& grad) {
        const auto& cfg = p.config();
        const auto& lay = p.layout();
        const auto& k = simd::active();
        const std::size_t T = cache.length();
        const std::size_t d = cfg.dim;
        const std::size_t f = d * cfg.ff_mult;
        const std::size_t dh_width = d / cfg.heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh_width));

        Matrix dx(T, d);
        if (lay.encoder.empty()) {
            std::copy_n(dh.data(), T * d, dx.data());
        } else {
            for (std::size_t t = 0; t < T; ++t) {
                layer_norm_backward(dh.row(t), tape.xhat_f.row(t), tape.rstd_f[t], p.block(lay.lnf_g).row(0),
                                    grad.block(lay.lnf_g).row(0), grad.block(lay.lnf_b).row(0), dx.row(t));
            }
        }

        std::vector<double> dg(f), du(f), dbn(d), dtmp(d), dout(d);
        Matrix dq(T, d), dk(T, d), dv(T, d);
        for (std::size_t bi = lay.encoder.size(); bi-- > 0;) {
            const auto& e = lay.encoder[bi];
            const auto& tb = tape.blocks[bi];

            // Feed-forward sublayer: x_out = x_mid + W2 gelu(W1 LN2(x_mid) + b1) + b2.
            for (std::size_t t = 0; t < T; ++t) {
                auto dxr = dx.row(t);
                k.axpy(1.0, dxr.data(), grad.block(e.b2).data(), d);
                std::fill(dg.begin(), dg.end(), 0.0);
                for (std::size_t o = 0; o < d; ++o) {
                    k.axpy(dxr[o], tb.g.row(t).data(), grad.block(e.w2).row(o).data(), f);
                    k.axpy(dxr[o], p.block(e.w2).row(o).data(), dg.data(), f);
                }
                const auto u = tb.u.row(t);
                for (std::size_t i = 0; i < f; ++i) {
                    du[i] = dg[i] * gelu_grad(u[i]);
                }
                k.axpy(1.0, du.data(), grad.block(e.b1).data(), f);
                std::fill(dbn.begin(), dbn.end(), 0.0);
                for (std::size_t o = 0; o < f; ++o) {
                    k.axpy(du[o], tb.bn.row(t).data(), grad.block(e.w1).row(o).data(), d);
                    k.axpy(du[o], p.block(e.w1).row(o).data(), dbn.data(), d);
                }
                layer_norm_backward(dbn, tb.xhat2.row(t), tb.rstd2[t], p.block(e.ln2_g).row(0),
                                    grad.block(e.ln2_g).row(0), grad.block(e.ln2_b).row(0), dtmp);
                for (std::size_t i = 0; i < d; ++i) {
                    dxr[i] += dtmp[i];
                }
            }

            // Attention sublayer: x_mid = x_in + Wo o.
            dq.fill(0.0);
            dk.fill(0.0);
            dv.fill(0.0);
            const Matrix& keys = cache.keys_[bi];
            const Matrix& vals = cache.values_[bi];
            std::vector<double> dprob(T);
            for (std::size_t t = 0; t < T; ++t) {
                const auto dm = dx.row(t);
                std::fill(dout.begin(), dout.end(), 0.0);
                for (std::size_t o = 0; o < d; ++o) {
                    k.axpy(dm[o], tb.o.row(t).data(), grad.block(e.wo).row(o).data(), d);
                    k.axpy(dm[o], p.block(e.wo).row(o).data(), dout.data(), d);
                }
                for (std::size_t h = 0; h < cfg.heads; ++h) {
                    const std::size_t off = h * dh_width;
                    const double* prob = tb.att.row(t).data() + h * cfg.context_len;
                    double mix = 0.0;
                    for (std::size_t j = 0; j <= t; ++j) {
                        dprob[j] = k.dot(dout.data() + off, vals.row(j).data() + off, dh_width);
                        mix += prob[j] * dprob[j];
                    }
                    for (std::size_t j = 0; j <= t; ++j) {
                        const double ds = prob[j] * (dprob[j] - mix) * scale;
                        k.axpy(ds, keys.row(j).data() + off, dq.row(t).data() + off, dh_width);
                        k.axpy(ds, tb.q.row(t).data() + off, dk.row(j).data() + off, dh_width);
                        k.axpy(prob[j], dout.data() + off, dv.row(j).data() + off, dh_width);
                    }
                }
            }
            for (std::size_t t = 0; t < T; ++t) {
                std::fill(dtmp.begin(), dtmp.end(), 0.0);
                const auto a = tb.a.row(t);
                for (std::size_t o = 0; o < d; ++o) {
                    k.axpy(dq(t, o), a.data(), grad.block(e.wq).row(o).data(), d);
                    k.axpy(dk(t, o), a.data(), grad.block(e.wk).row(o).data(), d);
                    k.axpy(dv(t, o), a.data(), grad.block(e.wv).row(o).data(), d);
                    k.axpy(dq(t, o), p.block(e.wq).row(o).data(), dtmp.data(), d);
                    k.axpy(dk(t, o), p.block(e.wk).row(o).data(), dtmp.data(), d);
                    k.axpy(dv(t, o), p.block(e.wv).row(o).data(), dtmp.data(), d);
                }
                layer_norm_backward(dtmp, tb.xhat1.row(t), tb.rstd1[t], p.block(e.ln1_g).row(0),
                                    grad.block(e.ln1_g).row(0), grad.block(e.ln1_b).row(0), dbn);
                auto dxr = dx.row(t);
                for (std::size_t i = 0; i < d; ++i) {
                    dxr[i] += dbn[i];
                }
            }
        }

        Matrix& demb = grad.block(lay.token_embeddings);
        Matrix& dpos = grad.block(lay.position_embeddings);
        for (std::size_t t = 0; t < T; ++t) {
            k.axpy(1.0, dx.row(t).data(), demb.row(tape.tokens[t]).data(), d);
            k.axpy(1.0, dx.row(t).data(), dpos.row(t).data(), d);
        }
    }
};

// ---------------------------------------------------------------------------
// Read-outs

TokenSeq
serialize_history(const ModelConfig& config, const SemanticIdTable& table, std::span<const ItemIndex> items) {
    TokenSeq out;
    out.reserve(1 + items.size() * config.levels());
    out.push_back(config.bos_token());
    for (ItemIndex it : items) {
        if (it >= table.item_count()) {
            throw InputError("item " + std::to_string(it) + " not in the semantic-id table");
        }
        const TokenSeq& ids = table.ids[it];
        if (ids.size() != config.levels()) {
            throw InputError("semantic-id length does not match the model");
        }
        for (std::size_t l = 0; l < ids.size(); ++l) {
            out.push_back(global_token(config, l, ids[l]));
        }
    }
    return out;
}

HiddenState
encode(const ModelParams& params, std::span<const Token> context) {
    if (context.empty()) {
        throw InputError("encode: empty context");
    }
    EncoderCache cache(params);
    for (Token t : context) {
        cache.push(t);
    }
    const auto h = cache.hidden();
    return {h.begin(), h.end()};
}

std::vector<double>
ar_logits(const ModelParams& params, std::span<const Token> context, std::span<const Token> prefix) {
    const auto& cfg = params.config();
    if (prefix.size() >= cfg.levels()) {
        throw InputError("ar_logits: prefix already covers every level");
    }
    if (context.empty()) {
        throw InputError("ar_logits: empty context");
    }
    EncoderCache cache(params);
    for (Token t : context) {
        cache.push(t);
    }
    for (std::size_t l = 0; l < prefix.size(); ++l) {
        cache.push(global_token(cfg, l, prefix[l]));
    }
    const std::size_t level = prefix.size();
    const std::size_t n = cfg.level_vocab_sizes[level];
    std::vector<double> out(n);
    const Matrix& e = params.block(params.layout().token_embeddings);
    simd::matvec(e.row(cfg.level_offset(level)).data(), cache.hidden(), out);
    return out;
}

std::vector<std::vector<double>>
parallel_logits_from_state(const ModelParams& params, std::span<const double> state) {
    const auto& cfg = params.config();
    std::vector<std::vector<double>> out(cfg.levels());
    for (std::size_t l = 0; l < cfg.levels(); ++l) {
        out[l].assign(cfg.level_vocab_sizes[l], 0.0);
        simd::matvec(params.block(params.layout().heads[l]).data(), state, out[l]);
    }
    return out;
}

std::vector<std::vector<double>>
parallel_logits(const ModelParams& params, std::span<const Token> context) {
    const auto h = encode(params, context);
    return parallel_logits_from_state(params, h);
}

std::vector<double>
log_softmax(std::span<const double> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        m = std::max(m, v);
    }
    double z = 0.0;
    for (double v : logits) {
        z += std::exp(v - m);
    }
    const double lse = m + std::log(z);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - lse;
    }
    return out;
}

std::vector<double>
softmax(std::span<const double> logits) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        m = std::max(m, v);
    }
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (double& v : out) {
        v /= z;
    }
    return out;
}

std::string_view
objective_name(Objective o) noexcept {
    switch (o) {
        case Objective::Ar:
            return "ar";
        case Objective::Parallel:
            return "parallel";
        case Objective::SimGR:
            return "simgr";
    }
    return "ar";
}

Objective
parse_objective(std::string_view name) {
    for (auto o : {Objective::Ar, Objective::Parallel, Objective::SimGR}) {
        if (objective_name(o) == name) {
            return o;
        }
    }
    throw InputError("unknown objective '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Losses

namespace {

// Cross-entropy of logits against target; accumulates weight * dlogits.
double
cross_entropy(std::span<const double> logits, std::size_t target, double weight, std::span<double> dlogits) {
    const auto lp = log_softmax(logits);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        dlogits[i] = weight * (std::exp(lp[i]) - (i == target ? 1.0 : 0.0));
    }
    return -lp[target];
}

struct ItemPool {
    ItemMatrix items;
    std::vector<Matrix> token_rows;  // per item, L' x d
};

ItemPool
build_item_pool(const ModelParams& params, const SemanticIdTable& table) {
    ItemPool pool;
    pool.items = materialize_items(params, table);
    pool.token_rows.reserve(table.item_count());
    for (std::size_t i = 0; i < table.item_count(); ++i) {
        pool.token_rows.push_back(item_token_matrix(params, table.ids[i]));
    }
    return pool;
}

// Forward (and optionally backward) of one example. Returns the summed NLL
// over its targets; `weight` scales gradients.
double
example_loss(const ModelParams& params,
             const TrainExample& ex,
             Objective objective,
             const SemanticIdTable& table,
             const ItemPool* pool,
             double weight,
             ModelParams* grad,
             Matrix* ditems,
             std::size_t& targets) {
    const auto& cfg = params.config();
    const auto& lay = params.layout();
    const std::size_t S = cfg.levels();
    const std::size_t d = cfg.dim;
    const std::size_t n = ex.items.size();
    if (n == 0) {
        throw InputError("training example with no items");
    }

    // Inputs: BOS + every item but the last; AR also feeds the last item's
    // leading tokens so each of its tokens has a predicting position.
    std::span<const ItemIndex> history(ex.items.data(), n - 1);
    TokenSeq input = serialize_history(cfg, table, history);
    if (ex.items.back() >= table.item_count()) {
        throw InputError("target item out of range");
    }
    if (objective == Objective::Ar) {
        const TokenSeq& last = table.ids[ex.items.back()];
        for (std::size_t l = 0; l + 1 < S; ++l) {
            input.push_back(global_token(cfg, l, last[l]));
        }
    }
    if (input.size() > cfg.context_len) {
        throw InputError("training example exceeds context_len");
    }

    EncoderCache cache(params);
    std::unique_ptr<EncoderTape> tape;
    if (grad != nullptr) {
        tape = std::make_unique<EncoderTape>(cfg);
        cache.attach_tape(tape.get());
    }
    for (Token t : input) {
        cache.push(t);
    }

    Matrix dh(cache.length(), d);
    double total = 0.0;
    const Matrix& emb = params.block(lay.token_embeddings);
    std::vector<double> dlogits;
    for (std::size_t j = 0; j < n; ++j) {
        const ItemIndex target = ex.items[j];
        const TokenSeq& ids = table.ids[target];
        ++targets;
        switch (objective) {
            case Objective::Ar:
                for (std::size_t l = 0; l < S; ++l) {
                    const std::size_t pos = j * S + l;
                    const std::size_t off = cfg.level_offset(l);
                    const std::size_t nv = cfg.level_vocab_sizes[l];
                    std::vector<double> logits(nv);
                    simd::matvec(emb.row(off).data(), cache.hidden(pos), logits);
                    dlogits.assign(nv, 0.0);
                    total += cross_entropy(logits, ids[l], weight, dlogits);
                    if (grad != nullptr) {
                        Matrix& demb = grad->block(lay.token_embeddings);
                        for (std::size_t v = 0; v < nv; ++v) {
                            simd::axpy(dlogits[v], emb.row(off + v), dh.row(pos));
                            simd::axpy(dlogits[v], cache.hidden(pos), demb.row(off + v));
                        }
                    }
                }
                break;
            case Objective::Parallel: {
                const std::size_t pos = j * S;
                for (std::size_t l = 0; l < S; ++l) {
                    const Matrix& head = params.block(lay.heads[l]);
                    std::vector<double> logits(head.rows());
                    simd::matvec(head.data(), cache.hidden(pos), logits);
                    dlogits.assign(head.rows(), 0.0);
                    total += cross_entropy(logits, ids[l], weight, dlogits);
                    if (grad != nullptr) {
                        Matrix& dhead = grad->block(lay.heads[l]);
                        for (std::size_t v = 0; v < head.rows(); ++v) {
                            simd::axpy(dlogits[v], head.row(v), dh.row(pos));
                            simd::axpy(dlogits[v], cache.hidden(pos), dhead.row(v));
                        }
                    }
                }
                break;
            }
            case Objective::SimGR: {
                const std::size_t pos = j * S;
                std::vector<double> gh(d, 0.0);
                total += simgr_loss_accumulate(cache.hidden(pos), pool->items, target, cfg.simgr.tau,
                                               cfg.simgr.cosine, weight, gh, ditems);
                if (grad != nullptr) {
                    simd::axpy(1.0, gh, dh.row(pos));
                }
                break;
            }
        }
    }
    if (grad != nullptr) {
        Backprop::run(params, cache, *tape, std::move(dh), *grad);
    }
    return total;
}

void
backprop_items(const ModelParams& params,
               const SemanticIdTable& table,
               const ItemPool& pool,
               const Matrix& ditems,
               ModelParams& grad) {
    const auto& cfg = params.config();
    const auto& lay = params.layout();
    const AggregatorWeights w = params.aggregator_weights();
    Matrix* da = lay.aggregator.empty() ? nullptr : &grad.block(lay.aggregator[0]);
    Matrix* db = lay.aggregator.size() > 1 ? &grad.block(lay.aggregator[1]) : nullptr;
    Matrix& demb = grad.block(lay.token_embeddings);
    const std::size_t L = cfg.aggregated_tokens();
    Matrix dtok(L, cfg.dim);
    for (std::size_t i = 0; i < table.item_count(); ++i) {
        dtok.fill(0.0);
        aggregate_backward(pool.token_rows[i], w, ditems.row(i), dtok, da, db);
        for (std::size_t l = 0; l < L; ++l) {
            simd::axpy(1.0, dtok.row(l), demb.row(global_token(cfg, l, table.ids[i][l])));
        }
    }
}

std::size_t
count_targets(const TrainBatch& batch) {
    std::size_t n = 0;
    for (const auto& ex : batch.examples) {
        n += ex.items.size();
    }
    return n;
}

}  // namespace

LossAndGrad
loss_and_gradients(const ModelParams& params,
                   const TrainBatch& batch,
                   Objective objective,
                   const SemanticIdTable& table) {
    if (batch.examples.empty()) {
        throw InputError("empty training batch");
    }
    const std::size_t total_targets = count_targets(batch);
    if (total_targets == 0) {
        throw InputError("training batch has no targets");
    }
    const double weight = 1.0 / static_cast<double>(total_targets);
    LossAndGrad out{0.0, ModelParams::zeros_like(params), total_targets};
    std::optional<ItemPool> pool;
    Matrix ditems;
    if (objective == Objective::SimGR) {
        pool = build_item_pool(params, table);
        ditems = Matrix(table.item_count(), params.config().dim);
    }
    CompensatedSum total;
    for (std::size_t i = 0; i < batch.examples.size(); ++i) {
        std::size_t targets = 0;
        const double l = example_loss(params, batch.examples[i], objective, table, pool ? &*pool : nullptr,
                                      weight, &out.grad, &ditems, targets);
        if (!std::isfinite(l)) {
            throw TrainingError("non-finite loss", i);
        }
        total.add(l);
    }
    if (objective == Objective::SimGR) {
        backprop_items(params, table, *pool, ditems, out.grad);
    }
    out.loss = total.value() * weight;
    return out;
}

double
batch_loss(const ModelParams& params, const TrainBatch& batch, Objective objective, const SemanticIdTable& table) {
    if (batch.examples.empty()) {
        throw InputError("empty training batch");
    }
    const std::size_t total_targets = count_targets(batch);
    std::optional<ItemPool> pool;
    if (objective == Objective::SimGR) {
        pool = build_item_pool(params, table);
    }
    CompensatedSum total;
    for (std::size_t i = 0; i < batch.examples.size(); ++i) {
        std::size_t targets = 0;
        const double l = example_loss(params, batch.examples[i], objective, table, pool ? &*pool : nullptr, 1.0,
                                      nullptr, nullptr, targets);
        if (!std::isfinite(l)) {
            throw TrainingError("non-finite loss", i);
        }
        total.add(l);
    }
    return total.value() / static_cast<double>(total_targets);
}

// ---------------------------------------------------------------------------
// Optimisation

OptimizerState
make_optimizer_state(const ModelParams& params) {
    OptimizerState s;
    for (std::size_t i = 0; i < params.block_count(); ++i) {
        s.m.emplace_back(params.block(i).rows(), params.block(i).cols());
        s.v.emplace_back(params.block(i).rows(), params.block(i).cols());
    }
    return s;
}

double
scheduled_lr(const AdamWConfig& cfg, std::size_t step) {
    if (cfg.total_steps == 0) {
        return cfg.lr;
    }
    const auto warmup = static_cast<std::size_t>(
        std::ceil(cfg.warmup_ratio * static_cast<double>(cfg.total_steps)));
    if (step < warmup) {
        return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    const double span = static_cast<double>(std::max<std::size_t>(1, cfg.total_steps - warmup));
    const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
    return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double
train_step(ModelParams& params,
           OptimizerState& state,
           const TrainBatch& batch,
           Objective objective,
           const AdamWConfig& hyper,
           const SemanticIdTable& table) {
    LossAndGrad lg = loss_and_gradients(params, batch, objective, table);
    if (state.m.size() != params.block_count()) {
        state = make_optimizer_state(params);
    }
    const double lr = scheduled_lr(hyper, state.step);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t b = 0; b < params.block_count(); ++b) {
        auto& w = params.block(b).values();
        const auto& g = lg.grad.block(b).values();
        auto& m = state.m[b].values();
        auto& v = state.v[b].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + hyper.eps) + hyper.weight_decay * w[i]);
        }
    }
    return lg.loss;
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport
grad_check(const ModelParams& params,
           const TrainExample& example,
           Objective objective,
           const SemanticIdTable& table,
           const GradCheckOptions& opts) {
    TrainBatch batch{{example}};
    LossAndGrad lg = loss_and_gradients(params, batch, objective, table);
    if (opts.corrupt_block) {
        auto& g = lg.grad.block(lg.grad.block_index(*opts.corrupt_block)).values();
        for (double& v : g) {
            v = -v;
        }
    }
    ModelParams probe = params;
    GradCheckReport report;
    auto rng = make_stream(opts.seed, "grad_check");
    for (std::size_t b = 0; b < params.block_count(); ++b) {
        const std::size_t size = params.block(b).size();
        std::vector<std::size_t> coords(size);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (size > opts.samples_per_block) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.samples_per_block);
            std::sort(coords.begin(), coords.end());
        }
        GradCheckBlock blk{params.block_name(b), coords.size(), 0.0};
        auto& w = probe.block(b).values();
        for (std::size_t c : coords) {
            const double orig = w[c];
            w[c] = orig + opts.step;
            const double up = batch_loss(probe, batch, objective, table);
            w[c] = orig - opts.step;
            const double down = batch_loss(probe, batch, objective, table);
            w[c] = orig;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double analytic = lg.grad.block(b).values()[c];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.abs_floor});
            blk.max_rel_err = std::max(blk.max_rel_err, std::abs(numeric - analytic) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, blk.max_rel_err);
        report.blocks.push_back(std::move(blk));
    }
    report.passed = report.max_rel_err < opts.tolerance;
    return report;
}

}  // namespace semdec
