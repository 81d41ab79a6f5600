#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsflow/latent.hpp"
#include "rsflow/rng.hpp"
#include "rsflow/tokens.hpp"

namespace rsflow {

/// Shape of the per-frame windowed MLP.
///
/// Each output frame j sees the W frames of x_t centred on j (zero padded),
/// a sinusoidal embedding of t, the embedding of the token aligned to j, and
/// the sin/cos of j's fractional position inside that token's frame span.
struct ModelConfig {
    int channels = 8;
    int vocab_size = 16;
    int embed_dim = 32;
    int hidden_dim = 128;
    int num_layers = 3;
    int context_window = 5;
    int time_embed_dim = 16;
    double uncond_prob = 0.1;

    static constexpr int kPhaseFeatures = 2;

    void validate() const;

    int window_rows() const { return context_window * channels; }
    int time_offset() const { return window_rows(); }
    int cond_offset() const { return time_offset() + time_embed_dim; }
    int phase_offset() const { return cond_offset() + embed_dim; }
    int input_dim() const { return phase_offset() + kPhaseFeatures; }

    /// Input and output width of dense layer l.
    int layer_in(int l) const { return l == 0 ? input_dim() : hidden_dim; }
    int layer_out(int l) const { return l == num_layers - 1 ? channels : hidden_dim; }

    std::size_t parameter_count() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct VectorFieldParams {
    ModelConfig config;
    Matrix<Scalar> token_embedding;  // E x vocab, one column per token
    Matrix<Scalar> null_embedding;   // E x 1, the unconditional branch
    std::vector<Matrix<Scalar>> weights;
    std::vector<Matrix<Scalar>> biases;

    static VectorFieldParams zeros(const ModelConfig& cfg) {
        cfg.validate();
        VectorFieldParams p;
        p.config = cfg;
        p.token_embedding = Matrix<Scalar>::Zero(cfg.embed_dim, cfg.vocab_size);
        p.null_embedding = Matrix<Scalar>::Zero(cfg.embed_dim, 1);
        for (int l = 0; l < cfg.num_layers; ++l) {
            p.weights.push_back(Matrix<Scalar>::Zero(cfg.layer_out(l), cfg.layer_in(l)));
            p.biases.push_back(Matrix<Scalar>::Zero(cfg.layer_out(l), 1));
        }
        return p;
    }

    /// Glorot-uniform dense weights, zero biases, N(0, 0.02) embeddings.
    static VectorFieldParams init(const ModelConfig& cfg, SeededRng rng) {
        auto p = zeros(cfg);
        auto fill_normal = [&](Matrix<Scalar>& m, double stddev) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(stddev * rng.normal());
        };
        fill_normal(p.token_embedding, 0.02);
        fill_normal(p.null_embedding, 0.02);
        for (int l = 0; l < cfg.num_layers; ++l) {
            auto& w = p.weights[static_cast<std::size_t>(l)];
            const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
        }
        return p;
    }

    /// Visits every tensor in declaration order with a stable name.
    template <typename F>
    void for_each_tensor(F&& f) {
        f(std::string("token_embedding"), token_embedding);
        f(std::string("null_embedding"), null_embedding);
        for (std::size_t l = 0; l < weights.size(); ++l) {
            f("layer" + std::to_string(l) + ".weight", weights[l]);
            f("layer" + std::to_string(l) + ".bias", biases[l]);
        }
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<VectorFieldParams*>(this)->for_each_tensor(
            [&](const std::string& name, Matrix<Scalar>& m) { f(name, static_cast<const Matrix<Scalar>&>(m)); });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_tensor([&](const std::string&, const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
        return n;
    }

    template <typename Other>
    VectorFieldParams<Other> cast() const {
        VectorFieldParams<Other> out;
        out.config = config;
        out.token_embedding = token_embedding.template cast<Other>();
        out.null_embedding = null_embedding.template cast<Other>();
        for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
        for (const auto& b : biases) out.biases.push_back(b.template cast<Other>());
        return out;
    }

    VectorFieldParams zeros_like() const { return zeros(config); }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const std::string&, const Matrix<Scalar>& m) { ok = ok && m.allFinite(); });
        return ok;
    }

    friend bool operator==(const VectorFieldParams& a, const VectorFieldParams& b) {
        return a.config == b.config && a.token_embedding == b.token_embedding &&
               a.null_embedding == b.null_embedding && a.weights == b.weights && a.biases == b.biases;
    }
};

/// One input to the field: x_t, the time, and an optional condition.
/// cond == nullptr selects the null-condition embedding.
template <typename Scalar>
struct FieldQuery {
    const Latent<Scalar>* x_t = nullptr;
    double t = 0.0;
    const Tokens* cond = nullptr;
};

/// Activations kept by forward_batch for the matching backward call.
template <typename Scalar>
struct ForwardCache {
    Matrix<Scalar> input;
    std::vector<Matrix<Scalar>> pre;   // pre-activation per layer
    std::vector<Matrix<Scalar>> post;  // SiLU output per hidden layer
    std::vector<int> column_token;     // -1 marks the null condition
    std::vector<Eigen::Index> item_frames;
    bool valid = false;
};

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
}

}  // namespace detail

/// Sinusoidal features of t with angular frequencies spread geometrically
/// over [1, 1000]; an odd trailing slot carries t itself.
template <typename Scalar>
void time_embedding(double t, int dim, Scalar* out) {
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        const double freq = half > 1 ? std::exp(std::log(1000.0) * k / (half - 1)) : 1.0;
        out[2 * k] = static_cast<Scalar>(std::sin(freq * t));
        out[2 * k + 1] = static_cast<Scalar>(std::cos(freq * t));
    }
    if (dim % 2 == 1) out[dim - 1] = static_cast<Scalar>(t);
}

/// Token slot and fractional phase for frame j when n tokens are stretched
/// over T frames by nearest neighbour.
inline std::pair<int, double> aligned_token(Eigen::Index j, Eigen::Index frames, std::size_t n_tokens) {
    const double pos = (static_cast<double>(j) + 0.5) * static_cast<double>(n_tokens) / static_cast<double>(frames);
    int idx = static_cast<int>(std::floor(pos));
    idx = std::clamp(idx, 0, static_cast<int>(n_tokens) - 1);
    return {idx, pos - idx};
}

template <typename Scalar>
std::vector<Latent<Scalar>> forward_batch(const VectorFieldParams<Scalar>& params,
                                          std::span<const FieldQuery<Scalar>> queries,
                                          ForwardCache<Scalar>* cache = nullptr) {
    const ModelConfig& cfg = params.config;
    const Eigen::Index C = cfg.channels;
    const int half_window = cfg.context_window / 2;

    Eigen::Index total = 0;
    for (const auto& q : queries) {
        if (q.x_t == nullptr) throw UsageError("forward: query without x_t");
        if (q.x_t->channels() != C)
            throw ShapeError("forward: model expects " + std::to_string(C) + " channels, got " +
                             std::to_string(q.x_t->channels()));
        if (q.cond != nullptr) {
            if (q.cond->empty()) throw ConditionError("forward: empty condition token sequence");
            for (int tok : *q.cond)
                if (tok < 0 || tok >= cfg.vocab_size)
                    throw ConditionError("forward: token " + std::to_string(tok) + " outside vocabulary of " +
                                         std::to_string(cfg.vocab_size));
        }
        total += q.x_t->frames();
    }

    Matrix<Scalar> input = Matrix<Scalar>::Zero(cfg.input_dim(), total);
    std::vector<int> column_token(static_cast<std::size_t>(total), -1);
    std::vector<Eigen::Index> item_frames;
    item_frames.reserve(queries.size());
    std::vector<Scalar> temb(static_cast<std::size_t>(cfg.time_embed_dim));

    Eigen::Index col = 0;
    for (const auto& q : queries) {
        const auto& x = *q.x_t;
        const Eigen::Index T = x.frames();
        item_frames.push_back(T);
        time_embedding(q.t, cfg.time_embed_dim, temb.data());
        for (Eigen::Index j = 0; j < T; ++j, ++col) {
            auto column = input.col(col);
            for (int w = 0; w < cfg.context_window; ++w) {
                const Eigen::Index src = j + w - half_window;
                if (src >= 0 && src < T) column.segment(w * C, C) = x.frame(src);
            }
            for (int k = 0; k < cfg.time_embed_dim; ++k) column(cfg.time_offset() + k) = temb[static_cast<std::size_t>(k)];
            if (q.cond != nullptr) {
                const auto [slot, phase] = aligned_token(j, T, q.cond->size());
                const int tok = (*q.cond)[static_cast<std::size_t>(slot)];
                column.segment(cfg.cond_offset(), cfg.embed_dim) = params.token_embedding.col(tok);
                column(cfg.phase_offset()) = static_cast<Scalar>(std::sin(2.0 * std::numbers::pi * phase));
                column(cfg.phase_offset() + 1) = static_cast<Scalar>(std::cos(2.0 * std::numbers::pi * phase));
                column_token[static_cast<std::size_t>(col)] = tok;
            } else {
                column.segment(cfg.cond_offset(), cfg.embed_dim) = params.null_embedding.col(0);
            }
        }
    }

    std::vector<Matrix<Scalar>> pre;
    std::vector<Matrix<Scalar>> post;
    Matrix<Scalar> act;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto& w = params.weights[static_cast<std::size_t>(l)];
        const auto& b = params.biases[static_cast<std::size_t>(l)];
        Matrix<Scalar> z(w.rows(), total);
        z.noalias() = w * (l == 0 ? input : act);
        z.colwise() += b.col(0);
        if (l == cfg.num_layers - 1) {
            act = z;
        } else {
            act = z.unaryExpr([](Scalar v) { return v * detail::sigmoid(v); });
        }
        if (cache) {
            pre.push_back(std::move(z));
            if (l != cfg.num_layers - 1) post.push_back(act);
        }
    }

    std::vector<Latent<Scalar>> out;
    out.reserve(queries.size());
    col = 0;
    for (const auto& q : queries) {
        const Eigen::Index T = q.x_t->frames();
        out.emplace_back(Matrix<Scalar>(act.middleCols(col, T)), q.x_t->frame_rate());
        col += T;
    }

    if (cache) {
        cache->input = std::move(input);
        cache->pre = std::move(pre);
        cache->post = std::move(post);
        cache->column_token = std::move(column_token);
        cache->item_frames = std::move(item_frames);
        cache->valid = true;
    }
    return out;
}

/// u_theta(x_t, t, cond) for a single sequence.
template <typename Scalar>
Latent<Scalar> forward(const VectorFieldParams<Scalar>& params, const Latent<Scalar>& x_t, double t,
                       const Tokens* cond) {
    const FieldQuery<Scalar> q{&x_t, t, cond};
    return std::move(forward_batch(params, std::span<const FieldQuery<Scalar>>(&q, 1)).front());
}

/// Exact reverse-mode gradients of a scalar loss given dL/du for each output
/// of the cached forward_batch call.
template <typename Scalar>
VectorFieldParams<Scalar> backward(const VectorFieldParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                                   std::span<const Latent<Scalar>> output_grads) {
    if (!cache.valid) throw UsageError("backward: no cached activations; run forward_batch with a cache first");
    const ModelConfig& cfg = params.config;
    if (output_grads.size() != cache.item_frames.size())
        throw ShapeError("backward: " + std::to_string(output_grads.size()) + " output gradients for " +
                         std::to_string(cache.item_frames.size()) + " cached items");

    const Eigen::Index total = cache.input.cols();
    Matrix<Scalar> grad(cfg.channels, total);
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < output_grads.size(); ++i) {
        const auto& g = output_grads[i];
        if (g.channels() != cfg.channels || g.frames() != cache.item_frames[i])
            throw ShapeError("backward: output gradient " + std::to_string(i) + " has the wrong shape");
        grad.middleCols(col, g.frames()) = g.values();
        col += g.frames();
    }

    auto grads = params.zeros_like();
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const auto ul = static_cast<std::size_t>(l);
        const Matrix<Scalar>& below = l == 0 ? cache.input : cache.post[ul - 1];
        grads.weights[ul].noalias() = grad * below.transpose();
        grads.biases[ul] = grad.rowwise().sum();
        if (l > 0) {
            Matrix<Scalar> d_act(cfg.hidden_dim, total);
            d_act.noalias() = params.weights[ul].transpose() * grad;
            const Matrix<Scalar>& z = cache.pre[ul - 1];
            grad = d_act.binaryExpr(z, [](Scalar d, Scalar zv) {
                const Scalar s = detail::sigmoid(zv);
                return d * s * (Scalar(1) + zv * (Scalar(1) - s));
            });
        }
    }

    // Only the condition embedding rows of the input carry parameters.
    Matrix<Scalar> d_cond(cfg.embed_dim, total);
    d_cond.noalias() = params.weights[0].middleCols(cfg.cond_offset(), cfg.embed_dim).transpose() * grad;
    for (Eigen::Index c = 0; c < total; ++c) {
        const int tok = cache.column_token[static_cast<std::size_t>(c)];
        if (tok >= 0)
            grads.token_embedding.col(tok) += d_cond.col(c);
        else
            grads.null_embedding.col(0) += d_cond.col(c);
    }
    return grads;
}

/// Returns no condition with probability uncond_prob, else cond unchanged.
inline std::optional<Tokens> maybe_drop_condition(const Tokens& cond, SeededRng& rng, double uncond_prob) {
    if (rng.uniform() < uncond_prob) return std::nullopt;
    return cond;
}

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Halve the learning rate every this many steps; 0 disables the schedule.
    std::uint64_t halve_every = 0;

    double lr_at(std::uint64_t step) const {
        if (halve_every == 0) return lr;
        return lr * std::pow(0.5, static_cast<double>(step / halve_every));
    }
};

template <typename Scalar>
struct AdamState {
    VectorFieldParams<Scalar> m;
    VectorFieldParams<Scalar> v;
    std::uint64_t step = 0;

    static AdamState for_params(const VectorFieldParams<Scalar>& p) { return {p.zeros_like(), p.zeros_like(), 0}; }

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update (AdamW with zero weight decay).
template <typename Scalar>
void adam_step(VectorFieldParams<Scalar>& params, const VectorFieldParams<Scalar>& grads, AdamState<Scalar>& state,
               double lr, const AdamConfig& opt = {}) {
    if (!(grads.config == params.config) || !(state.m.config == params.config))
        throw ShapeError("adam_step: parameter, gradient and state shapes differ");
    ++state.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    const auto b1 = static_cast<Scalar>(opt.beta1);
    const auto b2 = static_cast<Scalar>(opt.beta2);
    const auto step_size = static_cast<Scalar>(lr / bc1);
    const auto inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));
    const auto eps = static_cast<Scalar>(opt.eps);

    std::vector<const Matrix<Scalar>*> g_list;
    grads.for_each_tensor([&](const std::string&, const Matrix<Scalar>& g) { g_list.push_back(&g); });
    std::vector<Matrix<Scalar>*> m_list, v_list;
    state.m.for_each_tensor([&](const std::string&, Matrix<Scalar>& m) { m_list.push_back(&m); });
    state.v.for_each_tensor([&](const std::string&, Matrix<Scalar>& v) { v_list.push_back(&v); });

    std::size_t i = 0;
    params.for_each_tensor([&](const std::string& name, Matrix<Scalar>& p) {
        const auto& g = *g_list[i];
        auto& m = *m_list[i];
        auto& v = *v_list[i];
        if (g.rows() != p.rows() || g.cols() != p.cols()) throw ShapeError("adam_step: gradient shape mismatch in " + name);
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        p.array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps);
        ++i;
    });
}

}  // namespace rsflow
