#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rsflow/latent.hpp"
#include "rsflow/rng.hpp"
#include "rsflow/tokens.hpp"
#include "rsflow/vectorfield.hpp"

namespace rsflow {

struct SamplerConfig {
    int nfe = 24;
    double cfg_weight = 3.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// u_uncond + w (u_cond - u_uncond). w == 1 and w == 0 return the
/// corresponding branch exactly.
template <typename Scalar>
Latent<Scalar> cfg_combine(const Latent<Scalar>& u_cond, const Latent<Scalar>& u_uncond, double w) {
    require_same_shape(u_cond, u_uncond, "cfg_combine");
    if (w == 1.0) return u_cond;
    if (w == 0.0) return u_uncond;
    const auto ws = static_cast<Scalar>(w);
    return Latent<Scalar>(Matrix<Scalar>(u_uncond.values() + ws * (u_cond.values() - u_uncond.values())),
                          u_cond.frame_rate());
}

/// Single-sequence field: cond == nullptr asks for the unconditional branch.
template <typename Scalar>
using FieldFn = std::function<Latent<Scalar>(const Latent<Scalar>& x, double t, const Tokens* cond)>;

/// Batched field evaluation, one output per query, in order.
template <typename Scalar>
using BatchFieldFn = std::function<std::vector<Latent<Scalar>>(std::span<const FieldQuery<Scalar>>)>;

template <typename Scalar>
Latent<Scalar> draw_noise(Eigen::Index channels, Eigen::Index frames, double frame_rate, SeededRng& rng) {
    Latent<Scalar> x(channels, frames, frame_rate);
    for (Eigen::Index i = 0; i < x.values().size(); ++i) x.data()[i] = static_cast<Scalar>(rng.normal());
    return x;
}

/// Explicit Euler from t = 0 (noise) to t = 1 on the grid t_i = i / N with
/// guided field evaluations at the left endpoint.
template <typename Scalar>
Latent<Scalar> euler_solve(const FieldFn<Scalar>& field, Eigen::Index channels, Eigen::Index frames,
                           double frame_rate, const Tokens* cond, const SamplerConfig& sc, SeededRng& rng) {
    sc.validate();
    Latent<Scalar> x = draw_noise<Scalar>(channels, frames, frame_rate, rng);
    const auto dt = static_cast<Scalar>(1.0 / sc.nfe);
    for (int i = 0; i < sc.nfe; ++i) {
        const double t = static_cast<double>(i) / sc.nfe;
        Latent<Scalar> u = field(x, t, cond);
        if (sc.cfg_weight != 1.0) u = cfg_combine(u, field(x, t, nullptr), sc.cfg_weight);
        x.values() += dt * u.values();
    }
    return x;
}

/// Euler solve for several sequences at once; item k uses rngs[k] for its
/// noise, so results do not depend on how sequences are grouped.
template <typename Scalar>
std::vector<Latent<Scalar>> euler_solve_batch(const BatchFieldFn<Scalar>& field, Eigen::Index channels,
                                              std::span<const Eigen::Index> frames, double frame_rate,
                                              std::span<const Tokens* const> conds, const SamplerConfig& sc,
                                              std::span<SeededRng> rngs) {
    sc.validate();
    const std::size_t n = frames.size();
    if (conds.size() != n || rngs.size() != n) throw UsageError("euler_solve_batch: argument lengths differ");
    std::vector<Latent<Scalar>> xs;
    xs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) xs.push_back(draw_noise<Scalar>(channels, frames[k], frame_rate, rngs[k]));

    const bool guided = sc.cfg_weight != 1.0;
    const auto dt = static_cast<Scalar>(1.0 / sc.nfe);
    std::vector<FieldQuery<Scalar>> queries(guided ? 2 * n : n);
    for (int i = 0; i < sc.nfe; ++i) {
        const double t = static_cast<double>(i) / sc.nfe;
        for (std::size_t k = 0; k < n; ++k) {
            queries[k] = {&xs[k], t, conds[k]};
            if (guided) queries[n + k] = {&xs[k], t, nullptr};
        }
        const auto u = field(std::span<const FieldQuery<Scalar>>(queries));
        for (std::size_t k = 0; k < n; ++k) {
            if (guided)
                xs[k].values() += dt * cfg_combine(u[k], u[n + k], sc.cfg_weight).values();
            else
                xs[k].values() += dt * u[k].values();
        }
    }
    return xs;
}

template <typename Scalar>
FieldFn<Scalar> model_field(const VectorFieldParams<Scalar>& params) {
    return [&params](const Latent<Scalar>& x, double t, const Tokens* cond) { return forward(params, x, t, cond); };
}

template <typename Scalar>
BatchFieldFn<Scalar> model_batch_field(const VectorFieldParams<Scalar>& params) {
    return [&params](std::span<const FieldQuery<Scalar>> q) { return forward_batch(params, q); };
}

}  // namespace rsflow
