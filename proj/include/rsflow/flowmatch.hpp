#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rsflow/augment.hpp"
#include "rsflow/latent.hpp"
#include "rsflow/rng.hpp"
#include "rsflow/tokens.hpp"
#include "rsflow/vectorfield.hpp"

namespace rsflow {

struct LossWeights {
    double lambda_rand = 0.2;
    double lambda_aug = 0.2;

    static constexpr LossWeights baseline() { return {0.0, 0.0}; }
    static constexpr LossWeights contrastive() { return {0.2, 0.0}; }
    static constexpr LossWeights robust() { return {0.2, 0.2}; }

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double pos = 0.0;
    double rand = 0.0;
    double aug = 0.0;
    double total = 0.0;
};

/// total = pos - lambda_rand * rand - lambda_aug * aug, rounded once.
///
/// The products are split exactly with fma and the five pieces are summed
/// with Neumaier compensation, so cancellation between the terms does not
/// cost more than the final rounding.
inline LossBreakdown combine_losses(double pos, double rand, double aug, const LossWeights& w) {
    const double hr = w.lambda_rand * rand;
    const double ha = w.lambda_aug * aug;
    const double terms[] = {-hr, -std::fma(w.lambda_rand, rand, -hr), -ha, -std::fma(w.lambda_aug, aug, -ha)};
    double sum = pos, carry = 0.0;
    for (const double x : terms) {
        const double t = sum + x;
        carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return {pos, rand, aug, sum + carry};
}

template <typename Scalar>
struct FlowSample {
    Latent<Scalar> eps;
    double t = 0.0;
    Latent<Scalar> x_t;
};

/// eps ~ N(0, I) drawn frame-major, then t ~ U(0, 1) unless forced, and
/// x_t = (1 - t) eps + t x.
template <typename Scalar>
FlowSample<Scalar> sample_path(const Latent<Scalar>& x, SeededRng& rng, std::optional<double> forced_t = std::nullopt) {
    Latent<Scalar> eps(x.channels(), x.frames(), x.frame_rate());
    for (Eigen::Index i = 0; i < eps.values().size(); ++i) eps.data()[i] = static_cast<Scalar>(rng.normal());
    const double t = forced_t ? *forced_t : rng.uniform();
    const auto a = static_cast<Scalar>(1.0 - t);
    const auto b = static_cast<Scalar>(t);
    Latent<Scalar> x_t(Matrix<Scalar>(a * eps.values() + b * x.values()), x.frame_rate());
    return {std::move(eps), t, std::move(x_t)};
}

/// v(x, eps) = x - eps
template <typename Scalar>
Latent<Scalar> velocity(const Latent<Scalar>& x, const Latent<Scalar>& eps) {
    require_same_shape(x, eps, "velocity");
    return Latent<Scalar>(Matrix<Scalar>(x.values() - eps.values()), x.frame_rate());
}

template <typename Scalar>
struct TrainExample {
    Latent<Scalar> latent;
    Tokens tokens;
};

/// Everything a training step sampled or derived, for inspection in tests.
template <typename Scalar>
struct StepTrace {
    std::vector<FlowSample<Scalar>> paths;
    std::vector<bool> dropped_condition;
    std::vector<Latent<Scalar>> x_rand;
    std::vector<AugmentOutcome<Scalar>> augments;
    std::vector<Latent<Scalar>> v_pos, v_rand, v_aug;
    std::vector<Latent<Scalar>> prediction;
};

template <typename Scalar>
struct StepResult {
    LossBreakdown losses;
    VectorFieldParams<Scalar> grads;
    /// Set when a negative term exceeds ten times the positive term.
    bool divergence_warning = false;
};

/// Test hook invoked on the model outputs before the losses are formed.
template <typename Scalar>
using OutputHook = std::function<void(std::vector<Latent<Scalar>>& prediction,
                                      const std::vector<Latent<Scalar>>& v_pos)>;

/// One RobustSpeechFlow training step over a uniform-length batch.
///
/// Item i draws from rng.substream(i): its "path" substream gives (eps, t),
/// "cond" decides condition dropout and "augment" builds the failure-mode
/// negative. The same eps serves the positive, random and augmented
/// targets. Losses are means over batch, channels and frames; gradients are
/// those of the total objective.
template <typename Scalar>
StepResult<Scalar> training_step(std::span<const TrainExample<Scalar>> batch, const VectorFieldParams<Scalar>& params,
                                 const Latent<Scalar>& silence, const LossWeights& weights,
                                 const AugmentConfig& aug_cfg, const SeededRng& rng,
                                 StepTrace<Scalar>* trace = nullptr, const OutputHook<Scalar>* hook = nullptr) {
    const std::size_t B = batch.size();
    if (B == 0) throw BatchTooSmallError("training_step: empty batch");
    for (const auto& ex : batch)
        require_same_shape(ex.latent, batch.front().latent, "training_step (batch items must share C and T)");

    std::vector<Latent<Scalar>> latents;
    latents.reserve(B);
    for (const auto& ex : batch) latents.push_back(ex.latent);
    const std::vector<Latent<Scalar>> x_rand = roll_batch(latents);

    std::vector<FlowSample<Scalar>> paths;
    std::vector<std::optional<Tokens>> conds;
    std::vector<AugmentOutcome<Scalar>> augments;
    std::vector<Latent<Scalar>> v_pos, v_rand, v_aug;
    for (std::size_t i = 0; i < B; ++i) {
        const SeededRng item = rng.substream(static_cast<std::uint64_t>(i));
        SeededRng path_rng = item.substream("path");
        SeededRng cond_rng = item.substream("cond");
        SeededRng aug_rng = item.substream("augment");
        paths.push_back(sample_path(latents[i], path_rng));
        conds.push_back(maybe_drop_condition(batch[i].tokens, cond_rng, params.config.uncond_prob));
        augments.push_back(augment(latents[i], silence, aug_rng, aug_cfg));
        const auto& eps = paths.back().eps;
        v_pos.push_back(velocity(latents[i], eps));
        v_rand.push_back(velocity(x_rand[i], eps));
        v_aug.push_back(velocity(augments.back().latent, eps));
    }

    std::vector<FieldQuery<Scalar>> queries;
    queries.reserve(B);
    for (std::size_t i = 0; i < B; ++i)
        queries.push_back({&paths[i].x_t, paths[i].t, conds[i] ? &*conds[i] : nullptr});
    ForwardCache<Scalar> cache;
    auto prediction = forward_batch(params, std::span<const FieldQuery<Scalar>>(queries), &cache);
    if (hook) (*hook)(prediction, v_pos);

    const double per_item = static_cast<double>(latents.front().values().size());
    const double n = per_item * static_cast<double>(B);
    double pos = 0.0, rand = 0.0, aug = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        pos += mse(prediction[i], v_pos[i]) * per_item;
        rand += mse(prediction[i], v_rand[i]) * per_item;
        aug += mse(prediction[i], v_aug[i]) * per_item;
    }
    StepResult<Scalar> result;
    result.losses = combine_losses(pos / n, rand / n, aug / n, weights);
    result.divergence_warning =
        result.losses.rand > 10.0 * result.losses.pos || result.losses.aug > 10.0 * result.losses.pos;

    // dL/du = 2/N [(u - v_pos) - lambda_rand (u - v_rand) - lambda_aug (u - v_aug)]
    const auto scale = static_cast<Scalar>(2.0 / n);
    const auto lr_ = static_cast<Scalar>(weights.lambda_rand);
    const auto la = static_cast<Scalar>(weights.lambda_aug);
    std::vector<Latent<Scalar>> output_grads;
    output_grads.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& u = prediction[i].values();
        Matrix<Scalar> g = scale * ((u - v_pos[i].values()) - lr_ * (u - v_rand[i].values()) -
                                    la * (u - v_aug[i].values()));
        output_grads.emplace_back(std::move(g), prediction[i].frame_rate());
    }
    result.grads = backward(params, cache, std::span<const Latent<Scalar>>(output_grads));

    if (trace) {
        trace->paths = paths;
        trace->dropped_condition.clear();
        for (const auto& c : conds) trace->dropped_condition.push_back(!c.has_value());
        trace->x_rand = x_rand;
        trace->augments = augments;
        trace->v_pos = v_pos;
        trace->v_rand = v_rand;
        trace->v_aug = v_aug;
        trace->prediction = prediction;
    }
    return result;
}

}  // namespace rsflow
