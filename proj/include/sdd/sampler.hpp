#pragma once

#include "sdd/checkpoint.hpp"
#include "sdd/codec.hpp"
#include "sdd/denoiser.hpp"
#include "sdd/error.hpp"
#include "sdd/matrix.hpp"
#include "sdd/rng.hpp"
#include "sdd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

// =============================================================================
// Backward diffusion and sparsifying sample generation.
//
// Both step rules are parameterized by the predicted clean state x0_pred.
// The DDPM step is written in the eta form
//
//   x_next = sqrt(a_next) x0 + sqrt(1 - a_next - sigma^2) eps_hat + sigma z
//
// with sigma^2 = eta^2 * (1 - a_next)/(1 - a_now) * (1 - a_now/a_next).
// At eta = 1 this is algebraically the ancestral posterior
// q(x_next | x_t, x0); at eta = 0 it coincides with the DDIM update.
// =============================================================================

namespace sdd {

enum class SamplerKind { ddpm, ddim };

inline std::string to_string(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ddpm") return SamplerKind::ddpm;
    if (s == "ddim") return SamplerKind::ddim;
    throw DomainError("unknown sampler kind: " + s);
}

struct SampleConfig {
    std::size_t steps = 1000;
    SamplerKind kind = SamplerKind::ddim;
    std::uint64_t seed = 0;
    std::size_t batch = 1;
    bool use_ema = true;
    double ddpm_eta = 1.0;

    void validate() const {
        if (steps < 1) throw DomainError("sample: steps must be >= 1");
        if (batch < 1) throw DomainError("sample: batch must be >= 1");
    }
};

namespace detail {

inline void check_step_times(double t_now, double t_next) {
    if (!(t_next >= 0.0 && t_next < t_now && t_now <= 1.0))
        throw DomainError("step: require 0 <= t_next < t_now <= 1");
}

// eps_hat = (x_t - sqrt(a_now) x0) / sqrt(1 - a_now)
inline Matrix predicted_noise(const Matrix& x_t, const Matrix& x0_pred, double a_now) {
    if (!x_t.same_shape(x0_pred)) throw ShapeError("step: x0_pred shape != x_t shape");
    if (!(a_now < 1.0))
        throw DomainError("step: alpha(t_now) == 1 makes the noise estimate degenerate");
    const double ca = std::sqrt(a_now);
    const double inv = 1.0 / std::sqrt(1.0 - a_now);
    Matrix eps(x_t.rows(), x_t.cols());
    for (std::size_t i = 0; i < eps.size(); ++i)
        eps.data()[i] = (x_t.data()[i] - ca * x0_pred.data()[i]) * inv;
    return eps;
}

}  // namespace detail

// Ancestral-posterior noise scale between two times, squared.
inline double ddpm_sigma2(double t_now, double t_next, const NoiseSchedule& schedule) {
    detail::check_step_times(t_now, t_next);
    const double a_now = schedule.alpha(t_now);
    const double a_next = schedule.alpha(t_next);
    return (1.0 - a_next) / (1.0 - a_now) * (1.0 - a_now / a_next);
}

// Deterministic DDIM update.
inline Matrix ddim_step(const Matrix& x_t, const Matrix& x0_pred, double t_now, double t_next,
                        const NoiseSchedule& schedule) {
    detail::check_step_times(t_now, t_next);
    const double a_now = schedule.alpha(t_now);
    const double a_next = schedule.alpha(t_next);
    const Matrix eps = detail::predicted_noise(x_t, x0_pred, a_now);
    const double c0 = std::sqrt(a_next);
    const double ce = std::sqrt(1.0 - a_next);
    Matrix out(x_t.rows(), x_t.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = c0 * x0_pred.data()[i] + ce * eps.data()[i];
    return out;
}

// DDPM step with the injected noise passed explicitly (deterministic core;
// a zero noise matrix yields the posterior mean).
inline Matrix ddpm_step_with_noise(const Matrix& x_t, const Matrix& x0_pred, double t_now,
                                   double t_next, const NoiseSchedule& schedule,
                                   const Matrix& noise, double eta = 1.0) {
    detail::check_step_times(t_now, t_next);
    const double a_now = schedule.alpha(t_now);
    const double a_next = schedule.alpha(t_next);
    const Matrix eps = detail::predicted_noise(x_t, x0_pred, a_now);
    const double sigma2 = eta * eta * std::max(0.0, ddpm_sigma2(t_now, t_next, schedule));
    const double sigma = std::sqrt(sigma2);
    const double c0 = std::sqrt(a_next);
    const double ce = std::sqrt(std::max(0.0, 1.0 - a_next - sigma2));
    if (!noise.same_shape(x_t)) throw ShapeError("ddpm_step: noise shape mismatch");
    Matrix out(x_t.rows(), x_t.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = c0 * x0_pred.data()[i] + ce * eps.data()[i] + sigma * noise.data()[i];
    return out;
}

// Stochastic DDPM step. The noise draw is skipped entirely when the step is
// deterministic (t_next = 0 or eta = 0), keeping draw counts predictable.
inline Matrix ddpm_step(const Matrix& x_t, const Matrix& x0_pred, double t_now, double t_next,
                        const NoiseSchedule& schedule, Rng& rng, double eta = 1.0) {
    detail::check_step_times(t_now, t_next);
    const bool noiseless = t_next <= 0.0 || eta == 0.0;
    const Matrix noise = noiseless ? Matrix(x_t.rows(), x_t.cols())
                                   : Matrix::gaussian(rng, x_t.rows(), x_t.cols());
    return ddpm_step_with_noise(x_t, x0_pred, t_now, t_next, schedule, noise, eta);
}

struct SampleResult {
    DataBatch data;              // decoded, original units, sparsified
    Matrix final_prediction;     // last x0 prediction, clamped to [-1, 1]
};

namespace detail {

// Runs the reverse chain and returns the last raw prediction. Each step's
// prediction is converted to a bounded state estimate (dense clamped, SB
// logits to expected bits) before it enters the step rule and the next
// self-conditioning input; the raw chain diverges within tens of steps.
inline Matrix run_reverse_loop(const Denoiser& net, const SampleConfig& cfg,
                               const NoiseSchedule& schedule, Rng& rng, bool joint_bits) {
    const std::size_t w = net.width();
    Matrix x_t = Matrix::gaussian(rng, cfg.batch, w);
    Matrix x_pred(cfg.batch, w);
    Matrix carried(cfg.batch, w);
    const auto steps = static_cast<double>(cfg.steps);
    std::vector<double> t_batch(cfg.batch);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double t_now = 1.0 - static_cast<double>(step) / steps;
        const double t_next = std::max(1.0 - static_cast<double>(step + 1) / steps, 0.0);
        std::fill(t_batch.begin(), t_batch.end(), t_now);
        // Previous prediction rides along as the self-conditioning input.
        x_pred = net.forward(x_t, t_batch, carried);
        carried = x_pred;
        to_state_estimate(carried, joint_bits);
        x_t = cfg.kind == SamplerKind::ddim
                  ? ddim_step(x_t, carried, t_now, t_next, schedule)
                  : ddpm_step(x_t, carried, t_now, t_next, schedule, rng, cfg.ddpm_eta);
    }
    return x_pred;
}

}  // namespace detail

// Full reverse process for the joint model, ending in sparsification.
inline SampleResult sample_extended(const Denoiser& net, const SampleConfig& cfg,
                                    const NoiseSchedule& schedule, const ScaleSpec& scale) {
    cfg.validate();
    if (net.width() % 2 != 0) throw ShapeError("sample: joint model width must be even");
    Rng rng(cfg.seed);
    Matrix x_pred = detail::run_reverse_loop(net, cfg, schedule, rng, /*joint_bits=*/true);
    SampleResult res;
    res.data = decode(ExtendedState{x_pred}, scale);
    for (std::size_t i = 0; i < x_pred.size(); ++i)
        x_pred.data()[i] = std::clamp(x_pred.data()[i], -1.0, 1.0);
    res.final_prediction = std::move(x_pred);
    return res;
}

inline DataBatch sample(const Denoiser& net, const SampleConfig& cfg,
                        const NoiseSchedule& schedule, const ScaleSpec& scale) {
    return sample_extended(net, cfg, schedule, scale).data;
}

// Plain diffusion sampling for the no-SB baseline: clamp and rescale only.
inline DataBatch sample_dense_baseline(const Denoiser& net, const SampleConfig& cfg,
                                       const NoiseSchedule& schedule, const ScaleSpec& scale) {
    cfg.validate();
    Rng rng(cfg.seed);
    const Matrix x_pred = detail::run_reverse_loop(net, cfg, schedule, rng, /*joint_bits=*/false);
    return decode_dense(x_pred, scale);
}

// Convenience overload resolving EMA vs live weights from a checkpoint.
inline SampleResult sample_checkpoint(const Checkpoint& ckpt, const SampleConfig& cfg) {
    const Denoiser& net = cfg.use_ema ? ckpt.ema : ckpt.model;
    if (ckpt.kind == ModelKind::sdd_joint) {
        return sample_extended(net, cfg, ckpt.schedule, ckpt.scale);
    }
    SampleResult res;
    res.data = sample_dense_baseline(net, cfg, ckpt.schedule, ckpt.scale);
    return res;
}

struct ThresholdResult {
    double threshold = 0.0;
    double target_sparsity = 0.0;
    double achieved_sparsity = 0.0;
    double achieved_prev = 0.0;  // at the previous grid point (selection witness)
    std::size_t grid_index = 0;
    std::size_t grid_size = 0;
    bool converged = false;
    double tolerance = 0.0;
};

// Post-hoc sparsification baseline: smallest threshold on a linear grid over
// [0, max |value|] whose achieved average sparsity reaches the target.
// Entries with |value| <= threshold are zeroed. Unreachable targets set
// converged = false instead of throwing.
inline std::pair<DataBatch, ThresholdResult> threshold_to_sparsity(const DataBatch& batch,
                                                                   double target_sparsity,
                                                                   std::size_t grid_size = 1000,
                                                                   double tolerance = 0.02) {
    if (!(target_sparsity >= 0.0 && target_sparsity <= 1.0))
        throw DomainError("threshold: target sparsity must be in [0, 1]");
    if (grid_size < 2) throw DomainError("threshold: grid size must be >= 2");
    if (batch.values.empty()) throw DomainError("threshold: empty batch");

    std::vector<double> mags(batch.values.size());
    for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::fabs(batch.values.data()[i]);
    std::sort(mags.begin(), mags.end());
    const double max_abs = mags.back();
    const auto total = static_cast<double>(mags.size());

    const auto achieved_at = [&](double tau) {
        const auto it = std::upper_bound(mags.begin(), mags.end(), tau);
        return static_cast<double>(it - mags.begin()) / total;
    };

    ThresholdResult res;
    res.target_sparsity = target_sparsity;
    res.grid_size = grid_size;
    res.tolerance = tolerance;

    double tau = max_abs;
    double achieved = 1.0;
    double achieved_prev = 0.0;
    std::size_t index = grid_size - 1;
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double cand = max_abs * static_cast<double>(i) / static_cast<double>(grid_size - 1);
        const double a = achieved_at(cand);
        if (a >= target_sparsity) {
            tau = cand;
            achieved = a;
            index = i;
            achieved_prev = i == 0 ? a : achieved_at(max_abs * static_cast<double>(i - 1) /
                                                     static_cast<double>(grid_size - 1));
            break;
        }
    }

    res.threshold = tau;
    res.achieved_sparsity = achieved;
    res.achieved_prev = achieved_prev;
    res.grid_index = index;
    res.converged = achieved - target_sparsity <= tolerance;

    DataBatch out{Matrix(batch.n(), batch.d())};
    for (std::size_t i = 0; i < batch.values.size(); ++i) {
        const double v = batch.values.data()[i];
        out.values.data()[i] = std::fabs(v) <= tau ? 0.0 : v;
    }
    return {std::move(out), res};
}

}  // namespace sdd
