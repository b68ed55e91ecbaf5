#pragma once

#include "sdd/codec.hpp"
#include "sdd/denoiser.hpp"
#include "sdd/error.hpp"
#include "sdd/matrix.hpp"
#include "sdd/rng.hpp"
#include "sdd/schedule.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <vector>

// =============================================================================
// Training: joint L2 + cross-entropy loss on the extended state, one-step
// self-conditioning with stop-gradient, Adam, and an EMA shadow copy.
//
// Per-step draw order (fixed; reproducibility depends on it):
//   1. t_i ~ U(0, 1), one per batch row
//   2. eps ~ N(0, I), batch-shaped, row-major
//   3. one uniform for the self-conditioning coin
// =============================================================================

namespace sdd {

struct TrainConfig {
    double learning_rate = 2e-4;   // constant, no schedule
    std::size_t batch_size = 64;
    std::size_t total_steps = 5000;
    double ema_decay = 0.9999;
    double self_cond_prob = 0.5;
    std::uint64_t seed = 0;
    ScheduleKind schedule_kind = ScheduleKind::cosine;
    double schedule_offset = 0.008;
    ModelKind model_kind = ModelKind::sdd_joint;
    std::vector<std::size_t> hidden = {256, 256, 256};
    std::size_t temb_dim = 64;
    bool per_feature_scale = false;

    void validate() const {
        if (!(learning_rate > 0.0)) throw DomainError("config: learning-rate must be > 0");
        if (!(ema_decay >= 0.0 && ema_decay < 1.0))
            throw DomainError("config: ema-decay must be in [0, 1)");
        if (!(self_cond_prob >= 0.0 && self_cond_prob <= 1.0))
            throw DomainError("config: self-cond-prob must be in [0, 1]");
        if (batch_size < 1) throw DomainError("config: batch-size must be >= 1");
        if (total_steps < 1) throw DomainError("config: total-steps must be >= 1");
        if (hidden.empty()) throw DomainError("config: hidden layer list must be non-empty");
    }
};

struct LossBreakdown {
    double l2 = 0.0;
    double ce = 0.0;
    double total = 0.0;
};

// log(1 + exp(-m)) without overflow.
inline double softplus_neg(double m) noexcept {
    return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

// Eq-style joint loss on n x 2d states: mean squared error over the dense
// half plus mean logistic loss over the SB half, unweighted sum. Targets in
// the SB half must be exactly -1 or +1.
inline LossBreakdown sdd_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw ShapeError("loss: shape mismatch");
    if (pred.cols() % 2 != 0) throw ShapeError("loss: column count must be even");
    const std::size_t n = pred.rows(), d = pred.cols() / 2;
    double l2 = 0.0, ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = pred.row(i);
        const double* y = target.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double e = p[j] - y[j];
            l2 += e * e;
        }
        for (std::size_t j = d; j < 2 * d; ++j) {
            if (y[j] != 1.0 && y[j] != -1.0)
                throw LabelError("loss: SB target must be exactly -1 or +1");
            ce += softplus_neg(y[j] * p[j]);
        }
    }
    const double denom = static_cast<double>(n * d);
    LossBreakdown lb;
    lb.l2 = l2 / denom;
    lb.ce = ce / denom;
    lb.total = lb.l2 + lb.ce;
    return lb;
}

// d(total)/d(pred) for sdd_loss.
inline Matrix sdd_loss_grad(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw ShapeError("loss grad: shape mismatch");
    const std::size_t n = pred.rows(), d = pred.cols() / 2;
    const double denom = static_cast<double>(n * d);
    Matrix g(n, 2 * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = pred.row(i);
        const double* y = target.row(i);
        double* gi = g.row(i);
        for (std::size_t j = 0; j < d; ++j) gi[j] = 2.0 * (p[j] - y[j]) / denom;
        for (std::size_t j = d; j < 2 * d; ++j) {
            // d softplus(-y z)/dz = -y * sigmoid(-y z)
            const double m = y[j] * p[j];
            const double s = 1.0 / (1.0 + std::exp(m));
            gi[j] = -y[j] * s / denom;
        }
    }
    return g;
}

// Plain mean-squared-error path for the dense (no-SB) baseline.
inline LossBreakdown dense_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw ShapeError("loss: shape mismatch");
    double l2 = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred.data()[i] - target.data()[i];
        l2 += e * e;
    }
    LossBreakdown lb;
    lb.l2 = l2 / static_cast<double>(pred.size());
    lb.ce = 0.0;
    lb.total = lb.l2;
    return lb;
}

inline Matrix dense_loss_grad(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw ShapeError("loss grad: shape mismatch");
    Matrix g(pred.rows(), pred.cols());
    const double denom = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.data()[i] = 2.0 * (pred.data()[i] - target.data()[i]) / denom;
    return g;
}

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    static AdamState like(const Denoiser& net) {
        AdamState st;
        for (const Matrix* p : net.params()) {
            st.m.emplace_back(p->rows(), p->cols());
            st.v.emplace_back(p->rows(), p->cols());
        }
        return st;
    }
};

// Standard bias-corrected Adam.
inline void adam_update(Denoiser& net, const GradientSet& grads, AdamState& st, double lr) {
    auto params = net.params();
    if (grads.grads.size() != params.size() || st.m.size() != params.size())
        throw ShapeError("adam: gradient/state count mismatch");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = grads.grads[k];
        if (!p.same_shape(g)) throw ShapeError("adam: gradient shape mismatch");
        Matrix& m = st.m[k];
        Matrix& v = st.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data()[i];
            m.data()[i] = st.beta1 * m.data()[i] + (1.0 - st.beta1) * gi;
            v.data()[i] = st.beta2 * v.data()[i] + (1.0 - st.beta2) * gi * gi;
            const double mhat = m.data()[i] / bc1;
            const double vhat = v.data()[i] / bc2;
            p.data()[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

// ema <- decay * ema + (1 - decay) * params
inline void ema_update(Denoiser& ema, const Denoiser& net, double decay) {
    auto e = ema.params();
    auto p = net.params();
    if (e.size() != p.size()) throw ShapeError("ema: parameter count mismatch");
    for (std::size_t k = 0; k < e.size(); ++k)
        for (std::size_t i = 0; i < e[k]->size(); ++i)
            e[k]->data()[i] = decay * e[k]->data()[i] + (1.0 - decay) * p[k]->data()[i];
}

// Instrumentation hook for tests: what the step actually fed as x_sc.
struct StepTrace {
    bool self_cond_used = false;
    Matrix x_sc;
};

inline LossBreakdown train_step(Denoiser& net, AdamState& adam, Denoiser& ema,
                                const DataBatch& batch, const ScaleSpec& scale,
                                const NoiseSchedule& schedule, const TrainConfig& cfg, Rng& rng,
                                StepTrace* trace = nullptr) {
    if (batch.n() == 0) throw DomainError("train_step: empty batch");
    const bool joint = cfg.model_kind == ModelKind::sdd_joint;
    const Matrix x0 = joint ? encode(batch, scale).values : encode_dense(batch, scale);
    const std::size_t n = x0.rows(), w = x0.cols();

    std::vector<double> t(n);
    for (double& ti : t) ti = rng.uniform01();
    const Matrix eps = Matrix::gaussian(rng, n, w);
    const Matrix x_t = forward_diffuse(x0, t, eps, schedule);

    Matrix x_sc(n, w);
    bool used = false;
    const double coin = rng.uniform01();
    if (coin < cfg.self_cond_prob) {
        // No cache, no backward: the estimate enters the loss as a constant
        // (stop-gradient). Converted to a state estimate exactly as the
        // sampler converts its carried prediction, so the conditioning input
        // has the same distribution at train and sample time.
        x_sc = net.forward(x_t, t, x_sc);
        to_state_estimate(x_sc, joint);
        used = true;
    }
    if (trace) {
        trace->self_cond_used = used;
        trace->x_sc = x_sc;
    }

    ForwardCache cache;
    const Matrix pred = net.forward(x_t, t, x_sc, &cache);
    const LossBreakdown lb = joint ? sdd_loss(pred, x0) : dense_loss(pred, x0);
    if (!std::isfinite(lb.total))
        throw DivergenceError("train_step: non-finite loss", adam.step);

    const Matrix d_pred = joint ? sdd_loss_grad(pred, x0) : dense_loss_grad(pred, x0);
    const GradientSet grads = net.backward(cache, d_pred);
    adam_update(net, grads, adam, cfg.learning_rate);
    ema_update(ema, net, cfg.ema_decay);
    return lb;
}

struct TrainResult {
    Denoiser model;
    Denoiser ema;
    std::vector<LossBreakdown> log;  // one entry per step
};

// Full training loop over a fixed dataset. Batches walk a permutation that is
// reshuffled each epoch from a dedicated stream, so data order and model
// draws don't interleave.
inline TrainResult train(const DataBatch& data, const ScaleSpec& scale, const TrainConfig& cfg) {
    cfg.validate();
    if (data.n() == 0) throw DomainError("train: empty dataset");

    Rng rng(cfg.seed);
    Rng shuffle_rng = rng.split(0xDA7A);
    const NoiseSchedule schedule(cfg.schedule_kind, cfg.schedule_offset);
    const std::size_t width = cfg.model_kind == ModelKind::sdd_joint ? 2 * data.d() : data.d();

    TrainResult out;
    out.model = Denoiser::init(rng, width, cfg.hidden, cfg.temb_dim);
    out.ema = out.model;
    AdamState adam = AdamState::like(out.model);
    out.log.reserve(cfg.total_steps);

    std::vector<std::size_t> order(data.n());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();  // forces a shuffle on first use

    DataBatch batch{Matrix(std::min(cfg.batch_size, data.n()), data.d())};
    for (std::size_t step = 0; step < cfg.total_steps; ++step) {
        for (std::size_t b = 0; b < batch.n(); ++b) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) {
                    const auto j = static_cast<std::size_t>(shuffle_rng.uniform01() * i);
                    std::swap(order[i - 1], order[j]);
                }
                cursor = 0;
            }
            const std::size_t src = order[cursor++];
            for (std::size_t j = 0; j < data.d(); ++j)
                batch.values(b, j) = data.values(src, j);
        }
        out.log.push_back(train_step(out.model, adam, out.ema, batch, scale, schedule, cfg, rng));
    }
    return out;
}

inline void write_loss_log(std::ostream& os, const std::vector<LossBreakdown>& log) {
    os << "step,l2,ce,total\n";
    char buf[128];
    for (std::size_t i = 0; i < log.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, log[i].l2, log[i].ce,
                      log[i].total);
        os << buf;
    }
}

}  // namespace sdd
