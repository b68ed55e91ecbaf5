#pragma once

#include "sdd/error.hpp"
#include "sdd/matrix.hpp"
#include "sdd/rng.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

// =============================================================================
// Skip-connected MLP denoiser.
//
// The network models rows of width `w` and predicts the clean state from a
// noisy one:
//
//   input   = [x_t | x_sc]                     (n x 2w, self-conditioning)
//   h_0     = silu(input W_0 + b_0 + temb P)   (time embedding into layer 0)
//   h_l     = silu([h_{l-1} | input] W_l + b_l)   l = 1..L-1 (dense input skip)
//   output  = h_{L-1} W_L + b_L                (n x w, no activation; the SB
//                                               half of the row is raw logits)
//
// With no hidden layers the net degenerates to output = input W + b and the
// time embedding is unused. backward() returns exact analytic gradients for
// every parameter given a cached forward pass.
// =============================================================================

namespace sdd {

enum class ModelKind { sdd_joint, dense_baseline };

inline double silu(double z) noexcept {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return z * s;
}

// Interpret a raw prediction as a state-space estimate of the clean input:
// dense coordinates clamp to [-1, 1], SB logits map to their expected bit
// 2 sigmoid(z) - 1 = tanh(z / 2). The backward-step rules assume the
// prediction estimates the clean STATE; raw logits overshoot it (log-odds
// grow without bound) and destabilize the reverse chain.
inline void to_state_estimate(Matrix& pred, bool joint_bits) {
    const std::size_t cols = pred.cols();
    const std::size_t d = joint_bits ? cols / 2 : cols;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        double* row = pred.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = std::clamp(row[j], -1.0, 1.0);
        for (std::size_t j = d; j < cols; ++j) row[j] = std::tanh(row[j] * 0.5);
    }
}

inline double silu_grad(double z) noexcept {
    const double s = 1.0 / (1.0 + std::exp(-z));
    return s * (1.0 + z * (1.0 - s));
}

// Sinusoidal embedding of t in [0, 1]: interleaved (sin, cos) pairs at
// geometrically spaced frequencies from 1 to max_freq.
class TimeEmbedding {
public:
    explicit TimeEmbedding(std::size_t dim, double max_freq = 1000.0)
        : dim_(dim), max_freq_(max_freq) {
        if (dim < 2 || dim % 2 != 0) throw DomainError("TimeEmbedding: dim must be even and >= 2");
    }

    std::size_t dim() const noexcept { return dim_; }

    Matrix embed(const std::vector<double>& t) const {
        const std::size_t half = dim_ / 2;
        Matrix out(t.size(), dim_);
        for (std::size_t i = 0; i < t.size(); ++i) {
            for (std::size_t f = 0; f < half; ++f) {
                const double expo = half == 1 ? 0.0 : static_cast<double>(f) / (half - 1);
                const double w = std::pow(max_freq_, expo);
                out(i, 2 * f) = std::sin(w * t[i]);
                out(i, 2 * f + 1) = std::cos(w * t[i]);
            }
        }
        return out;
    }

private:
    std::size_t dim_;
    double max_freq_;
};

// Activations cached by forward() for the exact backward pass.
struct ForwardCache {
    bool valid = false;
    Matrix input;                  // n x 2w
    Matrix temb;                   // n x temb_dim
    std::vector<Matrix> layer_in;  // input to hidden layer l
    std::vector<Matrix> pre;       // hidden pre-activations
    Matrix out_in;                 // input to the output layer
};

// One gradient matrix per parameter matrix, in Denoiser::params() order.
struct GradientSet {
    std::vector<Matrix> grads;
};

class Denoiser {
public:
    Denoiser() = default;

    // Fan-in-scaled Gaussian weights, zero biases. Draw order (fixed for
    // reproducibility): temb projection, then layer weights in order.
    static Denoiser init(Rng& rng, std::size_t width, std::vector<std::size_t> hidden,
                         std::size_t temb_dim) {
        if (width < 1) throw DomainError("Denoiser::init: width must be >= 1");
        Denoiser net;
        net.width_ = width;
        net.hidden_ = std::move(hidden);
        net.temb_dim_ = temb_dim;

        const std::size_t in_w = 2 * width;
        if (!net.hidden_.empty()) {
            net.temb_proj_ = gaussian_scaled(rng, temb_dim, net.hidden_[0]);
        }
        std::size_t prev = in_w;
        for (std::size_t l = 0; l < net.hidden_.size(); ++l) {
            const std::size_t fan_in = l == 0 ? in_w : net.hidden_[l - 1] + in_w;
            net.weights_.push_back(gaussian_scaled(rng, fan_in, net.hidden_[l]));
            net.biases_.emplace_back(1, net.hidden_[l]);
            prev = net.hidden_[l];
        }
        net.weights_.push_back(gaussian_scaled(rng, prev, width));
        net.biases_.emplace_back(1, width);
        return net;
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t input_width() const noexcept { return 2 * width_; }
    const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
    std::size_t temb_dim() const noexcept { return temb_dim_; }

    // Parameter matrices in fixed order: [temb_proj,] W_0, b_0, ..., W_L, b_L.
    std::vector<Matrix*> params() {
        std::vector<Matrix*> p;
        if (!hidden_.empty()) p.push_back(&temb_proj_);
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            p.push_back(&weights_[l]);
            p.push_back(&biases_[l]);
        }
        return p;
    }

    std::vector<const Matrix*> params() const {
        std::vector<const Matrix*> p;
        if (!hidden_.empty()) p.push_back(&temb_proj_);
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            p.push_back(&weights_[l]);
            p.push_back(&biases_[l]);
        }
        return p;
    }

    std::size_t param_count() const noexcept {
        std::size_t c = 0;
        for (const Matrix* m : params()) c += m->size();
        return c;
    }

    Matrix forward(const Matrix& x_t, const std::vector<double>& t, const Matrix& x_sc,
                   ForwardCache* cache = nullptr) const {
        if (x_t.cols() != width_) throw ShapeError("forward: x_t width != model width");
        if (!x_t.same_shape(x_sc)) throw ShapeError("forward: x_sc shape != x_t shape");
        if (t.size() != x_t.rows()) throw ShapeError("forward: t length != batch rows");

        Matrix input = Matrix::hcat(x_t, x_sc);
        Matrix temb;
        if (!hidden_.empty()) temb = TimeEmbedding(temb_dim_).embed(t);

        if (cache) {
            *cache = ForwardCache{};
            cache->input = input;
            cache->temb = temb;
        }

        Matrix act = input;
        for (std::size_t l = 0; l < hidden_.size(); ++l) {
            Matrix in_l = l == 0 ? input : Matrix::hcat(act, input);
            Matrix pre = matmul(in_l, weights_[l]);
            add_row_inplace(pre, biases_[l]);
            if (l == 0) {
                Matrix tp = matmul(temb, temb_proj_);
                pre = add(pre, tp);
            }
            if (cache) {
                cache->layer_in.push_back(std::move(in_l));
                cache->pre.push_back(pre);
            }
            act = pre;
            for (std::size_t i = 0; i < act.size(); ++i) act.data()[i] = silu(act.data()[i]);
        }

        const Matrix& out_in = act;
        Matrix out = matmul(out_in, weights_.back());
        add_row_inplace(out, biases_.back());
        if (cache) {
            cache->out_in = out_in;
            cache->valid = true;
        }
        return out;
    }

    // Exact gradients of a scalar loss w.r.t. every parameter, given the
    // upstream gradient d(loss)/d(output). Optionally also accumulates the
    // gradient w.r.t. the concatenated input.
    GradientSet backward(const ForwardCache& cache, const Matrix& d_out,
                         Matrix* d_input = nullptr) const {
        if (!cache.valid) throw StateError("backward: no cached forward pass");
        if (d_out.rows() != cache.input.rows() || d_out.cols() != width_)
            throw ShapeError("backward: upstream gradient shape mismatch");

        const std::size_t L = hidden_.size();
        std::vector<Matrix> d_w(weights_.size());
        std::vector<Matrix> d_b(biases_.size());
        Matrix d_temb_proj;
        if (d_input) *d_input = Matrix(cache.input.rows(), cache.input.cols());

        d_w[L] = matmul_at(cache.out_in, d_out);
        d_b[L] = colsum(d_out);
        Matrix d_act = matmul_bt(d_out, weights_[L]);  // grad w.r.t. h_{L-1} (or input if L==0)

        if (L == 0) {
            if (d_input) *d_input = d_act;
            GradientSet gs;
            gs.grads.push_back(std::move(d_w[0]));
            gs.grads.push_back(std::move(d_b[0]));
            return gs;
        }

        for (std::size_t l = L; l-- > 0;) {
            Matrix d_pre = d_act;
            for (std::size_t i = 0; i < d_pre.size(); ++i)
                d_pre.data()[i] *= silu_grad(cache.pre[l].data()[i]);

            d_w[l] = matmul_at(cache.layer_in[l], d_pre);
            d_b[l] = colsum(d_pre);

            if (l == 0) {
                d_temb_proj = matmul_at(cache.temb, d_pre);
                if (d_input) {
                    Matrix d_in = matmul_bt(d_pre, weights_[0]);
                    axpy_inplace(*d_input, 1.0, d_in);
                }
                break;
            }
            Matrix d_in = matmul_bt(d_pre, weights_[l]);  // n x (h_{l-1} + 2w)
            const std::size_t h_prev = hidden_[l - 1];
            d_act = d_in.slice_cols(0, h_prev);
            if (d_input) {
                Matrix d_skip = d_in.slice_cols(h_prev, d_in.cols());
                axpy_inplace(*d_input, 1.0, d_skip);
            }
        }

        GradientSet gs;
        gs.grads.push_back(std::move(d_temb_proj));
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            gs.grads.push_back(std::move(d_w[l]));
            gs.grads.push_back(std::move(d_b[l]));
        }
        return gs;
    }

    friend bool operator==(const Denoiser& a, const Denoiser& b) {
        return a.width_ == b.width_ && a.hidden_ == b.hidden_ && a.temb_dim_ == b.temb_dim_ &&
               a.temb_proj_ == b.temb_proj_ && a.weights_ == b.weights_ && a.biases_ == b.biases_;
    }

    // Checkpoint support: raw access in params() order metadata.
    Matrix& temb_proj() noexcept { return temb_proj_; }
    std::vector<Matrix>& weights() noexcept { return weights_; }
    std::vector<Matrix>& biases() noexcept { return biases_; }
    const Matrix& temb_proj() const noexcept { return temb_proj_; }
    const std::vector<Matrix>& weights() const noexcept { return weights_; }
    const std::vector<Matrix>& biases() const noexcept { return biases_; }

    // Rebuilds a net from topology + flat parameter list (checkpoint load).
    static Denoiser from_parts(std::size_t width, std::vector<std::size_t> hidden,
                               std::size_t temb_dim, const std::vector<Matrix>& mats) {
        Denoiser net;
        net.width_ = width;
        net.hidden_ = std::move(hidden);
        net.temb_dim_ = temb_dim;
        std::size_t k = 0;
        const std::size_t expected = (net.hidden_.empty() ? 0 : 1) + 2 * (net.hidden_.size() + 1);
        if (mats.size() != expected) throw FormatError("checkpoint: parameter count mismatch");
        if (!net.hidden_.empty()) net.temb_proj_ = mats[k++];
        for (std::size_t l = 0; l < net.hidden_.size() + 1; ++l) {
            net.weights_.push_back(mats[k++]);
            net.biases_.push_back(mats[k++]);
        }
        return net;
    }

private:
    static Matrix gaussian_scaled(Rng& rng, std::size_t rows, std::size_t cols) {
        Matrix m = Matrix::gaussian(rng, rows, cols);
        const double s = 1.0 / std::sqrt(static_cast<double>(rows));
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] *= s;
        return m;
    }

    std::size_t width_ = 0;
    std::vector<std::size_t> hidden_;
    std::size_t temb_dim_ = 0;
    Matrix temb_proj_;             // temb_dim x hidden[0]
    std::vector<Matrix> weights_;  // hidden layers then output layer
    std::vector<Matrix> biases_;   // 1 x out each
};

}  // namespace sdd
