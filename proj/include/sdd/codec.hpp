#pragma once

#include "sdd/error.hpp"
#include "sdd/matrix.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

// =============================================================================
// Extended-state codec: data rows <-> [dense | sparsity-bit] rows.
//
// Encoding appends one sparsity bit (SB) per dimension: +1 where the original
// value is nonzero, -1 where it is exactly zero. Bits are computed on the
// ORIGINAL values, before affine scaling. Decoding clamps to [-1, 1], inverts
// the scaling, and multiplies by the thresholded bits so masked entries come
// out as exact 0.0, never an epsilon.
// =============================================================================

namespace sdd {

// A batch of points in original data units. Exact zeros are meaningful.
struct DataBatch {
    Matrix values;  // n x d

    std::size_t n() const noexcept { return values.rows(); }
    std::size_t d() const noexcept { return values.cols(); }
};

// A batch of joint [dense | SB] rows the diffusion process operates on.
struct ExtendedState {
    Matrix values;  // n x 2d

    std::size_t n() const noexcept { return values.rows(); }
    std::size_t d() const noexcept { return values.cols() / 2; }
};

// Affine map between original units and [-1, 1]. Either one global (lo, hi)
// pair or one pair per feature.
class ScaleSpec {
public:
    ScaleSpec() : lo_{-1.0}, hi_{1.0} {}

    static ScaleSpec global(double lo, double hi) {
        check_pair(lo, hi);
        ScaleSpec s;
        s.lo_ = {lo};
        s.hi_ = {hi};
        return s;
    }

    static ScaleSpec per_feature(std::vector<double> lo, std::vector<double> hi) {
        if (lo.empty() || lo.size() != hi.size())
            throw DomainError("ScaleSpec: lo/hi vectors must be non-empty and equal-sized");
        for (std::size_t j = 0; j < lo.size(); ++j) check_pair(lo[j], hi[j]);
        ScaleSpec s;
        s.lo_ = std::move(lo);
        s.hi_ = std::move(hi);
        return s;
    }

    // Observed data range. Global mode pools all entries; per-feature mode
    // fits each column separately.
    static ScaleSpec fit(const DataBatch& batch, bool per_feature_mode = false) {
        if (batch.values.empty()) throw DomainError("ScaleSpec::fit: empty batch");
        if (!per_feature_mode) {
            double lo = batch.values.data()[0], hi = lo;
            for (std::size_t i = 0; i < batch.values.size(); ++i) {
                lo = std::min(lo, batch.values.data()[i]);
                hi = std::max(hi, batch.values.data()[i]);
            }
            return global(lo, hi);
        }
        std::vector<double> lo(batch.d()), hi(batch.d());
        for (std::size_t j = 0; j < batch.d(); ++j) {
            lo[j] = hi[j] = batch.values(0, j);
            for (std::size_t i = 1; i < batch.n(); ++i) {
                lo[j] = std::min(lo[j], batch.values(i, j));
                hi[j] = std::max(hi[j], batch.values(i, j));
            }
        }
        return per_feature(std::move(lo), std::move(hi));
    }

    bool per_feature_mode() const noexcept { return lo_.size() > 1; }
    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }

    double lo_at(std::size_t j) const noexcept { return lo_[per_feature_mode() ? j : 0]; }
    double hi_at(std::size_t j) const noexcept { return hi_[per_feature_mode() ? j : 0]; }

    // Original units -> [-1, 1].
    double to_unit(double x, std::size_t j) const {
        const double lo = lo_at(j), hi = hi_at(j);
        if (x < lo || x > hi) throw DomainError("ScaleSpec: value outside source range");
        return 2.0 * (x - lo) / (hi - lo) - 1.0;
    }

    // [-1, 1] -> original units.
    double from_unit(double v, std::size_t j) const noexcept {
        const double lo = lo_at(j), hi = hi_at(j);
        return lo + (v + 1.0) * 0.5 * (hi - lo);
    }

    friend bool operator==(const ScaleSpec& a, const ScaleSpec& b) {
        return a.lo_ == b.lo_ && a.hi_ == b.hi_;
    }

private:
    static void check_pair(double lo, double hi) {
        if (!(lo < hi)) throw DomainError("ScaleSpec: require lo < hi");
        if (!std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("ScaleSpec: non-finite bound");
    }

    std::vector<double> lo_, hi_;
};

// [dense | bits] with bits from the original (pre-scaling) values.
inline ExtendedState encode(const DataBatch& batch, const ScaleSpec& scale) {
    const std::size_t n = batch.n(), d = batch.d();
    if (scale.per_feature_mode() && scale.lo().size() != d)
        throw ShapeError("encode: per-feature scale size != d");
    ExtendedState out{Matrix(n, 2 * d)};
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = batch.values.row(i);
        double* dst = out.values.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            dst[j] = scale.to_unit(src[j], j);
            dst[d + j] = src[j] != 0.0 ? 1.0 : -1.0;
        }
    }
    return out;
}

// Clamp, invert the scaling, and mask by thresholded bits. An entry is
// exactly 0 in the output iff its SB logit <= 0 (strict '>' threshold).
inline DataBatch decode(const ExtendedState& state, const ScaleSpec& scale) {
    if (state.values.cols() % 2 != 0) throw ShapeError("decode: column count must be even");
    const std::size_t n = state.n(), d = state.d();
    if (scale.per_feature_mode() && scale.lo().size() != d)
        throw ShapeError("decode: per-feature scale size != d");
    DataBatch out{Matrix(n, d)};
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = state.values.row(i);
        double* dst = out.values.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            if (src[d + j] > 0.0) {
                const double v = std::clamp(src[j], -1.0, 1.0);
                dst[j] = scale.from_unit(v, j);
            } else {
                dst[j] = 0.0;
            }
        }
    }
    return out;
}

// Scale-only encode for models without SB channels.
inline Matrix encode_dense(const DataBatch& batch, const ScaleSpec& scale) {
    const std::size_t n = batch.n(), d = batch.d();
    if (scale.per_feature_mode() && scale.lo().size() != d)
        throw ShapeError("encode_dense: per-feature scale size != d");
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = scale.to_unit(batch.values(i, j), j);
    return out;
}

// Clamp and invert the scaling; no sparsification.
inline DataBatch decode_dense(const Matrix& pred, const ScaleSpec& scale) {
    if (scale.per_feature_mode() && scale.lo().size() != pred.cols())
        throw ShapeError("decode_dense: per-feature scale size != d");
    DataBatch out{Matrix(pred.rows(), pred.cols())};
    for (std::size_t i = 0; i < pred.rows(); ++i)
        for (std::size_t j = 0; j < pred.cols(); ++j)
            out.values(i, j) = scale.from_unit(std::clamp(pred(i, j), -1.0, 1.0), j);
    return out;
}

// Fraction of exact zeros per row.
inline std::vector<double> sparsity_per_row(const DataBatch& batch) {
    std::vector<double> s(batch.n());
    for (std::size_t i = 0; i < batch.n(); ++i) {
        std::size_t zeros = 0;
        for (std::size_t j = 0; j < batch.d(); ++j)
            if (batch.values(i, j) == 0.0) ++zeros;
        s[i] = batch.d() == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(batch.d());
    }
    return s;
}

inline double mean_sparsity(const DataBatch& batch) {
    if (batch.n() == 0) return 0.0;
    const auto s = sparsity_per_row(batch);
    double acc = 0.0;
    for (double x : s) acc += x;
    return acc / static_cast<double>(s.size());
}

}  // namespace sdd
