#pragma once

#include "sdd/codec.hpp"
#include "sdd/error.hpp"
#include "sdd/matrix.hpp"

#include <cmath>
#include <string>
#include <vector>

// =============================================================================
// Noise schedule alpha(t) on continuous time t in [0, 1] and the forward
// noising map x_t = sqrt(alpha(t)) * x_0 + sqrt(1 - alpha(t)) * eps, applied
// to all channels of the extended state jointly.
// =============================================================================

namespace sdd {

enum class ScheduleKind { cosine, linear_alpha_bar };

inline std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::cosine ? "cosine" : "linear";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "linear" || s == "linear-alpha-bar") return ScheduleKind::linear_alpha_bar;
    throw DomainError("unknown schedule kind: " + s);
}

class NoiseSchedule {
public:
    explicit NoiseSchedule(ScheduleKind kind = ScheduleKind::cosine, double offset = 0.008)
        : kind_(kind), offset_(offset) {
        if (offset < 0.0) throw DomainError("NoiseSchedule: offset must be >= 0");
    }

    ScheduleKind kind() const noexcept { return kind_; }
    double offset() const noexcept { return offset_; }

    // Monotone decreasing, alpha(0) = 1 exactly, alpha(1) clamped to the
    // floor. The cosine form is normalized by its t=0 value so the offset
    // does not perturb the left boundary.
    double alpha(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw DomainError("alpha: t must be in [0, 1]");
        double a;
        if (kind_ == ScheduleKind::cosine) {
            const double c = std::cos((t + offset_) / (1.0 + offset_) * kHalfPi);
            const double c0 = std::cos(offset_ / (1.0 + offset_) * kHalfPi);
            a = (c * c) / (c0 * c0);
        } else {
            a = 1.0 - t;
        }
        return std::clamp(a, kFloor, 1.0);
    }

    static constexpr double floor() noexcept { return kFloor; }

private:
    static constexpr double kFloor = 1e-9;
    static constexpr double kHalfPi = 1.5707963267948966;

    ScheduleKind kind_;
    double offset_;
};

inline Matrix forward_diffuse(const Matrix& x0, double t, const Matrix& eps,
                              const NoiseSchedule& schedule) {
    if (!x0.same_shape(eps)) throw ShapeError("forward_diffuse: eps shape != x0 shape");
    const double a = schedule.alpha(t);
    const double ca = std::sqrt(a), ce = std::sqrt(1.0 - a);
    Matrix out(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < x0.size(); ++i)
        out.data()[i] = ca * x0.data()[i] + ce * eps.data()[i];
    return out;
}

// Per-row time variant used in training, where each sample draws its own t.
inline Matrix forward_diffuse(const Matrix& x0, const std::vector<double>& t, const Matrix& eps,
                              const NoiseSchedule& schedule) {
    if (!x0.same_shape(eps)) throw ShapeError("forward_diffuse: eps shape != x0 shape");
    if (t.size() != x0.rows()) throw ShapeError("forward_diffuse: t length != batch rows");
    Matrix out(x0.rows(), x0.cols());
    for (std::size_t i = 0; i < x0.rows(); ++i) {
        const double a = schedule.alpha(t[i]);
        const double ca = std::sqrt(a), ce = std::sqrt(1.0 - a);
        const double* xi = x0.row(i);
        const double* ei = eps.row(i);
        double* oi = out.row(i);
        for (std::size_t j = 0; j < x0.cols(); ++j) oi[j] = ca * xi[j] + ce * ei[j];
    }
    return out;
}

inline ExtendedState forward_diffuse(const ExtendedState& x0, double t, const Matrix& eps,
                                     const NoiseSchedule& schedule) {
    return ExtendedState{forward_diffuse(x0.values, t, eps, schedule)};
}

}  // namespace sdd
