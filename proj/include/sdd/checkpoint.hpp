#pragma once

#include "sdd/binio.hpp"
#include "sdd/codec.hpp"
#include "sdd/denoiser.hpp"
#include "sdd/error.hpp"
#include "sdd/schedule.hpp"

#include <string>
#include <vector>

// =============================================================================
// Checkpoint file:
//   "SDDCKPT1"                              8-byte version magic
//   u32 n_mats                              parameter matrix count
//   n_mats x (u32 rows, u32 cols, f64...)   live weights, row-major LE
//   "EMASHDW1"                              EMA section magic
//   n_mats x (u32 rows, u32 cols, f64...)   EMA shadow weights
//   "SDDMETA1"                              metadata trailer
//   u32 kind, u32 width, u32 temb_dim
//   u32 n_hidden, n_hidden x u32
//   u32 schedule_kind, f64 schedule_offset
//   u32 scale_entries, entries x (f64 lo, f64 hi)
// =============================================================================

namespace sdd {

struct Checkpoint {
    Denoiser model;
    Denoiser ema;
    ModelKind kind = ModelKind::sdd_joint;
    ScaleSpec scale;
    NoiseSchedule schedule;
};

namespace detail {

inline void put_mats(std::string& out, const std::vector<const Matrix*>& mats) {
    for (const Matrix* m : mats) {
        binio::put_u32(out, static_cast<std::uint32_t>(m->rows()));
        binio::put_u32(out, static_cast<std::uint32_t>(m->cols()));
        for (std::size_t i = 0; i < m->size(); ++i) binio::put_f64(out, m->data()[i]);
    }
}

inline std::vector<Matrix> get_mats(binio::Reader& r, std::uint32_t n, const std::string& what) {
    std::vector<Matrix> mats;
    mats.reserve(n);
    for (std::uint32_t k = 0; k < n; ++k) {
        const std::uint32_t rows = r.u32(what + " rows");
        const std::uint32_t cols = r.u32(what + " cols");
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64(what + " values");
        mats.push_back(std::move(m));
    }
    return mats;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const auto live = ckpt.model.params();
    const auto ema = ckpt.ema.params();
    if (live.size() != ema.size()) throw ShapeError("checkpoint: EMA parameter count mismatch");

    std::string bytes;
    bytes.append("SDDCKPT1", 8);
    binio::put_u32(bytes, static_cast<std::uint32_t>(live.size()));
    detail::put_mats(bytes, live);
    bytes.append("EMASHDW1", 8);
    detail::put_mats(bytes, ema);
    bytes.append("SDDMETA1", 8);
    binio::put_u32(bytes, ckpt.kind == ModelKind::sdd_joint ? 0u : 1u);
    binio::put_u32(bytes, static_cast<std::uint32_t>(ckpt.model.width()));
    binio::put_u32(bytes, static_cast<std::uint32_t>(ckpt.model.temb_dim()));
    binio::put_u32(bytes, static_cast<std::uint32_t>(ckpt.model.hidden().size()));
    for (std::size_t h : ckpt.model.hidden()) binio::put_u32(bytes, static_cast<std::uint32_t>(h));
    binio::put_u32(bytes, ckpt.schedule.kind() == ScheduleKind::cosine ? 0u : 1u);
    binio::put_f64(bytes, ckpt.schedule.offset());
    binio::put_u32(bytes, static_cast<std::uint32_t>(ckpt.scale.lo().size()));
    for (std::size_t j = 0; j < ckpt.scale.lo().size(); ++j) {
        binio::put_f64(bytes, ckpt.scale.lo()[j]);
        binio::put_f64(bytes, ckpt.scale.hi()[j]);
    }
    binio::write_file(path, bytes);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    const auto bytes = binio::read_file(path);
    binio::Reader r(bytes.data(), bytes.size());
    r.expect_magic("SDDCKPT1", 8, "checkpoint");
    const std::uint32_t n_mats = r.u32("checkpoint n_mats");
    auto live = detail::get_mats(r, n_mats, "checkpoint live");
    r.expect_magic("EMASHDW1", 8, "checkpoint EMA section");
    auto ema = detail::get_mats(r, n_mats, "checkpoint ema");
    r.expect_magic("SDDMETA1", 8, "checkpoint metadata");
    const std::uint32_t kind_raw = r.u32("checkpoint kind");
    if (kind_raw > 1) throw FormatError("checkpoint: unknown model kind");
    const std::uint32_t width = r.u32("checkpoint width");
    const std::uint32_t temb_dim = r.u32("checkpoint temb_dim");
    const std::uint32_t n_hidden = r.u32("checkpoint n_hidden");
    std::vector<std::size_t> hidden(n_hidden);
    for (auto& h : hidden) h = r.u32("checkpoint hidden");
    const std::uint32_t sched_raw = r.u32("checkpoint schedule kind");
    if (sched_raw > 1) throw FormatError("checkpoint: unknown schedule kind");
    const double offset = r.f64("checkpoint schedule offset");
    const std::uint32_t scale_n = r.u32("checkpoint scale entries");
    std::vector<double> lo(scale_n), hi(scale_n);
    for (std::uint32_t j = 0; j < scale_n; ++j) {
        lo[j] = r.f64("checkpoint scale lo");
        hi[j] = r.f64("checkpoint scale hi");
    }
    r.done("checkpoint");

    Checkpoint ckpt;
    ckpt.model = Denoiser::from_parts(width, hidden, temb_dim, live);
    ckpt.ema = Denoiser::from_parts(width, hidden, temb_dim, ema);
    ckpt.kind = kind_raw == 0 ? ModelKind::sdd_joint : ModelKind::dense_baseline;
    ckpt.schedule =
        NoiseSchedule(sched_raw == 0 ? ScheduleKind::cosine : ScheduleKind::linear_alpha_bar,
                      offset);
    ckpt.scale = scale_n == 1 ? ScaleSpec::global(lo[0], hi[0])
                              : ScaleSpec::per_feature(std::move(lo), std::move(hi));
    return ckpt;
}

}  // namespace sdd
