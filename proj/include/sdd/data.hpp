#pragma once

#include "sdd/codec.hpp"
#include "sdd/error.hpp"
#include "sdd/matio.hpp"
#include "sdd/matrix.hpp"
#include "sdd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

// =============================================================================
// Datasets: synthetic sparse generators plus IDX and CSV ingestion. Exact
// zeros are preserved end to end; scaling never turns a 0 into an epsilon.
// =============================================================================

namespace sdd {

enum class SyntheticKind { clustered_deposits, sparse_mixture };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::clustered_deposits;
    std::size_t d = 256;
    double target_sparsity = 0.9;
    std::size_t clusters = 3;
    double intensity_mu = 0.0;     // log-normal magnitude parameters
    double intensity_sigma = 0.5;
    std::vector<double> per_dim_sparsity;  // sparse_mixture only; empty = uniform target
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 1) throw DomainError("synthetic spec: d must be >= 1");
        if (!(target_sparsity > 0.0 && target_sparsity < 1.0))
            throw DomainError("synthetic spec: target sparsity must be in (0, 1)");
        if (!per_dim_sparsity.empty() && per_dim_sparsity.size() != d)
            throw DomainError("synthetic spec: per-dim sparsity size != d");
    }
};

namespace detail {

// Integer lattice disk offsets with dx^2 + dy^2 <= r2, ordered by (dx, dy).
inline std::vector<std::pair<int, int>> disk_offsets(int r2) {
    std::vector<std::pair<int, int>> off;
    if (r2 < 0) return off;
    const int r = static_cast<int>(std::sqrt(static_cast<double>(r2))) + 1;
    for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
            if (dx * dx + dy * dy <= r2) off.emplace_back(dx, dy);
    return off;
}

}  // namespace detail

// Images on a sqrt(d) x sqrt(d) torus: each of k clusters stamps a lattice
// disk of Gaussian-profile positive intensity at a uniform center. Disk area
// is randomized between the two integer sizes bracketing the required
// coverage, which makes the expected sparsity exactly the target:
// P(cell untouched) = (1 - E[area]/d)^k = target.
inline DataBatch gen_clustered(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(spec.d))));
    if (side * side != spec.d)
        throw DomainError("gen_clustered: d must be a perfect square");

    DataBatch out{Matrix(n, spec.d)};
    if (spec.clusters == 0) return out;  // all zero, sparsity 1

    const double k = static_cast<double>(spec.clusters);
    const double coverage = 1.0 - std::pow(spec.target_sparsity, 1.0 / k);
    const double need = coverage * static_cast<double>(spec.d);  // E[cells per disk]

    // Bracket `need` between two consecutive achievable disk sizes.
    int r2_lo = -1, r2_hi = 0;
    auto size_of = [](int r2) {
        return static_cast<double>(detail::disk_offsets(r2).size());
    };
    while (size_of(r2_hi) < need) {
        r2_lo = r2_hi;
        ++r2_hi;
        if (static_cast<std::size_t>(size_of(r2_hi)) >= spec.d) break;
    }
    const auto disk_lo = detail::disk_offsets(r2_lo);
    const auto disk_hi = detail::disk_offsets(r2_hi);
    const double m_lo = static_cast<double>(disk_lo.size());
    const double m_hi = static_cast<double>(disk_hi.size());
    const double p_lo = m_hi == m_lo ? 0.0 : std::clamp((m_hi - need) / (m_hi - m_lo), 0.0, 1.0);

    const auto g = static_cast<long long>(side);
    for (std::size_t i = 0; i < n; ++i) {
        double* img = out.values.row(i);
        for (std::size_t c = 0; c < spec.clusters; ++c) {
            const auto cx = static_cast<long long>(rng.uniform01() * static_cast<double>(side));
            const auto cy = static_cast<long long>(rng.uniform01() * static_cast<double>(side));
            const bool small = rng.uniform01() < p_lo;
            const auto& disk = small ? disk_lo : disk_hi;
            const double amp = std::exp(spec.intensity_mu + spec.intensity_sigma * rng.gaussian());
            if (disk.empty()) continue;
            const double r2_sel = static_cast<double>(small ? std::max(r2_lo, 1) : std::max(r2_hi, 1));
            const double prof = 2.0 * (r2_sel / 4.0);  // 2 * (r/2)^2
            for (const auto& [dx, dy] : disk) {
                const auto x = ((cx + dx) % g + g) % g;
                const auto y = ((cy + dy) % g + g) % g;
                img[static_cast<std::size_t>(x * g + y)] +=
                    amp * std::exp(-static_cast<double>(dx * dx + dy * dy) / prof);
            }
        }
    }
    return out;
}

// Independent per-dimension activity: entry (i, j) is nonzero with
// probability 1 - s_j, with log-normal positive magnitude.
inline DataBatch gen_sparse_mixture(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    DataBatch out{Matrix(n, spec.d)};
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.values.row(i);
        for (std::size_t j = 0; j < spec.d; ++j) {
            const double s =
                spec.per_dim_sparsity.empty() ? spec.target_sparsity : spec.per_dim_sparsity[j];
            if (rng.uniform01() >= s)
                row[j] = std::exp(spec.intensity_mu + spec.intensity_sigma * rng.gaussian());
        }
    }
    return out;
}

inline DataBatch gen_synthetic(const SyntheticSpec& spec, std::size_t n, Rng& rng) {
    return spec.kind == SyntheticKind::clustered_deposits ? gen_clustered(spec, n, rng)
                                                          : gen_sparse_mixture(spec, n, rng);
}

// A loaded dataset: immutable matrix plus its scaling spec.
struct DatasetHandle {
    std::string name;
    Matrix data;  // n x d, original units
    ScaleSpec scale;

    std::size_t n() const noexcept { return data.rows(); }
    std::size_t d() const noexcept { return data.cols(); }
    DataBatch batch() const { return DataBatch{data}; }
};

// ---------------------------------------------------------------------------
// IDX (MNIST convention): big-endian u32 magic 0x00000803, then dims
// n x rows x cols, then unsigned byte pixels.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t be_u32(const std::vector<unsigned char>& b, std::size_t pos,
                            const char* what) {
    if (pos + 4 > b.size()) throw FormatError(std::string(what) + ": truncated",
                                              static_cast<long long>(pos));
    return (static_cast<std::uint32_t>(b[pos]) << 24) | (static_cast<std::uint32_t>(b[pos + 1]) << 16) |
           (static_cast<std::uint32_t>(b[pos + 2]) << 8) | static_cast<std::uint32_t>(b[pos + 3]);
}

}  // namespace detail

inline DatasetHandle load_idx_images(const std::string& path) {
    const auto bytes = binio::read_file(path);
    const std::uint32_t magic = detail::be_u32(bytes, 0, "IDX magic");
    if (magic != 0x00000803u) throw FormatError("IDX: bad magic", 0);
    const std::uint32_t n = detail::be_u32(bytes, 4, "IDX count");
    const std::uint32_t rows = detail::be_u32(bytes, 8, "IDX rows");
    const std::uint32_t cols = detail::be_u32(bytes, 12, "IDX cols");
    if (rows != 28 || cols != 28) throw FormatError("IDX: expected 28x28 images", 8);
    const std::size_t need = 16 + static_cast<std::size_t>(n) * rows * cols;
    if (bytes.size() != need)
        throw FormatError("IDX: size mismatch", static_cast<long long>(
                              std::min(bytes.size(), need)));

    DatasetHandle h;
    h.name = path;
    h.data = Matrix(n, static_cast<std::size_t>(rows) * cols);
    for (std::size_t i = 0; i < h.data.size(); ++i)
        h.data.data()[i] = static_cast<double>(bytes[16 + i]);
    h.scale = ScaleSpec::global(0.0, 255.0);  // u8 pixel range
    return h;
}

// Writes 28x28 images (values clamped/rounded to [0, 255]) for fixtures.
inline void write_idx_images(const std::string& path, const Matrix& images) {
    if (images.cols() != 784) throw ShapeError("write_idx: need 784 columns (28x28)");
    std::string bytes;
    bytes.reserve(16 + images.size());
    const auto put_be = [&bytes](std::uint32_t v) {
        bytes.push_back(static_cast<char>((v >> 24) & 0xFF));
        bytes.push_back(static_cast<char>((v >> 16) & 0xFF));
        bytes.push_back(static_cast<char>((v >> 8) & 0xFF));
        bytes.push_back(static_cast<char>(v & 0xFF));
    };
    put_be(0x00000803u);
    put_be(static_cast<std::uint32_t>(images.rows()));
    put_be(28u);
    put_be(28u);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const double v = std::clamp(images.data()[i], 0.0, 255.0);
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::llround(v))));
    }
    binio::write_file(path, bytes);
}

// ---------------------------------------------------------------------------
// Numeric CSV (RFC-4180 subset, no quoting). A non-numeric first row is
// treated as a header. "0" parses to exact 0.0.
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_field(const std::string& s, std::size_t b, std::size_t e, double& out) {
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    if (b == e) return false;
    const auto res = std::from_chars(s.data() + b, s.data() + e, out);
    return res.ec == std::errc() && res.ptr == s.data() + e;
}

inline bool parse_csv_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            double v;
            if (!parse_field(line, start, i, v)) return false;
            out.push_back(v);
            start = i + 1;
        }
    }
    return true;
}

}  // namespace detail

inline DatasetHandle load_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open file: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    long long lineno = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        if (!detail::parse_csv_row(line, row)) {
            if (first_content) {  // header
                first_content = false;
                continue;
            }
            throw FormatError("CSV: non-numeric field", lineno);
        }
        first_content = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError("CSV: ragged row", lineno);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("CSV: no data rows", lineno);

    DatasetHandle h;
    h.name = path;
    h.data = Matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j) h.data(i, j) = rows[i][j];
    h.scale = ScaleSpec::fit(DataBatch{h.data});
    return h;
}

inline DatasetHandle load_sddmat(const std::string& path) {
    DatasetHandle h;
    h.name = path;
    h.data = read_sddmat(path);
    if (h.data.empty()) throw FormatError("SDDMAT1: empty matrix");
    h.scale = ScaleSpec::fit(DataBatch{h.data});
    return h;
}

// Dispatch on file extension: .idx/.ubyte, .csv, anything else = SDDMAT1.
inline DatasetHandle load_dataset(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "idx" || ext == "ubyte") return load_idx_images(path);
    if (ext == "csv") return load_csv_matrix(path);
    return load_sddmat(path);
}

}  // namespace sdd
