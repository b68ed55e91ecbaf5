#pragma once

#include "sdd/binio.hpp"
#include "sdd/error.hpp"
#include "sdd/matrix.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>

// =============================================================================
// Matrix file formats.
//
// SDDMAT1 binary dump: magic "SDDMAT1\0", u32 rows, u32 cols (little-endian),
// then rows*cols f64 values row-major. CSV export writes full-precision
// decimal so a write/read round trip is value-exact.
// =============================================================================

namespace sdd {

inline constexpr char kMatMagic[8] = {'S', 'D', 'D', 'M', 'A', 'T', '1', '\0'};

inline void write_sddmat(const std::string& path, const Matrix& m) {
    std::string bytes;
    bytes.reserve(16 + m.size() * 8);
    bytes.append(kMatMagic, 8);
    binio::put_u32(bytes, static_cast<std::uint32_t>(m.rows()));
    binio::put_u32(bytes, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) binio::put_f64(bytes, m.data()[i]);
    binio::write_file(path, bytes);
}

inline Matrix read_sddmat(const std::string& path) {
    const auto bytes = binio::read_file(path);
    binio::Reader r(bytes.data(), bytes.size());
    r.expect_magic(kMatMagic, 8, "SDDMAT1");
    const std::uint32_t rows = r.u32("SDDMAT1 rows");
    const std::uint32_t cols = r.u32("SDDMAT1 cols");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64("SDDMAT1 values");
    r.done("SDDMAT1");
    return m;
}

inline void write_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    char buf[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << buf;
            if (j + 1 < m.cols()) out << ',';
        }
        out << '\n';
    }
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace sdd
