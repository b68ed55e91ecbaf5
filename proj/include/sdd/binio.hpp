#pragma once

#include "sdd/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

// Little-endian primitives shared by the binary file formats. Explicit byte
// shuffling keeps the formats portable regardless of host endianness.

namespace sdd::binio {

inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f64(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return size_ - pos_; }

    void expect_magic(const char* magic, std::size_t len, const std::string& what) {
        if (remaining() < len)
            throw FormatError(what + ": truncated before magic", static_cast<long long>(pos_));
        if (std::memcmp(data_ + pos_, magic, len) != 0)
            throw FormatError(what + ": bad magic", static_cast<long long>(pos_));
        pos_ += len;
    }

    std::uint32_t u32(const std::string& what) {
        if (remaining() < 4)
            throw FormatError(what + ": truncated u32", static_cast<long long>(pos_));
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64(const std::string& what) {
        if (remaining() < 8)
            throw FormatError(what + ": truncated f64", static_cast<long long>(pos_));
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    void done(const std::string& what) {
        if (remaining() != 0)
            throw FormatError(what + ": trailing bytes", static_cast<long long>(pos_));
    }

private:
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path);
}

}  // namespace sdd::binio
