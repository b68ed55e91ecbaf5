#pragma once

#include "sdd/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

// =============================================================================
// Run provenance. Every CLI command appends one manifest line (JSON object)
// to an append-only .jsonl log next to its primary artifact. A manifest pins
// the full config snapshot, seeds, input fingerprints, and artifact paths,
// which is enough to replay the run.
// =============================================================================

namespace sdd {

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t size) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file for fingerprint: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto got = static_cast<std::size_t>(in.gcount());
        for (std::size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string build_id;
    std::string dataset_path;
    std::uint64_t dataset_fingerprint = 0;
    std::vector<std::string> artifacts;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["config"] = config;
        j["seed"] = seed;
        j["build"] = build_id;
        if (!dataset_path.empty()) {
            j["dataset"] = dataset_path;
            j["dataset_fnv1a64"] = dataset_fingerprint;
        }
        j["artifacts"] = artifacts;
        return j;
    }
};

inline void append_manifest(const std::string& log_path, const RunManifest& m) {
    std::ofstream out(log_path, std::ios::app);
    if (!out) throw FormatError("cannot open manifest log: " + log_path);
    out << m.to_json().dump() << '\n';
    if (!out) throw FormatError("manifest write failed: " + log_path);
}

}  // namespace sdd
