#pragma once

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fgray {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t file_checksum(const std::string& path);

/// Provenance attached to every output artifact.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string version;
    std::string started_at;  // UTC, ISO 8601
    double wall_clock_seconds = 0.0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    /// Time-dependent fields sit under "timing".
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Runs the `fgray` command line; returns the process exit code.
int dispatch(int argc, char** argv);

} // namespace fgray
