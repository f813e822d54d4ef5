#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lvfuse {

inline constexpr const char* kToolVersion = "0.1.0";

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

// Reproducibility envelope written beside every command output. The
// timestamp is the only field that differs between identical runs.
struct RunManifest {
    std::string command;
    std::string resolved_config;  // JSON text
    std::vector<std::pair<std::string, std::string>> input_digests;  // path, sha256
    std::string tool_version = kToolVersion;
    std::string timestamp;  // UTC, ISO 8601

    // Digests a file, or every regular file below a directory (sorted).
    void add_input(const std::filesystem::path& path);
    std::string to_json() const;
    void write(const std::filesystem::path& path) const;
};

std::string utc_timestamp();

}  // namespace lvfuse
