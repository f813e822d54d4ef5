#include "lvfuse/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include <json.hpp>

#include "lvfuse/error.hpp"

namespace lvfuse {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("path", "cannot open: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

void RunManifest::add_input(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::recursive_directory_iterator(path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) input_digests.emplace_back(f.string(), sha256_file(f));
        return;
    }
    input_digests.emplace_back(path.string(), sha256_file(path));
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = resolved_config.empty() ? nlohmann::ordered_json::object()
                                          : nlohmann::ordered_json::parse(resolved_config);
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& [p, d] : input_digests) j["inputs"].push_back({{"path", p}, {"sha256", d}});
    j["tool_version"] = tool_version;
    j["timestamp"] = timestamp;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("path", "cannot open for writing: " + path.string());
    out << to_json();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace lvfuse
