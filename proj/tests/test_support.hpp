#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "lvfuse/decoder.hpp"

namespace lvfuse::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lvfuse_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random printable-ASCII prompt of length 1..max_len.
inline TokenSequence random_prompt(std::mt19937_64& gen, std::size_t max_len) {
    const std::size_t len = 1 + gen() % max_len;
    TokenSequence t(len);
    for (auto& x : t) x = static_cast<TokenId>(32 + gen() % 95);
    return t;
}

inline StackDims toy_dims(std::uint32_t layers = 4, std::uint32_t dim = 64, std::uint32_t vocab = 256,
                          std::uint32_t heads = 1) {
    return StackDims{layers, dim, vocab, heads};
}

}  // namespace lvfuse::testing
