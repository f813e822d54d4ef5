#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lvfuse/error.hpp"

// Little-endian encode/decode helpers shared by the binary file formats.
namespace lvfuse::detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f32s(std::span<const float> vs) {
        for (float v : vs) f32(v);
    }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    void write_to(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("path", "cannot open for writing: " + path.string());
        out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
        if (!out) throw FormatError("path", "write failed: " + path.string());
    }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    static ByteReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("path", "cannot open: " + path.string());
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(bytes));
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32(const char* field) { return std::bit_cast<float>(u32(field)); }

    void f32s(std::span<float> out, const char* field) {
        need(out.size() * 4, field);
        for (float& v : out) v = f32(field);
    }

    std::string raw(std::size_t n, const char* field) {
        need(n, field);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    void expect_end() const {
        if (remaining() != 0) throw FormatError("payload", std::to_string(remaining()) + " trailing bytes after last tensor");
    }

private:
    void need(std::size_t n, const char* field) const {
        if (remaining() < n) throw FormatError(field, "truncated file (need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
    }

    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace lvfuse::detail
