#include "lvfuse/tokenizer.hpp"

#include "lvfuse/error.hpp"

namespace lvfuse {

namespace {

// Length of the well-formed UTF-8 sequence starting at s[i], or 0.
std::size_t utf8_sequence_length(const std::string& s, std::size_t i) {
    const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char lead = b(i);
    if (lead < 0x80) return 1;
    std::size_t len;
    unsigned char lo = 0x80, hi = 0xBF;  // bounds for the second byte
    if (lead >= 0xC2 && lead <= 0xDF) {
        len = 2;
    } else if (lead >= 0xE0 && lead <= 0xEF) {
        len = 3;
        if (lead == 0xE0) lo = 0xA0;
        if (lead == 0xED) hi = 0x9F;  // no surrogates
    } else if (lead >= 0xF0 && lead <= 0xF4) {
        len = 4;
        if (lead == 0xF0) lo = 0x90;
        if (lead == 0xF4) hi = 0x8F;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    if (b(i + 1) < lo || b(i + 1) > hi) return 0;
    for (std::size_t k = 2; k < len; ++k) {
        if (b(i + k) < 0x80 || b(i + k) > 0xBF) return 0;
    }
    return len;
}

}  // namespace

ByteTokenizer::ByteTokenizer(std::uint32_t vocab_size)
    : vocab_size_(vocab_size), end_token_(vocab_size >= 257 ? 256 : 0) {
    if (vocab_size < 2) throw VocabError("tokenizer vocabulary must hold at least 2 ids");
}

TokenSequence ByteTokenizer::encode(std::string_view text) const {
    TokenSequence out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto byte = static_cast<unsigned char>(text[i]);
        if (byte >= vocab_size_ || (byte == end_token_)) {
            throw VocabError("byte " + std::to_string(byte) + " at offset " + std::to_string(i) +
                             " is not encodable in a vocabulary of " + std::to_string(vocab_size_));
        }
        out.push_back(byte);
    }
    return out;
}

std::string ByteTokenizer::decode(const TokenSequence& tokens) const {
    std::string out;
    out.reserve(tokens.size());
    for (TokenId t : tokens) {
        if (t < 256 && t != end_token_) out.push_back(static_cast<char>(t));
    }
    // Malformed byte runs become U+FFFD so the text is always valid UTF-8.
    std::string text;
    text.reserve(out.size());
    for (std::size_t i = 0; i < out.size();) {
        const std::size_t len = utf8_sequence_length(out, i);
        if (len == 0) {
            text += "\xEF\xBF\xBD";
            ++i;
        } else {
            text.append(out, i, len);
            i += len;
        }
    }
    return text;
}

}  // namespace lvfuse
