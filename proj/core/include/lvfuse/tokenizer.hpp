#pragma once

#include <string>
#include <string_view>

#include "lvfuse/decoder.hpp"

namespace lvfuse {

// Byte-level stand-in tokenizer. Ids 0..255 are raw bytes. With a vocabulary
// of at least 257 entries id 256 is the end token; smaller vocabularies use
// byte 0 (NUL) as the end token. Ids above 255 decode to nothing, and byte
// runs that are not valid UTF-8 decode to U+FFFD.
class ByteTokenizer {
public:
    explicit ByteTokenizer(std::uint32_t vocab_size);

    TokenSequence encode(std::string_view text) const;
    std::string decode(const TokenSequence& tokens) const;

    TokenId end_token() const noexcept { return end_token_; }
    std::uint32_t vocab_size() const noexcept { return vocab_size_; }

private:
    std::uint32_t vocab_size_;
    TokenId end_token_;
};

}  // namespace lvfuse
