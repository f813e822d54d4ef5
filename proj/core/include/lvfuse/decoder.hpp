#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "lvfuse/tensor.hpp"

namespace lvfuse {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

struct StackDims {
    std::uint32_t num_layers = 4;
    std::uint32_t model_dim = 64;
    std::uint32_t vocab_size = 256;
    std::uint32_t num_heads = 1;

    // The MLP width is not stored in weight files; it is always 4x model_dim.
    std::uint32_t ffn_dim() const noexcept { return 4 * model_dim; }
    std::uint32_t head_dim() const noexcept { return model_dim / num_heads; }

    bool operator==(const StackDims&) const = default;
};

struct BlockWeights {
    Tensor2D attn_norm;  // 1 x d
    Tensor2D wq, wk, wv, wo;  // d x d
    Tensor2D mlp_norm;  // 1 x d
    Tensor2D w_gate, w_up;  // d x ffn
    Tensor2D w_down;  // ffn x d

    bool operator==(const BlockWeights&) const = default;
};

// Pre-norm causal decoder: token embeddings, rotary positions, attention +
// SwiGLU blocks, final RMS norm and a bias-free head (d x vocab).
// Immutable once constructed; the constructor rejects inconsistent shapes.
class DecoderStack {
public:
    DecoderStack(StackDims dims, Tensor2D token_embeddings, std::vector<BlockWeights> blocks, Tensor2D final_norm,
                 Tensor2D head_weights);

    const StackDims& dims() const noexcept { return dims_; }
    std::uint32_t num_layers() const noexcept { return dims_.num_layers; }
    std::uint32_t model_dim() const noexcept { return dims_.model_dim; }
    std::uint32_t vocab_size() const noexcept { return dims_.vocab_size; }

    const Tensor2D& token_embeddings() const noexcept { return token_embeddings_; }
    const std::vector<BlockWeights>& blocks() const noexcept { return blocks_; }
    const Tensor2D& final_norm() const noexcept { return final_norm_; }
    const Tensor2D& head_weights() const noexcept { return head_weights_; }

    // Resolves -1 to the final layer and checks 1..num_layers.
    std::uint32_t resolve_layer(int layer) const;

    bool operator==(const DecoderStack&) const = default;

private:
    StackDims dims_;
    Tensor2D token_embeddings_;
    std::vector<BlockWeights> blocks_;
    Tensor2D final_norm_;
    Tensor2D head_weights_;
};

// Deterministic pseudo-random stack; identical seeds give bit-identical weights.
DecoderStack seed_init(const StackDims& dims, std::uint64_t rng_seed);

// Layer-by-layer forward pass over a full context (no key/value cache).
// Between blocks the caller may overwrite hidden states, which is how
// feature injection and cross-stack merging are implemented.
class ForwardPass {
public:
    ForwardPass(const DecoderStack& stack, std::span<const TokenId> tokens);

    std::uint32_t layers_done() const noexcept { return layers_done_; }
    bool finished() const noexcept { return layers_done_ == stack_->num_layers(); }

    // Runs the next block. Afterwards layers_done() is its 1-based index.
    void run_block();

    Tensor2D& states() noexcept { return states_; }
    const Tensor2D& states() const noexcept { return states_; }
    std::span<const float> last_state() const noexcept { return states_.row(states_.rows() - 1); }
    std::span<float> last_state() noexcept { return states_.row(states_.rows() - 1); }

    // Final RMS norm of the last position.
    std::vector<float> final_feature() const;
    // final_feature() times the head.
    std::vector<float> logits() const;

private:
    const DecoderStack* stack_;
    Tensor2D states_;
    std::uint32_t layers_done_ = 0;
};

// Replacement value for a layer's output: a single vector replaces the last
// position, a full tensor replaces every position.
using Injection = std::variant<std::vector<float>, Tensor2D>;

struct LayerTapRecord {
    std::uint32_t layer_index = 0;
    std::vector<float> last_token_state;
    std::optional<Tensor2D> full_states;
};

struct ForwardResult {
    std::vector<LayerTapRecord> taps;
    std::vector<float> logits;
};

// Taps hold block outputs before any injection for that layer is applied.
// Injection keys accept -1 for the final layer.
ForwardResult forward_full(const DecoderStack& stack, std::span<const TokenId> tokens,
                           const std::map<int, Injection>& injections = {}, bool keep_full_states = false);

// Argmax with ties broken by the lowest index. `seed` is accepted for
// sampling extensions; the greedy path does not read it.
TokenId greedy_select(std::span<const float> logits, std::uint64_t seed = 42);

// Greedy autoregressive decode on one stack. Stops after `max_new_tokens`
// or when `end_token` is produced (the end token is not returned).
TokenSequence greedy_decode(const DecoderStack& stack, const TokenSequence& prompt, std::size_t max_new_tokens,
                            std::optional<TokenId> end_token, std::uint64_t seed = 42);

// Binary weight file: "LVFW", u32 version, u32 num_layers, model_dim,
// vocab_size, num_heads, then every tensor as little-endian f32 row-major.
void save_stack(const DecoderStack& stack, const std::filesystem::path& path);
DecoderStack load_stack(const std::filesystem::path& path);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

}  // namespace lvfuse
