#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lvfuse/decoder.hpp"

namespace lvfuse {

// (LLM share, LVLM share) of a weighted sum.
struct WeightPair {
    float llm = 0.5f;
    float lvlm = 0.5f;

    bool operator==(const WeightPair&) const = default;
    auto operator<=>(const WeightPair&) const = default;
};

enum class MergeMode { pairwise, broadcast };

std::string to_string(MergeMode mode);
MergeMode merge_mode_from_string(const std::string& s);

struct FusionConfig {
    WeightPair head_weights{0.5f, 0.5f};
    WeightPair feature_weights{0.5f, 0.5f};
    // Layer indices are 1-based; -1 names the final layer.
    std::vector<int> merge_layers{-1};
    // When true only the LLM branch receives merged features.
    bool isolate_lvlm = false;
    // When true every merge layer except the last uses weights (1, 1).
    bool sum_all = false;
    MergeMode merge_mode = MergeMode::pairwise;
    std::size_t max_new_tokens = 64;
    std::uint64_t seed = 42;

    bool operator==(const FusionConfig&) const = default;
};

// Rejects negative weights and duplicate or zero layer indices.
void validate(const FusionConfig& config);

// Config file: a JSON object with exactly the FusionConfig keys
// (head_weights, feature_weights, merge_layers, isolate_lvlm, sum_all,
// merge_mode, max_new_tokens, seed). Missing keys take defaults, unknown
// keys are rejected.
FusionConfig parse_fusion_config(const std::string& text);
FusionConfig load_fusion_config(const std::filesystem::path& path);
std::string dump_fusion_config(const FusionConfig& config);

// Token ids 0..shared_size-1 mean the same thing in both vocabularies; ids
// past the shorter vocabulary are dropped from the combined head.
struct VocabAlignment {
    std::uint32_t shared_size = 0;
    std::string note;
};

VocabAlignment align_vocab(std::uint32_t vocab_llm, std::uint32_t vocab_lvlm);

// W = p.llm * W_llm + p.lvlm * W_lvlm over the shared vocabulary columns.
Tensor2D combine_heads(const Tensor2D& w_llm, const Tensor2D& w_lvlm, WeightPair p, const VocabAlignment& align);

std::vector<float> merge_features(std::span<const float> h_llm, std::span<const float> h_lvlm, WeightPair weights);

// Weights used at `layer` (which must be a merge layer). With sum_all, all
// merge layers before the deepest one use (1, 1).
WeightPair effective_layer_weights(const FusionConfig& config, int layer, std::uint32_t num_layers);

// Sorted, de-aliased (-1 resolved) merge layers for a stack depth.
std::vector<std::uint32_t> resolve_merge_layers(const std::vector<int>& layers, std::uint32_t num_layers);

struct MergeEvent {
    std::size_t step = 0;
    std::uint32_t layer = 0;
    WeightPair weights;
    bool into_lvlm = false;
};

struct FusionTrace {
    std::function<void(const MergeEvent&)> on_merge;
};

// One lockstep forward over both contexts; returns the combined logits over
// the shared vocabulary. `combined_head` must come from combine_heads.
std::vector<float> fused_logits(const DecoderStack& llm, const DecoderStack& lvlm, std::span<const TokenId> llm_context,
                                std::span<const TokenId> lvlm_context, const FusionConfig& config,
                                const Tensor2D& combined_head, std::size_t step = 0, const FusionTrace* trace = nullptr);

struct FusedDecodeResult {
    TokenSequence tokens;
    // Combined logits of the last decode step.
    std::vector<float> last_logits;
};

// Throws CompatibilityError when the stacks differ in depth or width.
void require_compatible(const DecoderStack& llm, const DecoderStack& lvlm);

// Greedy lockstep decode. The selected token is appended to both contexts.
FusedDecodeResult fused_decode(const DecoderStack& llm, const DecoderStack& lvlm, const TokenSequence& llm_prompt,
                               const TokenSequence& lvlm_prompt, const FusionConfig& config,
                               std::optional<TokenId> end_token = std::nullopt, const FusionTrace* trace = nullptr);

}  // namespace lvfuse
