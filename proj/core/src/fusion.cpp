#include "lvfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lvfuse/error.hpp"
#include "lvfuse/kernels.hpp"

namespace lvfuse {

std::string to_string(MergeMode mode) { return mode == MergeMode::pairwise ? "pairwise" : "broadcast"; }

MergeMode merge_mode_from_string(const std::string& s) {
    if (s == "pairwise") return MergeMode::pairwise;
    if (s == "broadcast") return MergeMode::broadcast;
    throw ValidationError("unknown merge mode '" + s + "' (expected pairwise or broadcast)");
}

void validate(const FusionConfig& c) {
    for (float w : {c.head_weights.llm, c.head_weights.lvlm, c.feature_weights.llm, c.feature_weights.lvlm}) {
        if (!(w >= 0.0f) || !std::isfinite(w)) throw ValidationError("fusion weights must be finite and non-negative");
    }
    std::vector<int> seen;
    for (int l : c.merge_layers) {
        if (l == 0 || l < -1) throw ValidationError("merge layer " + std::to_string(l) + " is not a layer index");
        if (std::find(seen.begin(), seen.end(), l) != seen.end()) {
            throw ValidationError("merge layer " + std::to_string(l) + " listed twice");
        }
        seen.push_back(l);
    }
}

VocabAlignment align_vocab(std::uint32_t vocab_llm, std::uint32_t vocab_lvlm) {
    if (vocab_llm < 2 || vocab_lvlm < 2) throw PreconditionError("vocabularies must hold at least 2 tokens");
    VocabAlignment a;
    a.shared_size = std::min(vocab_llm, vocab_lvlm);
    if (vocab_llm == vocab_lvlm) {
        a.note = "vocabularies identical";
    } else {
        const bool llm_longer = vocab_llm > vocab_lvlm;
        a.note = std::string(llm_longer ? "LLM" : "LVLM") + " tail ids " + std::to_string(a.shared_size) + ".." +
                 std::to_string(std::max(vocab_llm, vocab_lvlm) - 1) + " discarded";
    }
    return a;
}

Tensor2D combine_heads(const Tensor2D& w_llm, const Tensor2D& w_lvlm, WeightPair p, const VocabAlignment& align) {
    if (w_llm.rows() != w_lvlm.rows()) {
        throw ShapeError("head model_dim mismatch: " + std::to_string(w_llm.rows()) + " vs " +
                         std::to_string(w_lvlm.rows()));
    }
    if (align.shared_size > w_llm.cols() || align.shared_size > w_lvlm.cols()) {
        throw ShapeError("shared vocabulary larger than a head");
    }
    Tensor2D out(w_llm.rows(), align.shared_size);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = p.llm * w_llm(r, c) + p.lvlm * w_lvlm(r, c);
    }
    return out;
}

std::vector<float> merge_features(std::span<const float> h_llm, std::span<const float> h_lvlm, WeightPair weights) {
    if (h_llm.size() != h_lvlm.size()) {
        throw ShapeError("merge_features: lengths " + std::to_string(h_llm.size()) + " and " +
                         std::to_string(h_lvlm.size()));
    }
    std::vector<float> out(h_llm.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = weights.llm * h_llm[i] + weights.lvlm * h_lvlm[i];
    return out;
}

std::vector<std::uint32_t> resolve_merge_layers(const std::vector<int>& layers, std::uint32_t num_layers) {
    std::vector<std::uint32_t> out;
    for (int l : layers) {
        std::uint32_t r;
        if (l == -1) {
            r = num_layers;
        } else if (l >= 1 && static_cast<std::uint32_t>(l) <= num_layers) {
            r = static_cast<std::uint32_t>(l);
        } else {
            throw PreconditionError("merge layer " + std::to_string(l) + " outside 1.." + std::to_string(num_layers));
        }
        if (std::find(out.begin(), out.end(), r) != out.end()) {
            throw PreconditionError("merge layers name layer " + std::to_string(r) + " twice");
        }
        out.push_back(r);
    }
    std::sort(out.begin(), out.end());
    return out;
}

WeightPair effective_layer_weights(const FusionConfig& config, int layer, std::uint32_t num_layers) {
    const auto layers = resolve_merge_layers(config.merge_layers, num_layers);
    const std::uint32_t resolved = layer == -1 ? num_layers : static_cast<std::uint32_t>(std::max(layer, 0));
    if (std::find(layers.begin(), layers.end(), resolved) == layers.end()) {
        throw PreconditionError("layer " + std::to_string(layer) + " is not a merge layer");
    }
    if (config.sum_all && resolved != layers.back()) return WeightPair{1.0f, 1.0f};
    return config.feature_weights;
}

void require_compatible(const DecoderStack& llm, const DecoderStack& lvlm) {
    if (llm.num_layers() != lvlm.num_layers()) {
        throw CompatibilityError("stacks differ in depth: " + std::to_string(llm.num_layers()) + " vs " +
                                 std::to_string(lvlm.num_layers()) + " layers");
    }
    if (llm.model_dim() != lvlm.model_dim()) {
        throw CompatibilityError("stacks differ in width: model_dim " + std::to_string(llm.model_dim()) + " vs " +
                                 std::to_string(lvlm.model_dim()));
    }
}

namespace {

// Intermediate-layer merge. Each modified position receives
// w.llm * (LLM state) + w.lvlm * (LVLM state), with the other branch always
// contributing its last-token state.
void merge_into(ForwardPass& llm, ForwardPass& lvlm, WeightPair w, const FusionConfig& config) {
    const std::vector<float> llm_last(llm.last_state().begin(), llm.last_state().end());
    const std::vector<float> lvlm_last(lvlm.last_state().begin(), lvlm.last_state().end());

    if (config.merge_mode == MergeMode::pairwise) {
        const auto merged = merge_features(llm_last, lvlm_last, w);
        std::copy(merged.begin(), merged.end(), llm.last_state().begin());
        if (!config.isolate_lvlm) std::copy(merged.begin(), merged.end(), lvlm.last_state().begin());
        return;
    }

    for (std::size_t r = 0; r < llm.states().rows(); ++r) {
        const auto merged = merge_features(llm.states().row(r), lvlm_last, w);
        std::copy(merged.begin(), merged.end(), llm.states().row(r).begin());
    }
    if (!config.isolate_lvlm) {
        for (std::size_t r = 0; r < lvlm.states().rows(); ++r) {
            const auto merged = merge_features(llm_last, lvlm.states().row(r), w);
            std::copy(merged.begin(), merged.end(), lvlm.states().row(r).begin());
        }
    }
}

}  // namespace

std::vector<float> fused_logits(const DecoderStack& llm, const DecoderStack& lvlm, std::span<const TokenId> llm_context,
                                std::span<const TokenId> lvlm_context, const FusionConfig& config,
                                const Tensor2D& combined_head, std::size_t step, const FusionTrace* trace) {
    require_compatible(llm, lvlm);
    const std::uint32_t depth = llm.num_layers();
    const auto layers = resolve_merge_layers(config.merge_layers, depth);
    const bool merge_final = !layers.empty() && layers.back() == depth;

    ForwardPass llm_pass(llm, llm_context);
    ForwardPass lvlm_pass(lvlm, lvlm_context);
    for (std::uint32_t layer = 1; layer <= depth; ++layer) {
        llm_pass.run_block();
        lvlm_pass.run_block();
        // The final layer merges after each branch's final norm, below.
        if (layer == depth || !std::binary_search(layers.begin(), layers.end(), layer)) continue;
        const WeightPair w = effective_layer_weights(config, static_cast<int>(layer), depth);
        merge_into(llm_pass, lvlm_pass, w, config);
        if (trace && trace->on_merge) trace->on_merge(MergeEvent{step, layer, w, !config.isolate_lvlm});
    }

    std::vector<float> feature;
    if (merge_final) {
        const WeightPair w = effective_layer_weights(config, -1, depth);
        feature = merge_features(llm_pass.final_feature(), lvlm_pass.final_feature(), w);
        if (trace && trace->on_merge) trace->on_merge(MergeEvent{step, depth, w, false});
    } else {
        feature = llm_pass.final_feature();
    }
    return kernels::vecmat(feature, combined_head);
}

FusedDecodeResult fused_decode(const DecoderStack& llm, const DecoderStack& lvlm, const TokenSequence& llm_prompt,
                               const TokenSequence& lvlm_prompt, const FusionConfig& config,
                               std::optional<TokenId> end_token, const FusionTrace* trace) {
    validate(config);
    require_compatible(llm, lvlm);
    if (llm_prompt.empty() || lvlm_prompt.empty()) throw PreconditionError("fused_decode needs non-empty prompts");
    resolve_merge_layers(config.merge_layers, llm.num_layers());

    const VocabAlignment align = align_vocab(llm.vocab_size(), lvlm.vocab_size());
    const Tensor2D head = combine_heads(llm.head_weights(), lvlm.head_weights(), config.head_weights, align);

    TokenSequence llm_ctx = llm_prompt;
    TokenSequence lvlm_ctx = lvlm_prompt;
    FusedDecodeResult result;
    for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
        result.last_logits = fused_logits(llm, lvlm, llm_ctx, lvlm_ctx, config, head, step, trace);
        const TokenId next = greedy_select(result.last_logits, config.seed);
        if (end_token && next == *end_token) break;
        result.tokens.push_back(next);
        llm_ctx.push_back(next);
        lvlm_ctx.push_back(next);
    }
    return result;
}

}  // namespace lvfuse
