#include "lvfuse/decoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "lvfuse/error.hpp"
#include "lvfuse/kernels.hpp"

namespace lvfuse {

namespace {

void require_shape(const Tensor2D& t, std::size_t rows, std::size_t cols, const std::string& name) {
    if (t.rows() != rows || t.cols() != cols) {
        throw ShapeError(name + " is " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

void validate_dims(const StackDims& d) {
    if (d.num_layers == 0 || d.model_dim == 0 || d.num_heads == 0) throw ShapeError("stack dimensions must be non-zero");
    if (d.vocab_size < 2) throw ShapeError("vocab_size must be at least 2");
    if (d.model_dim % d.num_heads != 0) throw ShapeError("num_heads must divide model_dim");
    if (d.head_dim() % 2 != 0) throw ShapeError("head dimension must be even for rotary positions");
}

Tensor2D rows_rms_norm(const Tensor2D& x, const Tensor2D& gain) {
    Tensor2D out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto n = kernels::rms_norm(x.row(r), gain.row(0));
        std::copy(n.begin(), n.end(), out.row(r).begin());
    }
    return out;
}

Tensor2D column_slice(const Tensor2D& x, std::size_t first, std::size_t count) {
    Tensor2D out(x.rows(), count);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, first + c);
    }
    return out;
}

void block_forward(const BlockWeights& w, const StackDims& dims, Tensor2D& x) {
    const Tensor2D normed = rows_rms_norm(x, w.attn_norm);
    const Tensor2D q = kernels::matmul(normed, w.wq);
    const Tensor2D k = kernels::matmul(normed, w.wk);
    const Tensor2D v = kernels::matmul(normed, w.wv);

    const std::size_t hd = dims.head_dim();
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    Tensor2D mixed(x.rows(), x.cols());
    for (std::size_t h = 0; h < dims.num_heads; ++h) {
        Tensor2D qh = column_slice(q, h * hd, hd);
        Tensor2D kh = column_slice(k, h * hd, hd);
        kernels::apply_rope(qh);
        kernels::apply_rope(kh);
        const Tensor2D out = kernels::causal_attention(qh, kh, column_slice(v, h * hd, hd), scale);
        for (std::size_t r = 0; r < out.rows(); ++r) {
            for (std::size_t c = 0; c < hd; ++c) mixed(r, h * hd + c) = out(r, c);
        }
    }
    const Tensor2D attn = kernels::matmul(mixed, w.wo);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += attn.data()[i];

    const Tensor2D normed2 = rows_rms_norm(x, w.mlp_norm);
    Tensor2D gate = kernels::matmul(normed2, w.w_gate);
    const Tensor2D up = kernels::matmul(normed2, w.w_up);
    for (std::size_t i = 0; i < gate.size(); ++i) gate.data()[i] = kernels::silu(gate.data()[i]) * up.data()[i];
    const Tensor2D down = kernels::matmul(gate, w.w_down);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += down.data()[i];
    kernels::require_finite(x.data(), "decoder block");
}

// Uniform in [-bound, bound) from the top 24 bits of a 64-bit Mersenne draw,
// so values do not depend on the standard library's distribution classes.
class WeightSampler {
public:
    explicit WeightSampler(std::uint64_t seed) : gen_(seed) {}

    Tensor2D uniform(std::size_t rows, std::size_t cols, float bound) {
        Tensor2D t(rows, cols);
        for (float& v : t.data()) {
            const float u = static_cast<float>(gen_() >> 40) * (1.0f / 16777216.0f);
            v = (2.0f * u - 1.0f) * bound;
        }
        return t;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace

DecoderStack::DecoderStack(StackDims dims, Tensor2D token_embeddings, std::vector<BlockWeights> blocks,
                           Tensor2D final_norm, Tensor2D head_weights)
    : dims_(dims),
      token_embeddings_(std::move(token_embeddings)),
      blocks_(std::move(blocks)),
      final_norm_(std::move(final_norm)),
      head_weights_(std::move(head_weights)) {
    validate_dims(dims_);
    const std::size_t d = dims_.model_dim;
    const std::size_t f = dims_.ffn_dim();
    require_shape(token_embeddings_, dims_.vocab_size, d, "token_embeddings");
    if (blocks_.size() != dims_.num_layers) {
        throw ShapeError("stack declares " + std::to_string(dims_.num_layers) + " layers but has " +
                         std::to_string(blocks_.size()) + " blocks");
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        const std::string p = "block " + std::to_string(i + 1) + " ";
        require_shape(b.attn_norm, 1, d, p + "attn_norm");
        require_shape(b.wq, d, d, p + "wq");
        require_shape(b.wk, d, d, p + "wk");
        require_shape(b.wv, d, d, p + "wv");
        require_shape(b.wo, d, d, p + "wo");
        require_shape(b.mlp_norm, 1, d, p + "mlp_norm");
        require_shape(b.w_gate, d, f, p + "w_gate");
        require_shape(b.w_up, d, f, p + "w_up");
        require_shape(b.w_down, f, d, p + "w_down");
    }
    require_shape(final_norm_, 1, d, "final_norm");
    require_shape(head_weights_, d, dims_.vocab_size, "head_weights");
}

std::uint32_t DecoderStack::resolve_layer(int layer) const {
    if (layer == -1) return dims_.num_layers;
    if (layer < 1 || static_cast<std::uint32_t>(layer) > dims_.num_layers) {
        throw PreconditionError("layer index " + std::to_string(layer) + " outside 1.." +
                                std::to_string(dims_.num_layers));
    }
    return static_cast<std::uint32_t>(layer);
}

DecoderStack seed_init(const StackDims& dims, std::uint64_t rng_seed) {
    validate_dims(dims);
    WeightSampler s(rng_seed);
    const std::size_t d = dims.model_dim;
    const std::size_t f = dims.ffn_dim();
    const float in_d = 1.0f / std::sqrt(static_cast<float>(d));
    const float in_f = 1.0f / std::sqrt(static_cast<float>(f));

    Tensor2D emb = s.uniform(dims.vocab_size, d, 1.0f);
    std::vector<BlockWeights> blocks;
    blocks.reserve(dims.num_layers);
    for (std::uint32_t l = 0; l < dims.num_layers; ++l) {
        BlockWeights b;
        b.attn_norm = Tensor2D(1, d, 1.0f);
        b.wq = s.uniform(d, d, in_d);
        b.wk = s.uniform(d, d, in_d);
        b.wv = s.uniform(d, d, in_d);
        b.wo = s.uniform(d, d, 0.5f * in_d);
        b.mlp_norm = Tensor2D(1, d, 1.0f);
        b.w_gate = s.uniform(d, f, in_d);
        b.w_up = s.uniform(d, f, in_d);
        b.w_down = s.uniform(f, d, 0.5f * in_f);
        blocks.push_back(std::move(b));
    }
    Tensor2D head = s.uniform(d, dims.vocab_size, in_d);
    return DecoderStack(dims, std::move(emb), std::move(blocks), Tensor2D(1, d, 1.0f), std::move(head));
}

ForwardPass::ForwardPass(const DecoderStack& stack, std::span<const TokenId> tokens)
    : stack_(&stack), states_(tokens.size(), stack.model_dim()) {
    if (tokens.empty()) throw PreconditionError("token sequence is empty");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= stack.vocab_size()) {
            throw VocabError("token " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                             " is outside vocabulary of " + std::to_string(stack.vocab_size()));
        }
        const auto src = stack.token_embeddings().row(tokens[i]);
        std::copy(src.begin(), src.end(), states_.row(i).begin());
    }
}

void ForwardPass::run_block() {
    if (finished()) throw PreconditionError("all blocks already ran");
    block_forward(stack_->blocks()[layers_done_], stack_->dims(), states_);
    ++layers_done_;
}

std::vector<float> ForwardPass::final_feature() const {
    if (!finished()) throw PreconditionError("final feature requested before the last block ran");
    kernels::require_finite(last_state(), "injected state");
    return kernels::rms_norm(last_state(), stack_->final_norm().row(0));
}

std::vector<float> ForwardPass::logits() const { return kernels::vecmat(final_feature(), stack_->head_weights()); }

ForwardResult forward_full(const DecoderStack& stack, std::span<const TokenId> tokens,
                           const std::map<int, Injection>& injections, bool keep_full_states) {
    std::map<std::uint32_t, const Injection*> by_layer;
    for (const auto& [layer, inj] : injections) {
        const std::uint32_t resolved = stack.resolve_layer(layer);
        if (!by_layer.emplace(resolved, &inj).second) {
            throw PreconditionError("two injections resolve to layer " + std::to_string(resolved));
        }
    }

    ForwardPass pass(stack, tokens);
    ForwardResult result;
    result.taps.reserve(stack.num_layers());
    while (!pass.finished()) {
        pass.run_block();
        const std::uint32_t layer = pass.layers_done();
        LayerTapRecord tap;
        tap.layer_index = layer;
        tap.last_token_state.assign(pass.last_state().begin(), pass.last_state().end());
        if (keep_full_states) tap.full_states = pass.states();
        result.taps.push_back(std::move(tap));

        auto it = by_layer.find(layer);
        if (it == by_layer.end()) continue;
        if (const auto* vec = std::get_if<std::vector<float>>(it->second)) {
            if (vec->size() != stack.model_dim()) {
                throw ShapeError("injection at layer " + std::to_string(layer) + " has length " +
                                 std::to_string(vec->size()) + ", expected " + std::to_string(stack.model_dim()));
            }
            std::copy(vec->begin(), vec->end(), pass.last_state().begin());
        } else {
            const auto& full = std::get<Tensor2D>(*it->second);
            if (full.rows() != pass.states().rows() || full.cols() != stack.model_dim()) {
                throw ShapeError("full-state injection at layer " + std::to_string(layer) + " has wrong shape");
            }
            pass.states() = full;
        }
    }
    result.logits = pass.logits();
    return result;
}

TokenId greedy_select(std::span<const float> logits, std::uint64_t /*seed*/) {
    if (logits.empty()) throw ShapeError("greedy_select on empty logits");
    kernels::require_finite(logits, "greedy_select input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

TokenSequence greedy_decode(const DecoderStack& stack, const TokenSequence& prompt, std::size_t max_new_tokens,
                            std::optional<TokenId> end_token, std::uint64_t seed) {
    TokenSequence context = prompt;
    TokenSequence generated;
    for (std::size_t step = 0; step < max_new_tokens; ++step) {
        const auto result = forward_full(stack, context);
        const TokenId next = greedy_select(result.logits, seed);
        if (end_token && next == *end_token) break;
        generated.push_back(next);
        context.push_back(next);
    }
    return generated;
}

namespace {

template <typename Fn>
void for_each_tensor(const DecoderStack& s, Fn&& fn) {
    fn(s.token_embeddings());
    for (const auto& b : s.blocks()) {
        for (const Tensor2D* t : {&b.attn_norm, &b.wq, &b.wk, &b.wv, &b.wo, &b.mlp_norm, &b.w_gate, &b.w_up, &b.w_down}) {
            fn(*t);
        }
    }
    fn(s.final_norm());
    fn(s.head_weights());
}

Tensor2D read_tensor(detail::ByteReader& in, std::size_t rows, std::size_t cols, const char* field) {
    Tensor2D t(rows, cols);
    in.f32s(t.data(), field);
    return t;
}

}  // namespace

void save_stack(const DecoderStack& stack, const std::filesystem::path& path) {
    detail::ByteWriter out;
    out.raw("LVFW");
    out.u32(kWeightFormatVersion);
    const auto& d = stack.dims();
    out.u32(d.num_layers);
    out.u32(d.model_dim);
    out.u32(d.vocab_size);
    out.u32(d.num_heads);
    for_each_tensor(stack, [&](const Tensor2D& t) { out.f32s(t.data()); });
    out.write_to(path);
}

DecoderStack load_stack(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    if (in.raw(4, "magic") != "LVFW") throw FormatError("magic", "not a weight file (expected LVFW)");
    const std::uint32_t version = in.u32("version");
    if (version != kWeightFormatVersion) {
        throw FormatError("version", "unsupported format version " + std::to_string(version));
    }
    StackDims d;
    d.num_layers = in.u32("num_layers");
    d.model_dim = in.u32("model_dim");
    d.vocab_size = in.u32("vocab_size");
    d.num_heads = in.u32("num_heads");
    if (d.num_layers == 0 || d.num_layers > 4096) throw FormatError("num_layers", "implausible value " + std::to_string(d.num_layers));
    if (d.model_dim == 0 || d.model_dim > 65536) throw FormatError("model_dim", "implausible value " + std::to_string(d.model_dim));
    if (d.vocab_size < 2 || d.vocab_size > (1u << 24)) throw FormatError("vocab_size", "implausible value " + std::to_string(d.vocab_size));
    if (d.num_heads == 0 || d.model_dim % d.num_heads != 0 || d.head_dim() % 2 != 0) {
        throw FormatError("num_heads", "value " + std::to_string(d.num_heads) + " incompatible with model_dim " +
                                           std::to_string(d.model_dim));
    }

    const std::uint64_t m = d.model_dim;
    const std::uint64_t f = d.ffn_dim();
    const std::uint64_t expected_floats =
        d.vocab_size * m + d.num_layers * (2 * m + 4 * m * m + 3 * m * f) + m + m * d.vocab_size;
    if (in.remaining() != expected_floats * 4) {
        throw FormatError("payload", "header declares " + std::to_string(expected_floats * 4) +
                                         " tensor bytes but file holds " + std::to_string(in.remaining()) +
                                         (in.remaining() < expected_floats * 4 ? " (truncated)" : ""));
    }

    Tensor2D emb = read_tensor(in, d.vocab_size, m, "token_embeddings");
    std::vector<BlockWeights> blocks(d.num_layers);
    for (auto& b : blocks) {
        b.attn_norm = read_tensor(in, 1, m, "attn_norm");
        b.wq = read_tensor(in, m, m, "wq");
        b.wk = read_tensor(in, m, m, "wk");
        b.wv = read_tensor(in, m, m, "wv");
        b.wo = read_tensor(in, m, m, "wo");
        b.mlp_norm = read_tensor(in, 1, m, "mlp_norm");
        b.w_gate = read_tensor(in, m, f, "w_gate");
        b.w_up = read_tensor(in, m, f, "w_up");
        b.w_down = read_tensor(in, f, m, "w_down");
    }
    Tensor2D final_norm = read_tensor(in, 1, m, "final_norm");
    Tensor2D head = read_tensor(in, m, d.vocab_size, "head_weights");
    in.expect_end();

    DecoderStack stack(d, std::move(emb), std::move(blocks), std::move(final_norm), std::move(head));
    for_each_tensor(stack, [](const Tensor2D& t) { kernels::require_finite(t.data(), "weight file"); });
    return stack;
}

}  // namespace lvfuse
