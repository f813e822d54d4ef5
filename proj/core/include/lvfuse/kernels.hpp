#pragma once

#include <span>
#include <vector>

#include "lvfuse/tensor.hpp"

// Dense kernels for the toy decoder. Accumulation order is fixed (ascending
// inner index) and the library is built with -ffp-contract=off, so results
// are bit-identical across runs and thread counts.
namespace lvfuse::kernels {

inline constexpr float kRmsNormEpsilon = 1e-6f;

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

// Row vector times matrix: out[j] = sum_k v[k] * m(k, j).
std::vector<float> vecmat(std::span<const float> v, const Tensor2D& m);

std::vector<float> softmax(std::span<const float> v);

std::vector<float> rms_norm(std::span<const float> v, std::span<const float> gain);

// Single-head causal attention. q, k, v are seq_len x head_dim; position i
// attends to positions 0..i only.
Tensor2D causal_attention(const Tensor2D& q, const Tensor2D& k, const Tensor2D& v, float scale);

// Rotary position embedding applied in place to each row (one row per
// position) of a single head slice.
void apply_rope(Tensor2D& x, float theta = 10000.0f);

float silu(float x);

// Throws NumericError when any value is NaN or infinite.
void require_finite(std::span<const float> values, const char* where);

}  // namespace lvfuse::kernels
