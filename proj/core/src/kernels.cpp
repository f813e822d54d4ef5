#include "lvfuse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lvfuse/error.hpp"

namespace lvfuse::kernels {

void require_finite(std::span<const float> values, const char* where) {
    for (float v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + where);
    }
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Tensor2D out(a.rows(), b.cols());
    // i-k-j order: each out(i, j) still accumulates over k ascending.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const float aik = a(i, k);
            auto src = b.row(k);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
        }
    }
    require_finite(out.data(), "matmul");
    return out;
}

std::vector<float> vecmat(std::span<const float> v, const Tensor2D& m) {
    if (v.size() != m.rows()) {
        throw ShapeError("vecmat: vector of " + std::to_string(v.size()) + " against " + std::to_string(m.rows()) +
                         " rows");
    }
    std::vector<float> out(m.cols(), 0.0f);
    for (std::size_t k = 0; k < v.size(); ++k) {
        const float vk = v[k];
        auto src = m.row(k);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += vk * src[j];
    }
    require_finite(out, "vecmat");
    return out;
}

std::vector<float> softmax(std::span<const float> v) {
    if (v.empty()) throw ShapeError("softmax of empty vector");
    require_finite(v, "softmax input");
    const float peak = *std::max_element(v.begin(), v.end());
    std::vector<float> out(v.size());
    float total = 0.0f;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - peak);
        total += out[i];
    }
    for (float& x : out) x /= total;
    return out;
}

std::vector<float> rms_norm(std::span<const float> v, std::span<const float> gain) {
    if (v.empty() || v.size() != gain.size()) {
        throw ShapeError("rms_norm: vector of " + std::to_string(v.size()) + " with gain of " +
                         std::to_string(gain.size()));
    }
    float sum_sq = 0.0f;
    for (float x : v) sum_sq += x * x;
    const float inv = 1.0f / std::sqrt(sum_sq / static_cast<float>(v.size()) + kRmsNormEpsilon);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv * gain[i];
    require_finite(out, "rms_norm");
    return out;
}

Tensor2D causal_attention(const Tensor2D& q, const Tensor2D& k, const Tensor2D& v, float scale) {
    if (q.rows() != k.rows() || q.rows() != v.rows()) throw ShapeError("causal_attention: sequence lengths differ");
    if (q.cols() != k.cols()) throw ShapeError("causal_attention: query and key widths differ");
    const std::size_t seq = q.rows();
    Tensor2D out(seq, v.cols());
    std::vector<float> scores;
    for (std::size_t i = 0; i < seq; ++i) {
        scores.assign(i + 1, 0.0f);
        for (std::size_t j = 0; j <= i; ++j) {
            float dot = 0.0f;
            for (std::size_t d = 0; d < q.cols(); ++d) dot += q(i, d) * k(j, d);
            scores[j] = dot * scale;
        }
        const auto probs = softmax(scores);
        auto dst = out.row(i);
        for (std::size_t j = 0; j <= i; ++j) {
            auto src = v.row(j);
            for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += probs[j] * src[d];
        }
    }
    require_finite(out.data(), "causal_attention");
    return out;
}

void apply_rope(Tensor2D& x, float theta) {
    const std::size_t half = x.cols() / 2;
    for (std::size_t pos = 0; pos < x.rows(); ++pos) {
        auto r = x.row(pos);
        for (std::size_t i = 0; i < half; ++i) {
            const double freq = std::pow(static_cast<double>(theta), -2.0 * static_cast<double>(i) / x.cols());
            const double angle = static_cast<double>(pos) * freq;
            const float c = static_cast<float>(std::cos(angle));
            const float s = static_cast<float>(std::sin(angle));
            const float a = r[i];
            const float b = r[i + half];
            r[i] = a * c - b * s;
            r[i + half] = a * s + b * c;
        }
    }
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

}  // namespace lvfuse::kernels
