#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lvfuse::eval {

inline constexpr double kRougeBeta = 1.2;

// Lowercases, turns ASCII punctuation into spaces and splits on whitespace.
std::vector<std::string> rouge_tokens(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// LCS F-measure of two token sequences: (1 + b^2) P R / (R + b^2 P).
double rouge_l_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                      double beta = kRougeBeta);

// ROUGE-L F-measure, maximized over references. Empty candidate scores 0.
double rouge_l(std::string_view candidate, const std::vector<std::string>& references, double beta = kRougeBeta);

}  // namespace lvfuse::eval
