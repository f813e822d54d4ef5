#include "lvfuse/rouge.hpp"

#include <algorithm>
#include <cctype>

namespace lvfuse::eval {

std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::ispunct(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l_tokens(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                      double beta) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0) return 0.0;
    const double precision = lcs / static_cast<double>(candidate.size());
    const double recall = lcs / static_cast<double>(reference.size());
    const double b2 = beta * beta;
    return (1.0 + b2) * precision * recall / (recall + b2 * precision);
}

double rouge_l(std::string_view candidate, const std::vector<std::string>& references, double beta) {
    const auto cand = rouge_tokens(candidate);
    double best = 0.0;
    for (const auto& ref : references) best = std::max(best, rouge_l_tokens(cand, rouge_tokens(ref), beta));
    return best;
}

}  // namespace lvfuse::eval
