#include "permsec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace permsec {

namespace {

std::map<std::vector<int>, int> ngram_counts(const TokenSeq& seq, int n) {
    std::map<std::vector<int>, int> counts;
    if (static_cast<int>(seq.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= seq.size(); ++i)
        ++counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
    return counts;
}

} // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n) {
    if (max_n < 1 || max_n > 4)
        throw std::invalid_argument("bleu: max_n must be in 1..4");
    if (reference.empty())
        throw std::invalid_argument("bleu: empty reference");
    if (candidate.empty()) return 0.0;

    double log_precision_sum = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        long total = 0, clipped = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            const auto it = ref.find(gram);
            if (it != ref.end()) clipped += std::min(count, it->second);
        }
        if (total == 0 || clipped == 0) return 0.0;
        log_precision_sum += std::log(static_cast<double>(clipped) /
                                      static_cast<double>(total));
    }
    const double geo_mean = std::exp(log_precision_sum / max_n);
    const double ratio = static_cast<double>(reference.size()) /
                         static_cast<double>(candidate.size());
    const double brevity = std::min(1.0, std::exp(1.0 - ratio));
    return geo_mean * brevity;
}

double psnr(const Tensor& reference, const Tensor& reconstruction, double peak) {
    const double err = mse(reference, reconstruction);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / err);
}

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
    if (a.empty()) throw std::invalid_argument("mse: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double token_accuracy(const TokenSeq& pred, const TokenSeq& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("token_accuracy: length mismatch");
    if (pred.empty()) throw std::invalid_argument("token_accuracy: empty sequences");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

} // namespace permsec
