#pragma once

#include <vector>

#include "permsec/tensor.hpp"

namespace permsec {

using TokenSeq = std::vector<int>;

// Sentence BLEU: geometric mean of clipped n-gram precisions for
// n = 1..max_n, times the brevity penalty min(1, e^(1 - ref/cand)).
// Unsmoothed: a zero precision at any order zeroes the score. Empty
// candidate scores 0.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_n = 4);

// 10*log10(peak^2/MSE) in dB; +infinity when the tensors are identical.
double psnr(const Tensor& reference, const Tensor& reconstruction, double peak);

double mse(const Tensor& a, const Tensor& b);

// Fraction of positions that match; sequences must have equal length.
double token_accuracy(const TokenSeq& pred, const TokenSeq& truth);

} // namespace permsec
