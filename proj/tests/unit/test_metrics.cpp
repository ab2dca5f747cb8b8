#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>

#include "permsec/metrics.hpp"
#include "permsec/rng.hpp"

using namespace permsec;

TEST_CASE("bleu on hand-counted examples") {
    const TokenSeq abcd{0, 1, 2, 3};
    CHECK(bleu(abcd, abcd, 4) == doctest::Approx(1.0));
    for (int n = 1; n <= 4; ++n) CHECK(bleu(abcd, abcd, n) == doctest::Approx(1.0));

    // "a b c d" vs "a b x y": 2 of 4 unigrams match, brevity penalty 1
    const TokenSeq ref{0, 1, 8, 9};
    CHECK(bleu(abcd, ref, 1) == doctest::Approx(0.5));

    // no bigram matches => geometric mean collapses to zero
    CHECK(bleu(abcd, TokenSeq{3, 2, 1, 0}, 2) == 0.0);
    CHECK(bleu(TokenSeq{5, 6}, abcd, 1) == 0.0);

    // brevity penalty: candidate "a b" against a 4-token reference
    const double expected = std::exp(1.0 - 4.0 / 2.0) * 1.0;
    CHECK(bleu(TokenSeq{0, 1}, abcd, 1) == doctest::Approx(expected));

    CHECK(bleu(TokenSeq{}, abcd, 1) == 0.0);
    CHECK_THROWS_AS(bleu(abcd, TokenSeq{}, 1), std::invalid_argument);
    CHECK_THROWS_AS(bleu(abcd, abcd, 5), std::invalid_argument);
}

TEST_CASE("bleu is invariant under vocabulary relabeling") {
    Rng rng(3);
    for (int iter = 0; iter < 50; ++iter) {
        TokenSeq cand(12), ref(12);
        for (auto& t : cand) t = static_cast<int>(rng.below(6));
        for (auto& t : ref) t = static_cast<int>(rng.below(6));
        // random bijection on token ids 0..5
        std::vector<int> relabel{0, 1, 2, 3, 4, 5};
        for (std::size_t i = 6; i > 1; --i)
            std::swap(relabel[i - 1], relabel[rng.below(i)]);
        TokenSeq cand2(12), ref2(12);
        for (std::size_t i = 0; i < 12; ++i) {
            cand2[i] = relabel[cand[i]];
            ref2[i] = relabel[ref[i]];
        }
        for (int n = 1; n <= 4; ++n)
            CHECK(bleu(cand, ref, n) == doctest::Approx(bleu(cand2, ref2, n)));
    }
}

TEST_CASE("psnr follows 10*log10(peak^2/mse)") {
    Tensor a(2, 2), b(2, 2);
    CHECK(psnr(a, b, 1.0) == std::numeric_limits<double>::infinity());

    for (double& v : b.data()) v = 0.1; // mse = 0.01
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    for (double& v : b.data()) v = 0.5; // mse = 0.25
    CHECK(psnr(a, b, 1.0) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
    CHECK(psnr(a, b, 1.0) == doctest::Approx(6.0206).epsilon(1e-4));

    // strictly decreasing in mse at fixed peak
    double prev = std::numeric_limits<double>::infinity();
    for (double level : {0.01, 0.05, 0.2, 0.7}) {
        Tensor worse(2, 2);
        for (double& v : worse.data()) v = level;
        const double value = psnr(a, worse, 1.0);
        CHECK(value < prev);
        prev = value;
    }

    CHECK_THROWS_AS(psnr(a, Tensor(3, 2), 1.0), std::invalid_argument);
}

TEST_CASE("mse basics") {
    CHECK(mse(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{1, 2}})) == 0.0);
    CHECK(mse(Tensor::from_rows({{0, 0}}), Tensor::from_rows({{1, 1}})) == 1.0);
    CHECK(mse(Tensor::from_rows({{0, 2}}), Tensor::from_rows({{0, 0}})) == 2.0);
    CHECK_THROWS_AS(mse(Tensor(1, 2), Tensor(2, 1)), std::invalid_argument);
}

TEST_CASE("token_accuracy counts matching positions") {
    CHECK(token_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(token_accuracy({1, 2, 3}, {4, 5, 6}) == 0.0);
    CHECK(token_accuracy({1, 2, 3, 4}, {1, 2, 9, 9}) == 0.5);
    CHECK_THROWS_AS(token_accuracy({1}, {1, 2}), std::invalid_argument);
}
