#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "permsec/rng.hpp"
#include "permsec/shuffle.hpp"

using namespace permsec;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t(rows, cols);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

Tensor matrix_as_tensor(const PermMatrix& m) {
    Tensor t(m.size, m.size);
    t.data() = m.data;
    return t;
}

} // namespace

TEST_CASE("sample_key is uniform over the grain-induced keyspace") {
    // (3,3), g=1: some key among 3!*3! possibilities, deterministic per seed
    const PermKey a = sample_key(3, 3, 1, 1, 7);
    const PermKey b = sample_key(3, 3, 1, 1, 7);
    CHECK(a == b);
    CHECK(is_permutation(a.row_perm));
    CHECK(is_permutation(a.col_perm));
    CHECK(a.row_perm.size() == 3);

    // (6,1), g_r=6: a single block, so the row permutation is the identity
    const PermKey single = sample_key(6, 1, 6, 1, 3);
    CHECK(single.row_perm == std::vector<std::uint32_t>{0});

    // (6,1), g_r=2: exhaustive seed sweep sees all 3! block orders
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const PermKey k = sample_key(6, 1, 2, 1, seed);
        CHECK(k.row_perm.size() == 3);
        seen.insert(k.serialize());
    }
    CHECK(seen.size() == 6);

    CHECK_THROWS_AS(sample_key(5, 4, 2, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(sample_key(4, 5, 1, 2, 0), std::invalid_argument);
}

TEST_CASE("to_matrix builds block permutation matrices") {
    const PermMatrix ident = to_matrix({0, 1, 2});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(ident.at(i, j) == (i == j ? 1.0 : 0.0));

    const PermMatrix swap = to_matrix({1, 0});
    CHECK(swap.at(0, 1) == 1.0);
    CHECK(swap.at(1, 0) == 1.0);
    CHECK(swap.at(0, 0) == 0.0);

    // block 2 expansion equals the Kronecker product P (x) I_2
    const PermMatrix blocked = to_matrix({1, 0}, 2);
    Tensor p(2, 2);
    p.at(0, 1) = p.at(1, 0) = 1.0;
    Tensor eye2(2, 2);
    eye2.at(0, 0) = eye2.at(1, 1) = 1.0;
    const Tensor expanded = oracle::kronecker(p, eye2);
    CHECK(matrix_as_tensor(blocked) == expanded);
    // direct multiplication swaps row pairs {0,1} and {2,3}
    Rng rng(11);
    const Tensor u = random_tensor(4, 3, rng);
    const Tensor swapped = blocked.apply_left(u);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(swapped.at(0, j) == u.at(2, j));
        CHECK(swapped.at(3, j) == u.at(1, j));
    }
}

TEST_CASE("orthogonality: P * P^T is the identity") {
    Rng rng(5);
    for (int iter = 0; iter < 20; ++iter) {
        const PermKey key = sample_key(8, 8, 1, 1, rng.next_u64());
        const PermMatrix p = to_matrix(key.row_perm);
        const Tensor prod =
            oracle::matmul(matrix_as_tensor(p), matrix_as_tensor(p.transposed()));
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j)
                CHECK(prod.at(i, j) == (i == j ? 1.0 : 0.0));
    }
}

TEST_CASE("shuffle_rows matches the matrix product exactly") {
    // identity key leaves U untouched
    Rng rng(17);
    const Tensor u = random_tensor(3, 3, rng);
    CHECK(shuffle_rows(u, identity_key(3, 3, 1, 1)) == u);

    // row_perm (2,0,1) gathers rows (r2, r0, r1)
    PermKey key = identity_key(3, 3, 1, 1);
    key.row_perm = {2, 0, 1};
    const Tensor shuffled = shuffle_rows(u, key);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(shuffled.at(0, j) == u.at(2, j));
        CHECK(shuffled.at(1, j) == u.at(0, j));
        CHECK(shuffled.at(2, j) == u.at(1, j));
    }
    CHECK(shuffled == oracle::matmul(matrix_as_tensor(to_matrix(key.row_perm)), u));

    CHECK(unshuffle_rows(shuffled, key) == u);

    Tensor wrong(4, 3);
    CHECK_THROWS_AS(shuffle_rows(wrong, key), std::invalid_argument);
}

TEST_CASE("matrix consistency on random 8x8 tensors") {
    Rng rng(23);
    for (int iter = 0; iter < 100; ++iter) {
        const Tensor u = random_tensor(8, 8, rng);
        const std::uint32_t g = (iter % 3 == 0) ? 2 : 1;
        const PermKey key = sample_key(8, 8, g, g, rng.next_u64());
        const Tensor by_index = shuffle_rows(u, key);
        const Tensor by_matrix =
            oracle::matmul(matrix_as_tensor(to_matrix(key.row_perm, g)), u);
        CHECK(by_index == by_matrix);
        const Tensor cols_by_index = shuffle_cols(u, key);
        const Tensor cols_by_matrix =
            oracle::matmul(u, matrix_as_tensor(to_col_matrix(key.col_perm, g)));
        CHECK(cols_by_index == cols_by_matrix);
    }
}

TEST_CASE("shuffle_cols basics") {
    Rng rng(29);
    const Tensor u = random_tensor(2, 2, rng);
    CHECK(shuffle_cols(u, identity_key(2, 2, 1, 1)) == u);
    PermKey key = identity_key(2, 2, 1, 1);
    key.col_perm = {1, 0};
    const Tensor swapped = shuffle_cols(u, key);
    CHECK(swapped.at(0, 0) == u.at(0, 1));
    CHECK(swapped.at(1, 0) == u.at(1, 1));
}

TEST_CASE("row+column shuffles cover exactly 36 arrangements of a 3x3, not all") {
    Tensor u(3, 3);
    for (std::size_t i = 0; i < 9; ++i) u.data()[i] = static_cast<double>(i + 1);

    std::set<std::vector<double>> arrangements;
    std::vector<std::uint32_t> row{0, 1, 2}, col{0, 1, 2};
    std::sort(row.begin(), row.end());
    do {
        std::vector<std::uint32_t> c{0, 1, 2};
        do {
            PermKey key = identity_key(3, 3, 1, 1);
            key.row_perm = row;
            key.col_perm = c;
            arrangements.insert(shuffle_cols(shuffle_rows(u, key), key).data());
        } while (std::next_permutation(c.begin(), c.end()));
    } while (std::next_permutation(row.begin(), row.end()));

    CHECK(arrangements.size() == 36); // == |keyspace|, far below 9!

    // the excluded pattern of the paper's counterexample: swapping just two
    // entries inside one row cannot be produced by any (row, col) pair
    Tensor excluded = u;
    std::swap(excluded.at(0, 0), excluded.at(0, 1));
    CHECK(arrangements.count(excluded.data()) == 0);
}

TEST_CASE("filter shuffling on rank-3 tensors") {
    Rng rng(31);
    Tensor u(2, 3, 4);
    for (double& v : u.data()) v = rng.uniform(-1.0, 1.0);

    PermKey key = identity_key(3, 4, 1, 1);
    key.filter_perm = std::vector<std::uint32_t>{0, 1};
    CHECK(shuffle_filters(u, key) == u);

    key.filter_perm = std::vector<std::uint32_t>{1, 0};
    const Tensor swapped = shuffle_filters(u, key);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(swapped.at(0, r, c) == u.at(1, r, c));
            CHECK(swapped.at(1, r, c) == u.at(0, r, c));
        }

    // 3-order round trip
    const PermKey k3 = sample_key(2, 4, 4, 1, 1, 99);
    Tensor t(2, 4, 4);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    const Tensor fwd = shuffle_cols(shuffle_rows(shuffle_filters(t, k3), k3), k3);
    const Tensor back = unshuffle_filters(unshuffle_rows(unshuffle_cols(fwd, k3), k3), k3);
    CHECK(back == t);

    PermKey no_filter = identity_key(4, 4, 1, 1);
    CHECK_THROWS_AS(shuffle_filters(t, no_filter), std::invalid_argument);
}

TEST_CASE("inverse composes to the identity") {
    PermKey key = identity_key(3, 3, 1, 1);
    CHECK(inverse(key) == key);

    key.row_perm = {2, 0, 1};
    CHECK(inverse(key).row_perm == std::vector<std::uint32_t>{1, 2, 0});
    Rng rng(41);
    const Tensor u = random_tensor(3, 3, rng);
    CHECK(shuffle_rows(shuffle_rows(u, key), inverse(key)) == u);

    for (int iter = 0; iter < 100; ++iter) {
        const PermKey k = sample_key(8, 4, iter % 2 ? 2 : 1, 1, rng.next_u64());
        CHECK(inverse(inverse(k)) == k);
    }
}

TEST_CASE("round trip is bitwise for random tensors and keys") {
    Rng rng(43);
    for (int iter = 0; iter < 100; ++iter) {
        const Tensor u = random_tensor(8, 6, rng);
        const PermKey k = sample_key(8, 6, iter % 2 ? 4 : 1, iter % 3 ? 2 : 1,
                                     rng.next_u64());
        CHECK(unshuffle_cols(unshuffle_rows(shuffle_rows(shuffle_cols(u, k), k), k), k) ==
              u);
    }
}

TEST_CASE("keyspace_size is the exact product of factorials") {
    CHECK(keyspace_size(3, 3, 1, 1, ShuffleMode::row_column) == 36);
    CHECK(keyspace_size(6, 1, 2, 1, ShuffleMode::row) == 6);
    CHECK(keyspace_size(2, 2, 1, 1, ShuffleMode::three_order, 2) == 8);
    CHECK(keyspace_size(6, 1, 6, 1, ShuffleMode::row) == 1);
    CHECK(keyspace_size(64, 16, 1, 1, ShuffleMode::none) == 1);
    // 64! has 90 digits; sanity-check through GMP
    const mpz_class big = keyspace_size(64, 16, 1, 1, ShuffleMode::row);
    mpz_class expected;
    mpz_fac_ui(expected.get_mpz_t(), 64);
    CHECK(big == expected);
}

TEST_CASE("key_rate reproduces the paper's table") {
    // text feature: N=31 tokens, L=16
    CHECK(std::fabs(key_rate(31, 16, 1, 1, ShuffleMode::row, DataKind::text_image) -
                    3.63) < 0.01);
    CHECK(std::fabs(key_rate(31, 16, 1, 1, ShuffleMode::column, DataKind::text_image) -
                    1.42) < 0.01);
    CHECK(std::fabs(key_rate(31, 16, 1, 1, ShuffleMode::row_column,
                             DataKind::text_image) -
                    5.05) < 0.01);
    // image feature: N=64 patches, L=16
    CHECK(std::fabs(key_rate(64, 16, 1, 1, ShuffleMode::row, DataKind::text_image) -
                    4.62) < 0.01);
    CHECK(std::fabs(key_rate(64, 16, 1, 1, ShuffleMode::column, DataKind::text_image) -
                    0.69) < 0.01);
    CHECK(std::fabs(key_rate(64, 16, 1, 1, ShuffleMode::row_column,
                             DataKind::text_image) -
                    5.31) < 0.01);
    // empty keyspace
    CHECK(key_rate(1, 1, 1, 1, ShuffleMode::row_column, DataKind::text_image) == 0.0);

    // lgamma route agrees with exact factorials
    for (unsigned long n : {2ul, 5ul, 16ul, 31ul, 64ul}) {
        const double via_lgamma = log2_keyspace(n, 1, 1, 1, ShuffleMode::row);
        CHECK(via_lgamma ==
              doctest::Approx(oracle::log2_factorial_mpz(n)).epsilon(1e-12));
    }

    // audio normalization divides by N*L*C
    const double audio = key_rate(4, 4, 1, 1, ShuffleMode::three_order,
                                  DataKind::audio, 2);
    const double expected = (oracle::log2_factorial_mpz(4) * 2 +
                             oracle::log2_factorial_mpz(2)) /
                            (4.0 * 4.0 * 2.0);
    CHECK(audio == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("key_rate is monotone non-increasing in grain") {
    double prev = std::numeric_limits<double>::infinity();
    for (std::uint32_t g : {1u, 2u, 4u, 8u, 16u}) {
        const double r = key_rate(16, 16, g, g, ShuffleMode::row_column,
                                  DataKind::text_image);
        CHECK(r <= prev + 1e-12);
        prev = r;
    }
}

TEST_CASE("PermKey serialization round trips through the canonical form") {
    PermKey key = identity_key(4, 4, 2, 1);
    key.row_perm = {1, 0};
    key.col_perm = {2, 0, 1, 3};
    CHECK(key.serialize() == "2,1;row:1,0;col:2,0,1,3");
    CHECK(PermKey::parse(key.serialize()) == key);

    PermKey with_filter = key;
    with_filter.filter_perm = std::vector<std::uint32_t>{1, 2, 0};
    CHECK(with_filter.serialize() == "2,1;row:1,0;col:2,0,1,3;filter:1,2,0");
    CHECK(PermKey::parse(with_filter.serialize()) == with_filter);

    CHECK_THROWS_AS(PermKey::parse("junk"), std::invalid_argument);
    CHECK_THROWS_AS(PermKey::parse("1,1;row:0,0;col:0"), std::invalid_argument);
}
