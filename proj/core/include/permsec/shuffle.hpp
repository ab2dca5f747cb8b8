#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

#include "permsec/rng.hpp"
#include "permsec/tensor.hpp"

namespace permsec {

enum class ShuffleMode { none, row, column, row_column, three_order };
enum class DataKind { text_image, audio };

std::string to_string(ShuffleMode mode);
ShuffleMode shuffle_mode_from_string(std::string_view s);

// The shared secret K = (K_R, K_C[, K_F]): one permutation per shuffled
// axis. Permutations act on blocks of `grain` contiguous indices, so
// row_perm has N/grain_row entries for an N-row tensor.
struct PermKey {
    std::vector<std::uint32_t> row_perm;
    std::vector<std::uint32_t> col_perm;
    std::optional<std::vector<std::uint32_t>> filter_perm;
    std::uint32_t grain_row = 1;
    std::uint32_t grain_col = 1;

    bool is_identity() const;

    // Canonical textual form: g_r,g_c;row:<csv>;col:<csv>[;filter:<csv>]
    std::string serialize() const;
    static PermKey parse(std::string_view text);

    friend bool operator==(const PermKey&, const PermKey&) = default;
};

// 0/1 block-permutation matrix, materialized for tests and the
// matrix-consistency checks; the fast path applies keys by index gather.
struct PermMatrix {
    std::size_t size = 0;
    std::vector<double> data; // size x size, row-major

    double at(std::size_t i, std::size_t j) const { return data[i * size + j]; }
    PermMatrix transposed() const;
    Tensor apply_left(const Tensor& u) const;  // P * U
    Tensor apply_right(const Tensor& u) const; // U * P
};

bool is_permutation(const std::vector<std::uint32_t>& perm);

// Uniformly random permutation key for an (N,L) tensor; filterless.
PermKey sample_key(std::size_t n, std::size_t l,
                   std::uint32_t grain_row, std::uint32_t grain_col,
                   std::uint64_t rng_seed);
// Three-order variant for a (C,N,L) tensor; adds a filter permutation.
PermKey sample_key(std::size_t c, std::size_t n, std::size_t l,
                   std::uint32_t grain_row, std::uint32_t grain_col,
                   std::uint64_t rng_seed);
PermKey identity_key(std::size_t n, std::size_t l,
                     std::uint32_t grain_row, std::uint32_t grain_col);

// Row-permutation matrix: permuting the rows of the identity, expanded to
// blocks of `block` indices. Row i of the result is e_{perm[i]}, so
// (P*U).row(i) == U.row(perm[i]).
PermMatrix to_matrix(const std::vector<std::uint32_t>& perm, std::uint32_t block = 1);
// Column form (permuted columns of the identity): U*P gathers columns the
// same way P*U gathers rows. Equal to to_matrix(perm, block).transposed().
PermMatrix to_col_matrix(const std::vector<std::uint32_t>& perm, std::uint32_t block = 1);

Tensor shuffle_rows(const Tensor& u, const PermKey& key);
Tensor shuffle_cols(const Tensor& u, const PermKey& key);
Tensor shuffle_filters(const Tensor& u, const PermKey& key);
Tensor unshuffle_rows(const Tensor& u, const PermKey& key);
Tensor unshuffle_cols(const Tensor& u, const PermKey& key);
Tensor unshuffle_filters(const Tensor& u, const PermKey& key);

PermKey inverse(const PermKey& key);

// |K| for the given shape/grains/mode, exact:
// (N/g_r)! * (L/g_c)! (* C! for three_order).
mpz_class keyspace_size(std::size_t n, std::size_t l,
                        std::uint32_t grain_row, std::uint32_t grain_col,
                        ShuffleMode mode, std::size_t channels = 1);

// log2 |K| via lgamma; safe far beyond N = 64.
double log2_keyspace(std::size_t n, std::size_t l,
                     std::uint32_t grain_row, std::uint32_t grain_col,
                     ShuffleMode mode, std::size_t channels = 1);

// Key rate in bits per transmitted unit: log2|K| / N for text/image,
// log2|K| / (N*L*C) for audio.
double key_rate(std::size_t n, std::size_t l,
                std::uint32_t grain_row, std::uint32_t grain_col,
                ShuffleMode mode, DataKind kind, std::size_t channels = 1);

} // namespace permsec
