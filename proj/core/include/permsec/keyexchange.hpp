#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "permsec/rng.hpp"
#include "permsec/shuffle.hpp"

namespace permsec {

// Diffie-Hellman over plain modular integers, exactly the textbook
// exchange that agrees on a shared codebook index. This is a simulation
// artifact for experiments, not production cryptography: no
// authentication, no MITM resistance, no constant-time arithmetic.
struct DhParams {
    mpz_class p; // prime modulus
    mpz_class g; // generator, 1 < g < p (a primitive root in the protocol)
};

// Miller-Rabin with the first 64 primes as fixed bases; deterministic for
// n below 3.3e24 and error < 2^-64 beyond.
bool is_probable_prime(const mpz_class& n);

// Throws std::invalid_argument unless p is (probably) prime and 1 < g < p.
void validate_params(const DhParams& params);

// G^private mod P. Requires 1 <= private <= P-2.
mpz_class dh_public(const DhParams& params, const mpz_class& private_key);

// peer_public^private mod P; symmetric between the two parties.
mpz_class dh_shared(const DhParams& params, const mpz_class& private_key,
                    const mpz_class& peer_public);

// Uniform prime with exactly `bits` bits.
mpz_class random_prime(unsigned bits, Rng& rng);

// Exhaustive primitive-root check; intended for small p (factors p-1 by
// trial division).
bool is_primitive_root(const mpz_class& g, const mpz_class& p);
mpz_class find_primitive_root(const mpz_class& p);

// Ordered index -> key table shared by Alice and Bob. Entry i sits on
// line i of the codebook file, one serialized PermKey per line.
struct Codebook {
    std::vector<PermKey> entries;

    std::size_t size() const { return entries.size(); }
    void save(const std::filesystem::path& path) const;
    static Codebook load(const std::filesystem::path& path);
};

// Entry at index (shared mod |book|). Throws on an empty codebook.
const PermKey& lookup(const Codebook& book, const mpz_class& shared);

// `count` keys for an (N,L) feature with the given grains; sampled
// without replacement whenever the keyspace permits, deterministic per
// seed.
Codebook build_codebook(std::size_t n, std::size_t l, std::uint32_t grain_row,
                        std::uint32_t grain_col, std::size_t count,
                        std::uint64_t rng_seed);

} // namespace permsec
