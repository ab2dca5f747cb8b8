#include "permsec/keyexchange.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace permsec {

namespace {

// First 64 primes, used as fixed Miller-Rabin bases. The first 13 already
// decide primality for everything below 3.3e24.
constexpr unsigned kBases[] = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,
    43,  47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101,
    103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167,
    173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233, 239,
    241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

bool miller_rabin_round(const mpz_class& n, const mpz_class& d, unsigned long r,
                        unsigned base) {
    mpz_class a(base);
    a %= n;
    if (a == 0) return true; // base divides n; n == base was handled earlier
    mpz_class x;
    mpz_powm(x.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t(), n.get_mpz_t());
    if (x == 1 || x == n - 1) return true;
    for (unsigned long i = 1; i < r; ++i) {
        x = (x * x) % n;
        if (x == n - 1) return true;
    }
    return false;
}

} // namespace

bool is_probable_prime(const mpz_class& n) {
    if (n < 2) return false;
    for (unsigned base : kBases) {
        if (n == base) return true;
        if (mpz_divisible_ui_p(n.get_mpz_t(), base)) return false;
    }
    // n - 1 = d * 2^r with d odd
    mpz_class d = n - 1;
    unsigned long r = 0;
    while (mpz_even_p(d.get_mpz_t())) {
        d >>= 1;
        ++r;
    }
    for (unsigned base : kBases)
        if (!miller_rabin_round(n, d, r, base)) return false;
    return true;
}

void validate_params(const DhParams& params) {
    if (!is_probable_prime(params.p))
        throw std::invalid_argument("DhParams: modulus is not prime");
    if (params.g <= 1 || params.g >= params.p)
        throw std::invalid_argument("DhParams: generator out of range (1, p)");
}

mpz_class dh_public(const DhParams& params, const mpz_class& private_key) {
    if (private_key < 1 || private_key > params.p - 2)
        throw std::domain_error("dh_public: private key out of range [1, p-2]");
    mpz_class result;
    mpz_powm(result.get_mpz_t(), params.g.get_mpz_t(), private_key.get_mpz_t(),
             params.p.get_mpz_t());
    return result;
}

mpz_class dh_shared(const DhParams& params, const mpz_class& private_key,
                    const mpz_class& peer_public) {
    if (private_key < 1 || private_key > params.p - 2)
        throw std::domain_error("dh_shared: private key out of range [1, p-2]");
    if (peer_public < 1 || peer_public >= params.p)
        throw std::domain_error("dh_shared: peer public value out of range [1, p)");
    mpz_class result;
    mpz_powm(result.get_mpz_t(), peer_public.get_mpz_t(), private_key.get_mpz_t(),
             params.p.get_mpz_t());
    return result;
}

mpz_class random_prime(unsigned bits, Rng& rng) {
    if (bits < 2) throw std::invalid_argument("random_prime: need at least 2 bits");
    while (true) {
        mpz_class candidate = 0;
        for (unsigned filled = 0; filled < bits; filled += 64) {
            candidate <<= 64;
            candidate += mpz_class(rng.next_u64());
        }
        const unsigned excess = ((bits + 63) / 64) * 64 - bits;
        candidate >>= excess;
        mpz_setbit(candidate.get_mpz_t(), bits - 1); // force width
        mpz_setbit(candidate.get_mpz_t(), 0);        // force odd
        if (is_probable_prime(candidate)) return candidate;
    }
}

namespace {

std::vector<mpz_class> prime_factors(mpz_class n) {
    std::vector<mpz_class> factors;
    for (mpz_class f = 2; f * f <= n; ++f) {
        if (n % f == 0) {
            factors.push_back(f);
            while (n % f == 0) n /= f;
        }
    }
    if (n > 1) factors.push_back(n);
    return factors;
}

} // namespace

bool is_primitive_root(const mpz_class& g, const mpz_class& p) {
    if (g <= 1 || g >= p) return false;
    const mpz_class order = p - 1;
    for (const mpz_class& q : prime_factors(order)) {
        mpz_class e = order / q;
        mpz_class x;
        mpz_powm(x.get_mpz_t(), g.get_mpz_t(), e.get_mpz_t(), p.get_mpz_t());
        if (x == 1) return false;
    }
    return true;
}

mpz_class find_primitive_root(const mpz_class& p) {
    for (mpz_class g = 2; g < p; ++g)
        if (is_primitive_root(g, p)) return g;
    throw std::invalid_argument("find_primitive_root: no root found (p not prime?)");
}

void Codebook::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Codebook::save: cannot open " + path.string());
    for (const PermKey& key : entries) out << key.serialize() << '\n';
}

Codebook Codebook::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Codebook::load: cannot open " + path.string());
    Codebook book;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        book.entries.push_back(PermKey::parse(line));
    }
    if (!book.entries.empty()) {
        const PermKey& first = book.entries.front();
        for (const PermKey& key : book.entries) {
            const bool same = key.row_perm.size() == first.row_perm.size() &&
                              key.col_perm.size() == first.col_perm.size() &&
                              key.grain_row == first.grain_row &&
                              key.grain_col == first.grain_col &&
                              key.filter_perm.has_value() == first.filter_perm.has_value();
            if (!same)
                throw std::runtime_error(
                    "Codebook::load: entries disagree on shape/grain signature");
        }
    }
    return book;
}

const PermKey& lookup(const Codebook& book, const mpz_class& shared) {
    if (book.entries.empty())
        throw std::invalid_argument("lookup: empty codebook");
    mpz_class index = shared % mpz_class(static_cast<unsigned long>(book.size()));
    if (index < 0) index += static_cast<unsigned long>(book.size());
    return book.entries[index.get_ui()];
}

Codebook build_codebook(std::size_t n, std::size_t l, std::uint32_t grain_row,
                        std::uint32_t grain_col, std::size_t count,
                        std::uint64_t rng_seed) {
    if (count < 1) throw std::invalid_argument("build_codebook: count must be >= 1");
    const mpz_class space =
        keyspace_size(n, l, grain_row, grain_col, ShuffleMode::row_column);
    const bool distinct = space >= static_cast<unsigned long>(count);
    Codebook book;
    book.entries.reserve(count);
    std::set<std::string> seen;
    Rng rng(rng_seed);
    while (book.entries.size() < count) {
        PermKey key = sample_key(n, l, grain_row, grain_col, rng.next_u64());
        if (distinct && !seen.insert(key.serialize()).second) continue;
        book.entries.push_back(std::move(key));
    }
    return book;
}

} // namespace permsec
