#include "permsec/shuffle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace permsec {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_divides(std::uint32_t grain, std::size_t dim, const char* what) {
    if (grain == 0 || dim % grain != 0) {
        throw std::invalid_argument(std::string("grain does not divide ") + what +
                                    " dimension");
    }
}

std::vector<std::uint32_t> random_perm(std::size_t k, Rng& rng) {
    std::vector<std::uint32_t> p(k);
    std::iota(p.begin(), p.end(), 0u);
    for (std::size_t i = k; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

std::vector<std::uint32_t> inverse_perm(const std::vector<std::uint32_t>& p) {
    std::vector<std::uint32_t> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[p[i]] = static_cast<std::uint32_t>(i);
    return q;
}

void check_perm(const std::vector<std::uint32_t>& p, const char* what) {
    if (!is_permutation(p))
        throw std::invalid_argument(std::string(what) + " is not a permutation");
}

// Gather rows by blocks: out block b = in block perm[b].
Tensor gather_rows(const Tensor& u, const std::vector<std::uint32_t>& perm,
                   std::uint32_t grain) {
    check_divides(grain, u.rows(), "row");
    if (perm.size() * grain != u.rows())
        throw std::invalid_argument("row permutation length does not match tensor");
    Tensor out = u;
    const std::size_t cols = u.cols();
    const std::size_t plane = u.rows() * cols;
    for (std::size_t ch = 0; ch < u.channels(); ++ch) {
        const double* src = u.data().data() + ch * plane;
        double* dst = out.data().data() + ch * plane;
        for (std::size_t b = 0; b < perm.size(); ++b) {
            const std::size_t src_row = static_cast<std::size_t>(perm[b]) * grain;
            const std::size_t dst_row = b * grain;
            std::copy_n(src + src_row * cols, grain * cols, dst + dst_row * cols);
        }
    }
    return out;
}

Tensor gather_cols(const Tensor& u, const std::vector<std::uint32_t>& perm,
                   std::uint32_t grain) {
    check_divides(grain, u.cols(), "column");
    if (perm.size() * grain != u.cols())
        throw std::invalid_argument("column permutation length does not match tensor");
    Tensor out = u;
    const std::size_t cols = u.cols();
    const std::size_t total_rows = u.channels() * u.rows();
    for (std::size_t r = 0; r < total_rows; ++r) {
        const double* src = u.data().data() + r * cols;
        double* dst = out.data().data() + r * cols;
        for (std::size_t b = 0; b < perm.size(); ++b)
            std::copy_n(src + static_cast<std::size_t>(perm[b]) * grain, grain,
                        dst + b * grain);
    }
    return out;
}

Tensor gather_filters(const Tensor& u, const std::vector<std::uint32_t>& perm) {
    if (!u.rank3())
        throw std::invalid_argument("filter shuffling needs a (C,N,L) tensor");
    if (perm.size() != u.channels())
        throw std::invalid_argument("filter permutation length does not match tensor");
    Tensor out = u;
    for (std::size_t c = 0; c < perm.size(); ++c) {
        auto src = u.channel(perm[c]);
        std::copy(src.begin(), src.end(), out.channel(c).begin());
    }
    return out;
}

double log2_factorial(double k) { return std::lgamma(k + 1.0) / kLn2; }

} // namespace

std::string to_string(ShuffleMode mode) {
    switch (mode) {
        case ShuffleMode::none: return "none";
        case ShuffleMode::row: return "row";
        case ShuffleMode::column: return "col";
        case ShuffleMode::row_column: return "row+col";
        case ShuffleMode::three_order: return "3-order";
    }
    return "?";
}

ShuffleMode shuffle_mode_from_string(std::string_view s) {
    if (s == "none") return ShuffleMode::none;
    if (s == "row") return ShuffleMode::row;
    if (s == "col" || s == "column") return ShuffleMode::column;
    if (s == "row+col" || s == "row_column" || s == "rowcol") return ShuffleMode::row_column;
    if (s == "3-order" || s == "three_order" || s == "filter") return ShuffleMode::three_order;
    throw std::invalid_argument("unknown shuffle mode: " + std::string(s));
}

bool is_permutation(const std::vector<std::uint32_t>& perm) {
    std::vector<std::uint32_t> sorted(perm);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i) return false;
    return true;
}

bool PermKey::is_identity() const {
    auto ident = [](const std::vector<std::uint32_t>& p) {
        for (std::size_t i = 0; i < p.size(); ++i)
            if (p[i] != i) return false;
        return true;
    };
    return ident(row_perm) && ident(col_perm) && (!filter_perm || ident(*filter_perm));
}

std::string PermKey::serialize() const {
    std::ostringstream os;
    os << grain_row << ',' << grain_col << ";row:";
    for (std::size_t i = 0; i < row_perm.size(); ++i)
        os << (i ? "," : "") << row_perm[i];
    os << ";col:";
    for (std::size_t i = 0; i < col_perm.size(); ++i)
        os << (i ? "," : "") << col_perm[i];
    if (filter_perm) {
        os << ";filter:";
        for (std::size_t i = 0; i < filter_perm->size(); ++i)
            os << (i ? "," : "") << (*filter_perm)[i];
    }
    return os.str();
}

namespace {

std::vector<std::uint32_t> parse_csv_u32(std::string_view s) {
    std::vector<std::uint32_t> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string_view::npos) comma = s.size();
        std::uint32_t v = 0;
        const auto rc = std::from_chars(s.data() + pos, s.data() + comma, v);
        if (rc.ec != std::errc{} || rc.ptr != s.data() + comma)
            throw std::invalid_argument("PermKey::parse: bad integer list");
        out.push_back(v);
        if (comma == s.size()) break;
        pos = comma + 1;
    }
    return out;
}

} // namespace

PermKey PermKey::parse(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t semi = text.find(';', pos);
        if (semi == std::string_view::npos) semi = text.size();
        parts.push_back(text.substr(pos, semi - pos));
        if (semi == text.size()) break;
        pos = semi + 1;
    }
    if (parts.size() < 3)
        throw std::invalid_argument("PermKey::parse: expected g_r,g_c;row:..;col:..");
    const auto grains = parse_csv_u32(parts[0]);
    if (grains.size() != 2)
        throw std::invalid_argument("PermKey::parse: expected two grains");
    auto expect = [](std::string_view part, std::string_view tag) {
        if (part.substr(0, tag.size()) != tag)
            throw std::invalid_argument("PermKey::parse: missing section " +
                                        std::string(tag));
        return part.substr(tag.size());
    };
    PermKey key;
    key.grain_row = grains[0];
    key.grain_col = grains[1];
    key.row_perm = parse_csv_u32(expect(parts[1], "row:"));
    key.col_perm = parse_csv_u32(expect(parts[2], "col:"));
    if (parts.size() > 3) key.filter_perm = parse_csv_u32(expect(parts[3], "filter:"));
    if (parts.size() > 4)
        throw std::invalid_argument("PermKey::parse: trailing sections");
    check_perm(key.row_perm, "row_perm");
    check_perm(key.col_perm, "col_perm");
    if (key.filter_perm) check_perm(*key.filter_perm, "filter_perm");
    if (key.grain_row == 0 || key.grain_col == 0)
        throw std::invalid_argument("PermKey::parse: zero grain");
    return key;
}

PermKey sample_key(std::size_t n, std::size_t l, std::uint32_t grain_row,
                   std::uint32_t grain_col, std::uint64_t rng_seed) {
    check_divides(grain_row, n, "row");
    check_divides(grain_col, l, "column");
    Rng rng(rng_seed);
    PermKey key;
    key.grain_row = grain_row;
    key.grain_col = grain_col;
    key.row_perm = random_perm(n / grain_row, rng);
    key.col_perm = random_perm(l / grain_col, rng);
    return key;
}

PermKey sample_key(std::size_t c, std::size_t n, std::size_t l,
                   std::uint32_t grain_row, std::uint32_t grain_col,
                   std::uint64_t rng_seed) {
    PermKey key = sample_key(n, l, grain_row, grain_col, rng_seed);
    Rng rng(Rng::derive_seed(rng_seed, "filter"));
    key.filter_perm = random_perm(c, rng);
    return key;
}

PermKey identity_key(std::size_t n, std::size_t l, std::uint32_t grain_row,
                     std::uint32_t grain_col) {
    check_divides(grain_row, n, "row");
    check_divides(grain_col, l, "column");
    PermKey key;
    key.grain_row = grain_row;
    key.grain_col = grain_col;
    key.row_perm.resize(n / grain_row);
    key.col_perm.resize(l / grain_col);
    std::iota(key.row_perm.begin(), key.row_perm.end(), 0u);
    std::iota(key.col_perm.begin(), key.col_perm.end(), 0u);
    return key;
}

PermMatrix to_matrix(const std::vector<std::uint32_t>& perm, std::uint32_t block) {
    check_perm(perm, "perm");
    const std::size_t k = perm.size() * block;
    PermMatrix m;
    m.size = k;
    m.data.assign(k * k, 0.0);
    for (std::size_t b = 0; b < perm.size(); ++b)
        for (std::uint32_t t = 0; t < block; ++t)
            m.data[(b * block + t) * k + perm[b] * block + t] = 1.0;
    return m;
}

PermMatrix to_col_matrix(const std::vector<std::uint32_t>& perm, std::uint32_t block) {
    return to_matrix(perm, block).transposed();
}

PermMatrix PermMatrix::transposed() const {
    PermMatrix t;
    t.size = size;
    t.data.assign(size * size, 0.0);
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) t.data[j * size + i] = data[i * size + j];
    return t;
}

Tensor PermMatrix::apply_left(const Tensor& u) const {
    if (u.rank3() || u.rows() != size)
        throw std::invalid_argument("PermMatrix::apply_left: shape mismatch");
    Tensor out(u.rows(), u.cols());
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t k = 0; k < size; ++k) {
            const double p = data[i * size + k];
            if (p == 0.0) continue;
            for (std::size_t j = 0; j < u.cols(); ++j) out.at(i, j) += p * u.at(k, j);
        }
    return out;
}

Tensor PermMatrix::apply_right(const Tensor& u) const {
    if (u.rank3() || u.cols() != size)
        throw std::invalid_argument("PermMatrix::apply_right: shape mismatch");
    Tensor out(u.rows(), u.cols());
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t k = 0; k < size; ++k)
            for (std::size_t j = 0; j < size; ++j)
                out.at(i, j) += u.at(i, k) * data[k * size + j];
    return out;
}

Tensor shuffle_rows(const Tensor& u, const PermKey& key) {
    return gather_rows(u, key.row_perm, key.grain_row);
}

Tensor shuffle_cols(const Tensor& u, const PermKey& key) {
    return gather_cols(u, key.col_perm, key.grain_col);
}

Tensor shuffle_filters(const Tensor& u, const PermKey& key) {
    if (!key.filter_perm)
        throw std::invalid_argument("shuffle_filters: key has no filter permutation");
    return gather_filters(u, *key.filter_perm);
}

Tensor unshuffle_rows(const Tensor& u, const PermKey& key) {
    return gather_rows(u, inverse_perm(key.row_perm), key.grain_row);
}

Tensor unshuffle_cols(const Tensor& u, const PermKey& key) {
    return gather_cols(u, inverse_perm(key.col_perm), key.grain_col);
}

Tensor unshuffle_filters(const Tensor& u, const PermKey& key) {
    if (!key.filter_perm)
        throw std::invalid_argument("unshuffle_filters: key has no filter permutation");
    return gather_filters(u, inverse_perm(*key.filter_perm));
}

PermKey inverse(const PermKey& key) {
    PermKey inv = key;
    inv.row_perm = inverse_perm(key.row_perm);
    inv.col_perm = inverse_perm(key.col_perm);
    if (key.filter_perm) inv.filter_perm = inverse_perm(*key.filter_perm);
    return inv;
}

mpz_class keyspace_size(std::size_t n, std::size_t l, std::uint32_t grain_row,
                        std::uint32_t grain_col, ShuffleMode mode,
                        std::size_t channels) {
    check_divides(grain_row, n, "row");
    check_divides(grain_col, l, "column");
    mpz_class total = 1;
    mpz_class f;
    if (mode == ShuffleMode::row || mode == ShuffleMode::row_column ||
        mode == ShuffleMode::three_order) {
        mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(n / grain_row));
        total *= f;
    }
    if (mode == ShuffleMode::column || mode == ShuffleMode::row_column ||
        mode == ShuffleMode::three_order) {
        mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(l / grain_col));
        total *= f;
    }
    if (mode == ShuffleMode::three_order) {
        mpz_fac_ui(f.get_mpz_t(), static_cast<unsigned long>(channels));
        total *= f;
    }
    return total;
}

double log2_keyspace(std::size_t n, std::size_t l, std::uint32_t grain_row,
                     std::uint32_t grain_col, ShuffleMode mode, std::size_t channels) {
    check_divides(grain_row, n, "row");
    check_divides(grain_col, l, "column");
    double bits = 0.0;
    if (mode == ShuffleMode::row || mode == ShuffleMode::row_column ||
        mode == ShuffleMode::three_order)
        bits += log2_factorial(static_cast<double>(n / grain_row));
    if (mode == ShuffleMode::column || mode == ShuffleMode::row_column ||
        mode == ShuffleMode::three_order)
        bits += log2_factorial(static_cast<double>(l / grain_col));
    if (mode == ShuffleMode::three_order)
        bits += log2_factorial(static_cast<double>(channels));
    return bits;
}

double key_rate(std::size_t n, std::size_t l, std::uint32_t grain_row,
                std::uint32_t grain_col, ShuffleMode mode, DataKind kind,
                std::size_t channels) {
    const double bits = log2_keyspace(n, l, grain_row, grain_col, mode, channels);
    const double units = kind == DataKind::audio
                             ? static_cast<double>(n) * static_cast<double>(l) *
                                   static_cast<double>(channels)
                             : static_cast<double>(n);
    return bits / units;
}

} // namespace permsec
