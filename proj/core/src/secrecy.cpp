#include "permsec/secrecy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <gmpxx.h>

namespace permsec {

namespace {

constexpr std::size_t kMaxStates = std::size_t{1} << 20;

void check_spec(const PermChannelSpec& spec) {
    if (spec.alphabet_size < 2)
        throw std::invalid_argument("PermChannelSpec: alphabet size must be >= 2");
    if (spec.n < 1) throw std::invalid_argument("PermChannelSpec: n must be >= 1");
    if (spec.g == 0 || spec.n % spec.g != 0)
        throw std::invalid_argument("PermChannelSpec: grain must divide n");
    double states = 1.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
        states *= static_cast<double>(spec.alphabet_size);
        if (states > static_cast<double>(kMaxStates))
            throw StateSpaceOverflow("PermChannelSpec: |X|^n exceeds 2^20");
    }
    if (!spec.input_dist.empty() && spec.input_dist.size() != static_cast<std::size_t>(states))
        throw std::invalid_argument("PermChannelSpec: input distribution size mismatch");
}

std::size_t pow_sz(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) r *= base;
    return r;
}

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

} // namespace

double secrecy_capacity(double i_xy, double i_xz, double r_k) {
    return i_xy - std::max(i_xz - r_k, 0.0);
}

double total_loss(double recon_loss, double r_l, double c_s, double alpha,
                  double beta) {
    return recon_loss + alpha * r_l - beta * c_s;
}

double eve_rate_bound(std::size_t n, std::size_t g, std::size_t alphabet_size,
                      double p_e) {
    if (g == 0 || n % g != 0)
        throw std::invalid_argument("eve_rate_bound: grain must divide n");
    if (!(p_e >= 0.0 && p_e < 1.0))
        throw std::invalid_argument("eve_rate_bound: p_e must lie in [0, 1)");
    const double gd = static_cast<double>(g);
    const double inner = std::log2(static_cast<double>(alphabet_size)) +
                         (std::log2(std::numbers::e * gd) -
                          std::log2(static_cast<double>(n))) /
                             gd;
    return inner / (1.0 - p_e);
}

double eve_capacity_clamped(std::size_t n, std::size_t g, std::size_t alphabet_size,
                            double p_e) {
    return std::max(0.0, eve_rate_bound(n, g, alphabet_size, p_e));
}

double log_keyspace_stirling(double n, double g) {
    if (!(n / g >= 1.0))
        throw std::invalid_argument("log_keyspace_stirling: need n/g >= 1");
    const double k = n / g;
    return 0.5 * std::log2(2.0 * std::numbers::pi * k) +
           k * std::log2(k / std::numbers::e);
}

double log2_factorial_exact(double k) {
    return std::lgamma(k + 1.0) / std::numbers::ln2;
}

double exact_perm_channel_mi(const PermChannelSpec& spec) {
    check_spec(spec);
    const std::size_t m = pow_sz(spec.alphabet_size, spec.n);
    const std::size_t k = spec.n / spec.g;          // number of blocks
    const std::size_t block_space = pow_sz(spec.alphabet_size, spec.g);

    // Group input sequences into multiset classes of their block
    // decomposition. Within a class every arrangement is reachable from
    // every member, with conditional probability mult!/k! each, so
    //   H(X|U=u) = log2(#arrangements of u's class)
    //   P(x)     = Q_class / d_class   for x in the class,
    // where Q is the class's total input mass and d its arrangement count.
    std::vector<std::int32_t> class_of(m, -1);
    std::vector<double> class_mass;     // Q_c
    std::vector<double> class_log2_d;   // log2 d_c
    double h_x_given_u = 0.0;

    std::vector<std::uint32_t> blocks(k);
    std::vector<std::uint32_t> sorted(k);
    for (std::size_t u = 0; u < m; ++u) {
        const double pu = spec.input_dist.empty()
                              ? 1.0 / static_cast<double>(m)
                              : spec.input_dist[u];
        std::size_t rest = u;
        for (std::size_t b = 0; b < k; ++b) {
            blocks[b] = static_cast<std::uint32_t>(rest % block_space);
            rest /= block_space;
        }
        sorted = blocks;
        std::sort(sorted.begin(), sorted.end());
        // canonical id: re-encode the sorted blocks
        std::size_t canon = 0;
        for (std::size_t b = k; b-- > 0;) canon = canon * block_space + sorted[b];

        if (class_of[canon] < 0) {
            class_of[canon] = static_cast<std::int32_t>(class_mass.size());
            // d = k! / prod(mult!) computed in log2 via lgamma
            double log2_d = log2_factorial_exact(static_cast<double>(k));
            std::size_t run = 1;
            for (std::size_t b = 1; b <= k; ++b) {
                if (b < k && sorted[b] == sorted[b - 1]) {
                    ++run;
                } else {
                    log2_d -= log2_factorial_exact(static_cast<double>(run));
                    run = 1;
                }
            }
            class_mass.push_back(0.0);
            class_log2_d.push_back(log2_d);
        }
        const std::size_t c = static_cast<std::size_t>(class_of[canon]);
        class_mass[c] += pu;
        h_x_given_u += pu * class_log2_d[c];
    }

    // H(X) = -sum_c Q_c * log2(Q_c / d_c)
    double h_x = 0.0;
    for (std::size_t c = 0; c < class_mass.size(); ++c) {
        const double q = class_mass[c];
        if (q > 0.0) h_x -= q * (std::log2(q) - class_log2_d[c]);
    }
    return h_x - h_x_given_u;
}

double idealized_perm_channel_mi(const PermChannelSpec& spec) {
    check_spec(spec);
    const std::size_t m = pow_sz(spec.alphabet_size, spec.n);
    const std::size_t k = spec.n / spec.g;
    mpz_class a_exact;
    mpz_fac_ui(a_exact.get_mpz_t(), static_cast<unsigned long>(k));
    if (a_exact > static_cast<unsigned long>(m))
        throw ModelInfeasible(
            "idealized row model infeasible: (n/g)! exceeds |X|^n, no row can "
            "hold that many distinct equiprobable outputs");
    const std::size_t a = static_cast<std::size_t>(a_exact.get_ui());

    // Output marginal of the cyclic balanced support: P(x) =
    // (1/a) * sum_{j<a} p((x - j) mod m), computed with a sliding window.
    std::vector<double> p(m);
    if (spec.input_dist.empty())
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(m));
    else
        p = spec.input_dist;

    // window for x = 0: sum of p[(0 - j) mod m], j = 0..a-1
    double window = p[0];
    for (std::size_t j = 1; j < a; ++j) window += p[m - j];

    double h_x = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
        if (x > 0) {
            window += p[x];
            window -= p[(x + m - a) % m];
        }
        h_x -= xlog2x(window / static_cast<double>(a));
    }
    const double h_x_given_u = std::log2(static_cast<double>(a));
    return h_x - h_x_given_u;
}

double perm_channel_mi(const PermChannelSpec& spec) {
    return spec.model == PermChannelModel::exact_multiset
               ? exact_perm_channel_mi(spec)
               : idealized_perm_channel_mi(spec);
}

SecrecyReport make_secrecy_report(double i_xy, double i_xz, double r_k, double r_l) {
    SecrecyReport rep;
    rep.i_xy = i_xy;
    rep.i_xz = i_xz;
    rep.r_k = r_k;
    rep.c_s = secrecy_capacity(i_xy, i_xz, r_k);
    rep.r_l = r_l;
    return rep;
}

} // namespace permsec
