#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace permsec {

// C_S(R_K) = i_xy - [i_xz - r_k]^+, all in bits.
double secrecy_capacity(double i_xy, double i_xz, double r_k);

// Training objective: recon_loss + alpha*r_l - beta*c_s.
double total_loss(double recon_loss, double r_l, double c_s, double alpha = 0.01,
                  double beta = 0.01);

// Upper bound on Eve's rate over the cascade of a grain-g block
// permutation and a DMC:
//   (1/(1-p_e)) * log2(|X| * (e*g)^(1/g) / n^(1/g)).
// May be negative; the capacity reading clamps at zero.
double eve_rate_bound(std::size_t n, std::size_t g, std::size_t alphabet_size,
                      double p_e);
double eve_capacity_clamped(std::size_t n, std::size_t g, std::size_t alphabet_size,
                            double p_e);

// Stirling approximation of log2((n/g)!):
//   log2( sqrt(2*pi*n/g) * (n/(e*g))^(n/g) ).
double log_keyspace_stirling(double n, double g);

// Exact log2((n/g)!) via lgamma, the comparison reference for the above.
double log2_factorial_exact(double k);

enum class PermChannelModel { exact_multiset, idealized_rowmodel };

// Block-permutation channel U^n -> X^n: the n-symbol input is split into
// n/g blocks of g symbols and the blocks are reordered by a uniformly
// random permutation.
struct PermChannelSpec {
    std::size_t alphabet_size = 2;
    std::size_t n = 2;
    std::size_t g = 1;
    PermChannelModel model = PermChannelModel::exact_multiset;
    // Probability per input sequence, indexed by the base-|X| encoding of
    // the sequence; empty means uniform.
    std::vector<double> input_dist;
};

class StateSpaceOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The idealized row model has no channel realization when (n/g)! exceeds
// |X|^n: no row can hold (n/g)! distinct equiprobable outputs.
class ModelInfeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exact I(U^n; X^n) in bits where X^n is a uniformly random block
// permutation of U^n. Conditionals follow the multiset structure: an
// input with repeated blocks has fewer than (n/g)! distinct arrangements,
// each correspondingly more likely. Requires |X|^n <= 2^20.
double exact_perm_channel_mi(const PermChannelSpec& spec);

// I(U^n; X^n) in bits under the idealized transition matrix in which
// every row has exactly a = (n/g)! entries equal to 1/a inside an output
// space of size |X|^n, with the row supports balanced so that every
// output is reachable from exactly a inputs (uniform input => uniform
// output). Realized as the cyclic support {u, u+1, ..., u+a-1 mod |X|^n}
// on sequence indices. Equals n*log2|X| - log2((n/g)!) exactly under a
// uniform input and never exceeds it otherwise. Throws ModelInfeasible
// when (n/g)! > |X|^n.
double idealized_perm_channel_mi(const PermChannelSpec& spec);

// Dispatch on spec.model.
double perm_channel_mi(const PermChannelSpec& spec);

// One experiment point's information summary.
struct SecrecyReport {
    double i_xy = 0.0; // bits
    double i_xz = 0.0; // bits
    double r_k = 0.0;  // bits
    double c_s = 0.0;  // bits
    double r_l = 0.0;  // bits per symbol
};

SecrecyReport make_secrecy_report(double i_xy, double i_xz, double r_k, double r_l);

} // namespace permsec
