#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "permsec/rng.hpp"
#include "permsec/tensor.hpp"

namespace permsec {

enum class ChannelKind { awgn, rayleigh, bsc };

std::string to_string(ChannelKind kind);
ChannelKind channel_kind_from_string(std::string_view s);

// Descriptor for the physical channel between Alice and a receiver. Only
// the parameters of the active kind are meaningful: snr_db for
// awgn/rayleigh, flip_prob for bsc.
struct ChannelModel {
    ChannelKind kind = ChannelKind::awgn;
    double snr_db = 10.0;
    double flip_prob = 0.0;
    std::uint64_t rng_seed = 0;

    static ChannelModel awgn(double snr_db, std::uint64_t seed = 0);
    static ChannelModel rayleigh(double snr_db, std::uint64_t seed = 0);
    static ChannelModel bsc(double flip_prob, std::uint64_t seed = 0);

    void validate() const;
    std::string describe() const;
};

// Noise variance for unit signal power: sigma^2 = 10^(-snr_db/10).
double noise_variance(double snr_db);

// SNR corresponding to a given noise variance at unit signal power.
double snr_db_for_variance(double variance);

// Scales to mean-square exactly 1; all-zero input is returned unchanged.
Tensor normalize_power(const Tensor& x);

// Y = X + n, n iid zero-mean Gaussian with variance 10^(-snr_db/10).
// snr_db = +infinity means a noiseless pass-through.
Tensor transmit_awgn(const Tensor& x, double snr_db, Rng& rng);

// Block fading with perfect CSI: one Rayleigh-magnitude fade h (unit
// second moment) per tensor, equalized at the receiver, so Y = X + n/h.
Tensor transmit_rayleigh(const Tensor& x, double snr_db, Rng& rng);

// Each bit flipped independently with probability p.
std::vector<std::uint8_t> transmit_bsc(const std::vector<std::uint8_t>& bits,
                                       double p, Rng& rng);

// 1 - H2(p), bits per channel use; H2(0) = H2(1) = 0 by convention.
double bsc_capacity(double p);

// Dispatch on model.kind; bsc is rejected for real-valued tensors.
Tensor transmit(const Tensor& x, const ChannelModel& model, Rng& rng);

} // namespace permsec
