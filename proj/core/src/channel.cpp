#include "permsec/channel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace permsec {

std::string to_string(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::awgn: return "awgn";
        case ChannelKind::rayleigh: return "rayleigh";
        case ChannelKind::bsc: return "bsc";
    }
    return "?";
}

ChannelKind channel_kind_from_string(std::string_view s) {
    if (s == "awgn") return ChannelKind::awgn;
    if (s == "rayleigh") return ChannelKind::rayleigh;
    if (s == "bsc") return ChannelKind::bsc;
    throw std::invalid_argument("unknown channel kind: " + std::string(s));
}

ChannelModel ChannelModel::awgn(double snr_db, std::uint64_t seed) {
    ChannelModel m;
    m.kind = ChannelKind::awgn;
    m.snr_db = snr_db;
    m.rng_seed = seed;
    m.validate();
    return m;
}

ChannelModel ChannelModel::rayleigh(double snr_db, std::uint64_t seed) {
    ChannelModel m;
    m.kind = ChannelKind::rayleigh;
    m.snr_db = snr_db;
    m.rng_seed = seed;
    m.validate();
    return m;
}

ChannelModel ChannelModel::bsc(double flip_prob, std::uint64_t seed) {
    ChannelModel m;
    m.kind = ChannelKind::bsc;
    m.flip_prob = flip_prob;
    m.rng_seed = seed;
    m.validate();
    return m;
}

void ChannelModel::validate() const {
    if (kind == ChannelKind::bsc) {
        if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
            throw std::invalid_argument("ChannelModel: flip probability outside [0,1]");
    } else {
        if (std::isnan(snr_db))
            throw std::invalid_argument("ChannelModel: snr_db is NaN");
    }
}

std::string ChannelModel::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (kind == ChannelKind::bsc)
        os << " p=" << flip_prob;
    else
        os << " snr=" << snr_db << "dB";
    return os.str();
}

double noise_variance(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}

double snr_db_for_variance(double variance) {
    if (variance <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(variance);
}

Tensor normalize_power(const Tensor& x) {
    if (x.empty()) throw std::invalid_argument("normalize_power: empty tensor");
    const double msq = mean_square(x);
    if (msq == 0.0) return x;
    const double scale = 1.0 / std::sqrt(msq);
    Tensor out = x;
    for (double& v : out.data()) v *= scale;
    return out;
}

Tensor transmit_awgn(const Tensor& x, double snr_db, Rng& rng) {
    const double variance = noise_variance(snr_db);
    if (variance == 0.0) return x;
    const double sigma = std::sqrt(variance);
    Tensor out = x;
    for (double& v : out.data()) v += sigma * rng.gaussian();
    return out;
}

Tensor transmit_rayleigh(const Tensor& x, double snr_db, Rng& rng) {
    // |h| with h circularly symmetric of unit power: Rayleigh(sigma=1/sqrt 2).
    double h = 0.0;
    do {
        const double re = rng.gaussian() / std::sqrt(2.0);
        const double im = rng.gaussian() / std::sqrt(2.0);
        h = std::hypot(re, im);
    } while (h < 1e-12);
    const double variance = noise_variance(snr_db);
    if (variance == 0.0) return x;
    const double sigma = std::sqrt(variance);
    Tensor out = x;
    for (double& v : out.data()) v += sigma * rng.gaussian() / h;
    return out;
}

std::vector<std::uint8_t> transmit_bsc(const std::vector<std::uint8_t>& bits,
                                       double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("transmit_bsc: p outside [0,1]");
    std::vector<std::uint8_t> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const bool flip = rng.uniform01() < p;
        out[i] = flip ? static_cast<std::uint8_t>(1 - (bits[i] & 1)) : (bits[i] & 1);
    }
    return out;
}

double bsc_capacity(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("bsc_capacity: p outside [0,1]");
    if (p == 0.0 || p == 1.0) return 1.0;
    const double h2 = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
    return 1.0 - h2;
}

Tensor transmit(const Tensor& x, const ChannelModel& model, Rng& rng) {
    switch (model.kind) {
        case ChannelKind::awgn: return transmit_awgn(x, model.snr_db, rng);
        case ChannelKind::rayleigh: return transmit_rayleigh(x, model.snr_db, rng);
        case ChannelKind::bsc:
            throw std::invalid_argument("transmit: bsc expects a bit sequence");
    }
    throw std::logic_error("transmit: bad channel kind");
}

} // namespace permsec
