#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "permsec/channel.hpp"
#include "permsec/config.hpp"
#include "permsec/metrics.hpp"
#include "permsec/mine.hpp"
#include "permsec/neural.hpp"
#include "permsec/secrecy.hpp"
#include "permsec/shuffle.hpp"

namespace permsec {

enum class CodecFamily { token, patch };
enum class KeySchedule { fresh_per_message, fixed };
enum class EveTrainingMode { interleaved, post };

std::string to_string(CodecFamily f);
std::string to_string(KeySchedule s);
std::string to_string(EveTrainingMode m);

// Full experiment description. Every field has a default, and the whole
// struct round-trips through the key=value text format so a run can echo
// its effective configuration.
struct SystemConfig {
    CodecFamily family = CodecFamily::token;
    std::size_t message_rows = 16; // N: tokens per message / patch rows
    std::size_t vocab = 26;        // token family alphabet
    std::size_t patch_cols = 8;    // patch family: message is N x patch_cols
    std::size_t embed_dim = 32;    // L: semantic feature width
    std::size_t channel_dim = 16;  // V: transmitted feature width

    int gamma = 1; // row-shuffle position, 1..3
    ShuffleMode mode = ShuffleMode::row_column;
    std::uint32_t grain_row = 1;
    std::uint32_t grain_col = 1;

    ChannelModel channel = ChannelModel::awgn(10.0);

    double alpha = 0.01; // weight of the leakage rate R_L
    double beta = 0.01;  // weight of the secrecy capacity C_S
    double lr_codec = 1e-3;
    double lr_mine = 5e-5;
    std::size_t steps = 6000; // Alg-1 iterations (Bob/Eve branches alternate)
    std::size_t batch = 32;   // messages per iteration
    std::size_t mine_pair_rows = 256; // per-token critic batch cap

    KeySchedule schedule = KeySchedule::fresh_per_message;
    EveTrainingMode eve_mode = EveTrainingMode::interleaved;

    std::uint64_t seed = 42;
    std::size_t log_every = 50;
    std::size_t eval_messages = 1000;

    void validate() const;
    // R_K of Theorem 1 for the transmitted (N x V) feature and this mode.
    double analytic_key_rate() const;

    KvFile to_kv() const;
    static SystemConfig from_kv(const KvFile& kv);
};

// One message: token ids for the token family, a dense N x patch_cols
// tensor for the patch family.
struct Message {
    TokenSeq tokens;
    Tensor dense;
};

// Alice/Bob/Eve networks plus the three MINE critics. Single-owner
// mutable state while training; copy before concurrent inference.
struct SecureSystem {
    SystemConfig cfg;

    // Alice
    Embedding embedding;    // token family
    MlpNetwork patch_embed; // patch family
    MlpNetwork semantic_encoder;
    MlpNetwork channel_encoder;
    // Bob
    MlpNetwork channel_decoder;
    MlpNetwork semantic_decoder;
    // Eve (same architecture, no key)
    MlpNetwork eve_channel_decoder;
    MlpNetwork eve_semantic_decoder;
    Embedding eve_codebook; // Eve's own prediction table (token family)

    MineCritic critic_xy; // per-token I(X;Y)
    MineCritic critic_xz; // per-token I(X;Z)
    MineCritic critic_mz; // whole-message I(M;Z) for R_L

    std::optional<PermKey> fixed_key; // present when schedule == fixed

    static SecureSystem make(const SystemConfig& cfg);
    PermKey key_for_message(Rng& key_stream) const;

    void save(const std::filesystem::path& dir) const;
    static SecureSystem load(const std::filesystem::path& dir,
                             const SystemConfig& cfg);
};

// Encoder of Eq. 1: embedding -> [row shuffle if gamma=1] -> semantic
// encoder -> [gamma=2] -> channel encoder -> [gamma=3] -> column shuffle
// -> power normalization. Output mean square is exactly 1.
Tensor alice_encode(SecureSystem& sys, const Message& m, const PermKey& key,
                    int gamma);

// Bob's decoder: inverse column shuffle -> channel decoder -> inverse row
// shuffle mirrored at gamma -> semantic decoder -> de-embedding.
Message bob_decode(SecureSystem& sys, const Tensor& y, const PermKey& key,
                   int gamma);

// Eve decodes the raw tap with no key.
Message eve_decode(SecureSystem& sys, const Tensor& z);

// Feature-space output of Bob's semantic decoder (before de-embedding).
Tensor bob_decode_feature(SecureSystem& sys, const Tensor& y, const PermKey& key,
                          int gamma);

struct TraceRow {
    std::size_t step = 0;
    double l_r = 0.0;    // reconstruction loss
    double r_l = 0.0;    // bits per symbol
    double i_xy = 0.0;   // bits
    double i_xz = 0.0;   // bits
    double c_s = 0.0;    // bits
    double total = 0.0;  // l_r + alpha*r_l - beta*c_s
};

struct TrainResult {
    SecureSystem system;
    std::vector<TraceRow> trace;         // logged on Bob iterations
    std::vector<double> eve_loss_trace;  // Eve's reconstruction loss
};

// Alg. 1: per iteration sample a batch and fresh keys, encode, transmit,
// update the MINE critics, then update either Alice+Bob (Eq. 9) or Eve
// (Eq. 10) depending on the iteration parity (interleaved mode) or the
// phase (post mode). Deterministic for a fixed cfg.seed. Throws
// DivergenceError if the loss goes non-finite.
TrainResult train_system(const SystemConfig& cfg);

// Trains only the Eve decoder of `sys` on freshly intercepted (M, Z)
// pairs produced by the frozen Alice; returns the loss trace.
std::vector<double> train_eve(SecureSystem& sys, std::size_t steps,
                              std::string_view stream_label = "eve-attack");

struct RunRecord {
    double snr_db = 0.0;
    ChannelKind channel = ChannelKind::awgn;
    ShuffleMode mode = ShuffleMode::row_column;
    double bob_mse = 0.0, bob_acc = 0.0, bob_bleu1 = 0.0;
    double eve_mse = 0.0, eve_acc = 0.0, eve_bleu1 = 0.0;
    double i_xy = 0.0, i_xz = 0.0, r_l = 0.0, c_s = 0.0, r_k = 0.0;
    std::uint64_t seed = 0;
};

// One record per SNR, metrics averaged over cfg.eval_messages test
// messages. Points are independent and run on worker threads, each with
// its own stream derived from (seed, point index).
std::vector<RunRecord> run_sweep(const SecureSystem& sys,
                                 const std::vector<double>& snr_list);

std::string records_csv_header();
void append_records_csv(const std::filesystem::path& path,
                        const std::vector<RunRecord>& records);
void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<TraceRow>& trace);

// Shortest-round-trip decimal for CSV output (byte-stable per value).
std::string format_double(double v);

} // namespace permsec
