#include "permsec/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

namespace permsec {

namespace {

constexpr double kLn2 = 0.6931471805599453;

Tensor slice_rows(const Tensor& t, std::size_t r0, std::size_t count) {
    Tensor out(count, t.cols());
    std::copy_n(t.data().data() + r0 * t.cols(), count * t.cols(), out.data().data());
    return out;
}

void set_rows(Tensor& dst, std::size_t r0, const Tensor& src) {
    std::copy_n(src.data().data(), src.size(), dst.data().data() + r0 * dst.cols());
}

// Per-message row/column shuffling on a stacked (B*N x C) tensor.
enum class Axis { rows, cols };

Tensor stack_shuffle(const Tensor& stacked, const std::vector<PermKey>& keys,
                     std::size_t rows_per_msg, Axis axis, bool forward_direction) {
    Tensor out = stacked;
    for (std::size_t b = 0; b < keys.size(); ++b) {
        Tensor block = slice_rows(stacked, b * rows_per_msg, rows_per_msg);
        Tensor shuffled;
        if (axis == Axis::rows)
            shuffled = forward_direction ? shuffle_rows(block, keys[b])
                                         : unshuffle_rows(block, keys[b]);
        else
            shuffled = forward_direction ? shuffle_cols(block, keys[b])
                                         : unshuffle_cols(block, keys[b]);
        set_rows(out, b * rows_per_msg, shuffled);
    }
    return out;
}

struct NormalizeCache {
    std::vector<double> scale; // s_b = sqrt(mean square); 0 flags a zero block
};

Tensor stack_normalize(const Tensor& stacked, std::size_t rows_per_msg,
                       NormalizeCache& cache) {
    const std::size_t b_count = stacked.rows() / rows_per_msg;
    Tensor out = stacked;
    cache.scale.assign(b_count, 0.0);
    for (std::size_t b = 0; b < b_count; ++b) {
        Tensor block = slice_rows(stacked, b * rows_per_msg, rows_per_msg);
        const double msq = mean_square(block);
        if (msq == 0.0) continue; // all-zero message passes through
        const double s = std::sqrt(msq);
        cache.scale[b] = s;
        for (double& v : block.data()) v /= s;
        set_rows(out, b * rows_per_msg, block);
    }
    return out;
}

// Adjoint of stack_normalize. With y = x/s and s = sqrt(mean(x^2)):
// dL/dx = (g - y * mean(g .* y)) / s, evaluated per message block.
Tensor stack_normalize_backward(const Tensor& grad, const Tensor& normalized,
                                std::size_t rows_per_msg,
                                const NormalizeCache& cache) {
    Tensor out = grad;
    const std::size_t block_size = rows_per_msg * grad.cols();
    for (std::size_t b = 0; b < cache.scale.size(); ++b) {
        const double s = cache.scale[b];
        if (s == 0.0) continue; // pass-through block
        const double* g = grad.data().data() + b * block_size;
        const double* y = normalized.data().data() + b * block_size;
        double dot = 0.0;
        for (std::size_t i = 0; i < block_size; ++i) dot += g[i] * y[i];
        dot /= static_cast<double>(block_size);
        double* o = out.data().data() + b * block_size;
        for (std::size_t i = 0; i < block_size; ++i) o[i] = (g[i] - y[i] * dot) / s;
    }
    return out;
}

Tensor transmit_stacked(const Tensor& x, const ChannelModel& model,
                        std::size_t rows_per_msg, Rng& rng) {
    Tensor out = x;
    for (std::size_t r0 = 0; r0 < x.rows(); r0 += rows_per_msg) {
        const Tensor block = slice_rows(x, r0, rows_per_msg);
        set_rows(out, r0, transmit(block, model, rng));
    }
    return out;
}

bool mode_has_rows(ShuffleMode m) {
    return m == ShuffleMode::row || m == ShuffleMode::row_column;
}
bool mode_has_cols(ShuffleMode m) {
    return m == ShuffleMode::column || m == ShuffleMode::row_column;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

} // namespace

std::string to_string(CodecFamily f) {
    return f == CodecFamily::token ? "token" : "patch";
}
std::string to_string(KeySchedule s) {
    return s == KeySchedule::fresh_per_message ? "fresh" : "fixed";
}
std::string to_string(EveTrainingMode m) {
    return m == EveTrainingMode::interleaved ? "interleaved" : "post";
}

namespace {

CodecFamily family_from_string(const std::string& s) {
    if (s == "token") return CodecFamily::token;
    if (s == "patch") return CodecFamily::patch;
    throw ConfigError("unknown codec family: " + s);
}
KeySchedule schedule_from_string(const std::string& s) {
    if (s == "fresh") return KeySchedule::fresh_per_message;
    if (s == "fixed") return KeySchedule::fixed;
    throw ConfigError("unknown key schedule: " + s);
}
EveTrainingMode eve_mode_from_string(const std::string& s) {
    if (s == "interleaved") return EveTrainingMode::interleaved;
    if (s == "post") return EveTrainingMode::post;
    throw ConfigError("unknown eve training mode: " + s);
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value: " + s);
    }
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto rc = std::from_chars(s.data(), s.data() + s.size(), v);
    if (rc.ec != std::errc{} || rc.ptr != s.data() + s.size())
        throw ConfigError("bad integer value: " + s);
    return v;
}

} // namespace

void SystemConfig::validate() const {
    if (message_rows < 1 || embed_dim < 1 || channel_dim < 1)
        throw ConfigError("config: dimensions must be positive");
    if (family == CodecFamily::token && vocab < 2)
        throw ConfigError("config: token vocabulary must have at least 2 symbols");
    if (family == CodecFamily::patch && patch_cols < 1)
        throw ConfigError("config: patch_cols must be positive");
    if (gamma < 1 || gamma > 3)
        throw ConfigError("config: gamma must be 1, 2 or 3");
    if (mode == ShuffleMode::three_order)
        throw ConfigError(
            "config: filter (3-order) shuffling needs a rank-3 feature; the "
            "token/patch codecs transmit rank-2 features");
    if (grain_row == 0 || message_rows % grain_row != 0)
        throw ConfigError("config: grain_row must divide message_rows");
    if (grain_col == 0 || channel_dim % grain_col != 0)
        throw ConfigError("config: grain_col must divide channel_dim");
    if (channel.kind == ChannelKind::bsc)
        throw ConfigError("config: the codec pipeline transmits real features; "
                          "bsc applies to bit sequences only");
    channel.validate();
    if (!(alpha >= 0.0) || !(beta >= 0.0))
        throw ConfigError("config: alpha and beta must be non-negative");
    if (steps < 1 || batch < 1 || log_every < 1 || eval_messages < 1)
        throw ConfigError("config: steps, batch, log_every, eval_messages must be positive");
    if (mine_pair_rows < 2)
        throw ConfigError("config: mine_pair_rows must be at least 2");
}

double SystemConfig::analytic_key_rate() const {
    return key_rate(message_rows, channel_dim, grain_row, grain_col, mode,
                    DataKind::text_image);
}

KvFile SystemConfig::to_kv() const {
    KvFile kv;
    kv.set("family", to_string(family));
    kv.set("message_rows", std::to_string(message_rows));
    kv.set("vocab", std::to_string(vocab));
    kv.set("patch_cols", std::to_string(patch_cols));
    kv.set("embed_dim", std::to_string(embed_dim));
    kv.set("channel_dim", std::to_string(channel_dim));
    kv.set("gamma", std::to_string(gamma));
    kv.set("mode", to_string(mode));
    kv.set("grain_row", std::to_string(grain_row));
    kv.set("grain_col", std::to_string(grain_col));
    kv.set("channel.kind", to_string(channel.kind));
    kv.set("channel.snr_db", format_double(channel.snr_db));
    kv.set("channel.flip_prob", format_double(channel.flip_prob));
    kv.set("alpha", format_double(alpha));
    kv.set("beta", format_double(beta));
    kv.set("lr_codec", format_double(lr_codec));
    kv.set("lr_mine", format_double(lr_mine));
    kv.set("steps", std::to_string(steps));
    kv.set("batch", std::to_string(batch));
    kv.set("mine_pair_rows", std::to_string(mine_pair_rows));
    kv.set("schedule", to_string(schedule));
    kv.set("eve_mode", to_string(eve_mode));
    kv.set("seed", std::to_string(seed));
    kv.set("log_every", std::to_string(log_every));
    kv.set("eval_messages", std::to_string(eval_messages));
    return kv;
}

SystemConfig SystemConfig::from_kv(const KvFile& kv) {
    SystemConfig cfg;
    for (const auto& [key, value] : kv.items()) {
        if (key == "family") cfg.family = family_from_string(value);
        else if (key == "message_rows") cfg.message_rows = parse_u64(value);
        else if (key == "vocab") cfg.vocab = parse_u64(value);
        else if (key == "patch_cols") cfg.patch_cols = parse_u64(value);
        else if (key == "embed_dim") cfg.embed_dim = parse_u64(value);
        else if (key == "channel_dim") cfg.channel_dim = parse_u64(value);
        else if (key == "gamma") cfg.gamma = static_cast<int>(parse_u64(value));
        else if (key == "mode") cfg.mode = shuffle_mode_from_string(value);
        else if (key == "grain_row") cfg.grain_row = static_cast<std::uint32_t>(parse_u64(value));
        else if (key == "grain_col") cfg.grain_col = static_cast<std::uint32_t>(parse_u64(value));
        else if (key == "channel.kind") cfg.channel.kind = channel_kind_from_string(value);
        else if (key == "channel.snr_db") cfg.channel.snr_db = parse_double(value);
        else if (key == "channel.flip_prob") cfg.channel.flip_prob = parse_double(value);
        else if (key == "alpha") cfg.alpha = parse_double(value);
        else if (key == "beta") cfg.beta = parse_double(value);
        else if (key == "lr_codec") cfg.lr_codec = parse_double(value);
        else if (key == "lr_mine") cfg.lr_mine = parse_double(value);
        else if (key == "steps") cfg.steps = parse_u64(value);
        else if (key == "batch") cfg.batch = parse_u64(value);
        else if (key == "mine_pair_rows") cfg.mine_pair_rows = parse_u64(value);
        else if (key == "schedule") cfg.schedule = schedule_from_string(value);
        else if (key == "eve_mode") cfg.eve_mode = eve_mode_from_string(value);
        else if (key == "seed") cfg.seed = parse_u64(value);
        else if (key == "log_every") cfg.log_every = parse_u64(value);
        else if (key == "eval_messages") cfg.eval_messages = parse_u64(value);
        else throw ConfigError("unknown config key: " + key);
    }
    cfg.validate();
    return cfg;
}

// --- system construction ---------------------------------------------------

SecureSystem SecureSystem::make(const SystemConfig& cfg) {
    cfg.validate();
    SecureSystem sys;
    sys.cfg = cfg;
    const std::size_t l = cfg.embed_dim;
    const std::size_t v = cfg.channel_dim;
    const Rng master(cfg.seed);
    auto init = [&](std::string_view name) { return master.substream(name); };

    using A = Activation;
    auto make_net = [&](std::string_view name, std::vector<std::size_t> dims) {
        Rng r = init(name);
        std::vector<Activation> acts(dims.size() - 1, A::relu);
        acts.back() = A::identity;
        return MlpNetwork::make(dims, acts, r);
    };

    if (cfg.family == CodecFamily::token) {
        Rng r1 = init("init/embedding");
        sys.embedding = Embedding(cfg.vocab, l, r1);
        Rng r2 = init("init/eve-codebook");
        sys.eve_codebook = Embedding(cfg.vocab, l, r2);
    } else {
        sys.patch_embed = make_net("init/patch-embed", {cfg.patch_cols, l});
    }
    sys.semantic_encoder = make_net("init/semantic-encoder", {l, l, l});
    sys.channel_encoder = make_net("init/channel-encoder", {l, l, v});
    sys.channel_decoder = make_net("init/channel-decoder", {v, l, l});
    sys.eve_channel_decoder = make_net("init/eve-channel-decoder", {v, l, l});
    const std::size_t dec_out = cfg.family == CodecFamily::token ? l : cfg.patch_cols;
    sys.semantic_decoder = make_net("init/semantic-decoder", {l, l, dec_out});
    sys.eve_semantic_decoder = make_net("init/eve-semantic-decoder", {l, l, dec_out});

    const std::size_t msg_dim = cfg.family == CodecFamily::token
                                    ? cfg.message_rows * cfg.vocab
                                    : cfg.message_rows * cfg.patch_cols;
    {
        Rng r = init("init/critic-xy");
        sys.critic_xy = MineCritic::make(v, v, {100}, r);
    }
    {
        Rng r = init("init/critic-xz");
        sys.critic_xz = MineCritic::make(v, v, {100}, r);
    }
    {
        Rng r = init("init/critic-mz");
        sys.critic_mz = MineCritic::make(msg_dim, cfg.message_rows * v, {100}, r);
    }

    if (cfg.schedule == KeySchedule::fixed) {
        Rng r = init("key-fixed");
        Rng tmp(r.next_u64());
        sys.fixed_key = sys.key_for_message(tmp);
    }
    return sys;
}

PermKey SecureSystem::key_for_message(Rng& key_stream) const {
    if (fixed_key) return *fixed_key;
    PermKey key = sample_key(cfg.message_rows, cfg.channel_dim, cfg.grain_row,
                             cfg.grain_col, key_stream.next_u64());
    if (!mode_has_rows(cfg.mode))
        std::iota(key.row_perm.begin(), key.row_perm.end(), 0u);
    if (!mode_has_cols(cfg.mode))
        std::iota(key.col_perm.begin(), key.col_perm.end(), 0u);
    return key;
}

// --- forward passes ---------------------------------------------------------

namespace {

struct AliceForward {
    Tensor u;        // stacked embedding output (pre shuffles)
    Tensor x;        // normalized transmitted feature
    NormalizeCache norm;
};

// Stacked batch encode; keys.size() messages of cfg.message_rows rows.
AliceForward alice_forward(SecureSystem& sys, const Tensor& u_stacked,
                           const std::vector<PermKey>& keys, int gamma) {
    const SystemConfig& cfg = sys.cfg;
    const std::size_t n = cfg.message_rows;
    AliceForward fwd;
    fwd.u = u_stacked;
    Tensor cur = u_stacked;
    if (gamma == 1) cur = stack_shuffle(cur, keys, n, Axis::rows, true);
    cur = sys.semantic_encoder.forward(cur);
    if (gamma == 2) cur = stack_shuffle(cur, keys, n, Axis::rows, true);
    cur = sys.channel_encoder.forward(cur);
    if (gamma == 3) cur = stack_shuffle(cur, keys, n, Axis::rows, true);
    cur = stack_shuffle(cur, keys, n, Axis::cols, true);
    fwd.x = stack_normalize(cur, n, fwd.norm);
    return fwd;
}

// Adjoint of alice_forward; consumes the caches left in the encoder nets.
// Returns dLoss/dU (stacked embedding output).
Tensor alice_backward(SecureSystem& sys, const AliceForward& fwd,
                      const std::vector<PermKey>& keys, int gamma,
                      const Tensor& grad_x) {
    const std::size_t n = sys.cfg.message_rows;
    Tensor g = stack_normalize_backward(grad_x, fwd.x, n, fwd.norm);
    g = stack_shuffle(g, keys, n, Axis::cols, false);
    if (gamma == 3) g = stack_shuffle(g, keys, n, Axis::rows, false);
    g = sys.channel_encoder.backward(g);
    if (gamma == 2) g = stack_shuffle(g, keys, n, Axis::rows, false);
    g = sys.semantic_encoder.backward(g);
    if (gamma == 1) g = stack_shuffle(g, keys, n, Axis::rows, false);
    return g;
}

// Bob's decode chain on a stacked tensor; output is the semantic-decoder
// output aligned with the original row order.
Tensor bob_forward(SecureSystem& sys, const Tensor& y,
                   const std::vector<PermKey>& keys, int gamma) {
    const std::size_t n = sys.cfg.message_rows;
    Tensor cur = stack_shuffle(y, keys, n, Axis::cols, false);
    if (gamma == 3) cur = stack_shuffle(cur, keys, n, Axis::rows, false);
    cur = sys.channel_decoder.forward(cur);
    if (gamma == 2) cur = stack_shuffle(cur, keys, n, Axis::rows, false);
    cur = sys.semantic_decoder.forward(cur);
    if (gamma == 1) cur = stack_shuffle(cur, keys, n, Axis::rows, false);
    return cur;
}

// Adjoint of bob_forward: returns dLoss/dY.
Tensor bob_backward(SecureSystem& sys, const std::vector<PermKey>& keys, int gamma,
                    const Tensor& grad_out) {
    const std::size_t n = sys.cfg.message_rows;
    Tensor g = grad_out;
    if (gamma == 1) g = stack_shuffle(g, keys, n, Axis::rows, true);
    g = sys.semantic_decoder.backward(g);
    if (gamma == 2) g = stack_shuffle(g, keys, n, Axis::rows, true);
    g = sys.channel_decoder.backward(g);
    if (gamma == 3) g = stack_shuffle(g, keys, n, Axis::rows, true);
    g = stack_shuffle(g, keys, n, Axis::cols, true);
    return g;
}

Tensor eve_forward(SecureSystem& sys, const Tensor& z) {
    return sys.eve_semantic_decoder.forward(sys.eve_channel_decoder.forward(z));
}

// Cross-entropy over distance logits: logit_w = -|d - E_w|^2, softmax over
// the vocabulary. Mean over rows. Fills the gradient w.r.t. the feature
// rows and accumulates the gradient w.r.t. the embedding table.
double ce_distance_loss(const Tensor& feature, const std::vector<int>& targets,
                        Embedding& table, Tensor* grad_feature) {
    const std::size_t rows = feature.rows();
    const std::size_t dim = table.dim();
    const std::size_t vocab = table.vocab();
    const double inv_rows = 1.0 / static_cast<double>(rows);
    double loss = 0.0;
    Tensor table_grad(vocab, dim);
    std::vector<double> logits(vocab);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* d = feature.row(r).data();
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t w = 0; w < vocab; ++w) {
            const double* e = table.table().data() + w * dim;
            double dist = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = d[c] - e[c];
                dist += diff * diff;
            }
            logits[w] = -dist;
            max_logit = std::max(max_logit, logits[w]);
        }
        double denom = 0.0;
        for (std::size_t w = 0; w < vocab; ++w) denom += std::exp(logits[w] - max_logit);
        const int target = targets[r];
        loss -= (logits[target] - max_logit - std::log(denom)) * inv_rows;
        if (!grad_feature) continue;
        double* gd = grad_feature->row(r).data();
        for (std::size_t w = 0; w < vocab; ++w) {
            const double p = std::exp(logits[w] - max_logit) / denom;
            const double gw = (p - (static_cast<int>(w) == target ? 1.0 : 0.0)) * inv_rows;
            const double* e = table.table().data() + w * dim;
            double* ge = table_grad.row(w).data();
            for (std::size_t c = 0; c < dim; ++c) {
                gd[c] += gw * 2.0 * (e[c] - d[c]);
                ge[c] += gw * 2.0 * (d[c] - e[c]);
            }
        }
    }
    if (grad_feature) table.accumulate_table_grad(table_grad);
    return loss;
}

int nearest_token(std::span<const double> feature, const Embedding& table) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    const std::size_t dim = table.dim();
    for (std::size_t w = 0; w < table.vocab(); ++w) {
        const double* e = table.table().data() + w * dim;
        double dist = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            const double diff = feature[c] - e[c];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(w);
        }
    }
    return best;
}

std::vector<int> decode_tokens(const Tensor& feature, const Embedding& table) {
    std::vector<int> out(feature.rows());
    for (std::size_t r = 0; r < feature.rows(); ++r)
        out[r] = nearest_token(feature.row(r), table);
    return out;
}

// Batch of messages sampled from the synthetic source.
struct BatchData {
    std::vector<std::vector<int>> tokens; // token family, per message
    Tensor dense;                         // stacked (B*N x cols)
    std::vector<int> flat_tokens;         // stacked targets
};

BatchData sample_batch(const SystemConfig& cfg, std::size_t count, Rng& rng) {
    BatchData data;
    const std::size_t n = cfg.message_rows;
    if (cfg.family == CodecFamily::token) {
        data.tokens.resize(count);
        data.flat_tokens.reserve(count * n);
        for (std::size_t b = 0; b < count; ++b) {
            data.tokens[b].resize(n);
            for (std::size_t t = 0; t < n; ++t) {
                const int tok = static_cast<int>(rng.below(cfg.vocab));
                data.tokens[b][t] = tok;
                data.flat_tokens.push_back(tok);
            }
        }
    } else {
        data.dense = Tensor(count * n, cfg.patch_cols);
        for (double& v : data.dense.data()) v = rng.uniform01();
    }
    return data;
}

Tensor embed_batch(SecureSystem& sys, const BatchData& data) {
    if (sys.cfg.family == CodecFamily::token)
        return sys.embedding.forward(data.flat_tokens);
    return sys.patch_embed.forward(data.dense);
}

Tensor onehot_flatten(const std::vector<std::vector<int>>& tokens, std::size_t vocab) {
    const std::size_t b_count = tokens.size();
    const std::size_t n = tokens.front().size();
    Tensor out(b_count, n * vocab);
    for (std::size_t b = 0; b < b_count; ++b)
        for (std::size_t t = 0; t < n; ++t)
            out.at(b, t * vocab + static_cast<std::size_t>(tokens[b][t])) = 1.0;
    return out;
}

Tensor flatten_messages(const Tensor& stacked, std::size_t rows_per_msg) {
    const std::size_t b_count = stacked.rows() / rows_per_msg;
    Tensor out(b_count, rows_per_msg * stacked.cols());
    std::copy(stacked.data().begin(), stacked.data().end(), out.data().begin());
    return out;
}

Tensor message_flat_of(const SystemConfig& cfg, const BatchData& data) {
    if (cfg.family == CodecFamily::token) return onehot_flatten(data.tokens, cfg.vocab);
    return flatten_messages(data.dense, cfg.message_rows);
}

// Sampled per-token pair set for the I(X;.) critics, with the index maps
// needed to route input gradients back onto the stacked X.
struct TokenPairs {
    std::vector<std::size_t> idx;  // stacked-row index per pair
    std::vector<std::size_t> perm; // within-batch marginal permutation
    PairBatch joint, marginal;
};

TokenPairs build_token_pairs(const Tensor& x, const Tensor& other, std::size_t cap,
                             Rng& rng) {
    TokenPairs pairs;
    const std::size_t total = x.rows();
    const std::size_t count = std::min(cap, total);
    std::vector<std::size_t> all = shuffled_indices(total, rng);
    pairs.idx.assign(all.begin(), all.begin() + count);
    pairs.perm = shuffled_indices(count, rng);
    pairs.joint.x = Tensor(count, x.cols());
    pairs.joint.y = Tensor(count, other.cols());
    pairs.marginal.x = pairs.joint.x;
    pairs.marginal.y = Tensor(count, other.cols());
    for (std::size_t i = 0; i < count; ++i) {
        set_rows(pairs.joint.x, i, slice_rows(x, pairs.idx[i], 1));
        set_rows(pairs.joint.y, i, slice_rows(other, pairs.idx[i], 1));
    }
    pairs.marginal.x = pairs.joint.x;
    for (std::size_t i = 0; i < count; ++i)
        set_rows(pairs.marginal.y, i, slice_rows(pairs.joint.y, pairs.perm[i], 1));
    return pairs;
}

struct MessagePairs {
    std::vector<std::size_t> perm;
    PairBatch joint, marginal;
};

MessagePairs build_message_pairs(const Tensor& m_flat, const Tensor& z_flat, Rng& rng) {
    MessagePairs pairs;
    pairs.joint.x = m_flat;
    pairs.joint.y = z_flat;
    pairs.perm = shuffled_indices(m_flat.rows(), rng);
    pairs.marginal.x = m_flat;
    pairs.marginal.y = Tensor(z_flat.rows(), z_flat.cols());
    for (std::size_t i = 0; i < pairs.perm.size(); ++i)
        set_rows(pairs.marginal.y, i, slice_rows(z_flat, pairs.perm[i], 1));
    return pairs;
}

PairGrads make_pair_grads(const PairBatch& joint) {
    return PairGrads{Tensor(joint.x.rows(), joint.x.cols()),
                     Tensor(joint.y.rows(), joint.y.cols()),
                     Tensor(joint.x.rows(), joint.x.cols()),
                     Tensor(joint.y.rows(), joint.y.cols())};
}

} // namespace

// --- public single-message ops ---------------------------------------------

Tensor alice_encode(SecureSystem& sys, const Message& m, const PermKey& key,
                    int gamma) {
    if (gamma < 1 || gamma > 3)
        throw std::invalid_argument("alice_encode: gamma must be 1, 2 or 3");
    Tensor u = sys.cfg.family == CodecFamily::token
                   ? sys.embedding.forward(m.tokens)
                   : sys.patch_embed.forward(m.dense);
    if (u.rows() != sys.cfg.message_rows)
        throw std::invalid_argument("alice_encode: message length mismatch");
    AliceForward fwd = alice_forward(sys, u, {key}, gamma);
    return fwd.x;
}

Tensor bob_decode_feature(SecureSystem& sys, const Tensor& y, const PermKey& key,
                          int gamma) {
    if (gamma < 1 || gamma > 3)
        throw std::invalid_argument("bob_decode: gamma must be 1, 2 or 3");
    if (y.rows() != sys.cfg.message_rows || y.cols() != sys.cfg.channel_dim)
        throw std::invalid_argument("bob_decode: tensor shape mismatch");
    return bob_forward(sys, y, {key}, gamma);
}

Message bob_decode(SecureSystem& sys, const Tensor& y, const PermKey& key,
                   int gamma) {
    const Tensor feature = bob_decode_feature(sys, y, key, gamma);
    Message m;
    if (sys.cfg.family == CodecFamily::token)
        m.tokens = decode_tokens(feature, sys.embedding);
    else
        m.dense = feature;
    return m;
}

Message eve_decode(SecureSystem& sys, const Tensor& z) {
    const Tensor feature = eve_forward(sys, z);
    Message m;
    if (sys.cfg.family == CodecFamily::token)
        m.tokens = decode_tokens(feature, sys.eve_codebook);
    else
        m.dense = feature;
    return m;
}

// --- training ----------------------------------------------------------------

namespace {

void zero_codec_grads(SecureSystem& sys) {
    if (sys.cfg.family == CodecFamily::token)
        sys.embedding.zero_grads();
    else
        sys.patch_embed.zero_grads();
    sys.semantic_encoder.zero_grads();
    sys.channel_encoder.zero_grads();
    sys.channel_decoder.zero_grads();
    sys.semantic_decoder.zero_grads();
}

void adam_codec(SecureSystem& sys, double lr) {
    if (sys.cfg.family == CodecFamily::token)
        sys.embedding.adam_step(lr);
    else
        sys.patch_embed.adam_step(lr);
    sys.semantic_encoder.adam_step(lr);
    sys.channel_encoder.adam_step(lr);
    sys.channel_decoder.adam_step(lr);
    sys.semantic_decoder.adam_step(lr);
}

struct StepContext {
    BatchData data;
    std::vector<PermKey> keys;
    AliceForward fwd;
    Tensor y, z;
    Tensor m_flat;
};

StepContext run_common_phase(SecureSystem& sys, Rng& batch_stream, Rng& key_stream,
                             Rng& chan_bob, Rng& chan_eve) {
    const SystemConfig& cfg = sys.cfg;
    StepContext ctx;
    ctx.data = sample_batch(cfg, cfg.batch, batch_stream);
    ctx.keys.reserve(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b)
        ctx.keys.push_back(sys.key_for_message(key_stream));
    ctx.fwd = alice_forward(sys, embed_batch(sys, ctx.data), ctx.keys, cfg.gamma);
    ctx.y = transmit_stacked(ctx.fwd.x, cfg.channel, cfg.message_rows, chan_bob);
    ctx.z = transmit_stacked(ctx.fwd.x, cfg.channel, cfg.message_rows, chan_eve);
    ctx.m_flat = message_flat_of(cfg, ctx.data);
    return ctx;
}

void update_critics(SecureSystem& sys, const StepContext& ctx, Rng& mine_stream) {
    const SystemConfig& cfg = sys.cfg;
    TokenPairs xy = build_token_pairs(ctx.fwd.x, ctx.y, cfg.mine_pair_rows, mine_stream);
    mine_update(sys.critic_xy, xy.joint, xy.marginal, cfg.lr_mine);
    TokenPairs xz = build_token_pairs(ctx.fwd.x, ctx.z, cfg.mine_pair_rows, mine_stream);
    mine_update(sys.critic_xz, xz.joint, xz.marginal, cfg.lr_mine);
    Tensor z_flat = flatten_messages(ctx.z, cfg.message_rows);
    MessagePairs mz = build_message_pairs(ctx.m_flat, z_flat, mine_stream);
    mine_update(sys.critic_mz, mz.joint, mz.marginal, cfg.lr_mine);
}

// Alice+Bob update by Eq. 9. Returns the filled trace row.
TraceRow bob_update(SecureSystem& sys, StepContext& ctx, Rng& mine_stream,
                    std::size_t step) {
    const SystemConfig& cfg = sys.cfg;
    const std::size_t n = cfg.message_rows;
    const std::size_t stacked_rows = ctx.fwd.x.rows();
    const double r_k = cfg.analytic_key_rate();

    zero_codec_grads(sys);

    // Reconstruction loss and its gradient at the decoder output.
    const Tensor feature = bob_forward(sys, ctx.y, ctx.keys, cfg.gamma);
    Tensor g_feature(feature.rows(), feature.cols());
    double l_r = 0.0;
    if (cfg.family == CodecFamily::token) {
        l_r = ce_distance_loss(feature, ctx.data.flat_tokens, sys.embedding,
                               &g_feature);
    } else {
        const double inv = 1.0 / static_cast<double>(feature.size());
        for (std::size_t i = 0; i < feature.size(); ++i) {
            const double diff = feature.data()[i] - ctx.data.dense.data()[i];
            l_r += diff * diff * inv;
            g_feature.data()[i] = 2.0 * diff * inv;
        }
    }

    // Mutual-information terms. Values are always estimated; gradient
    // passes run only for the loss terms with non-zero weight.
    Tensor gx(stacked_rows, cfg.channel_dim);

    TokenPairs xz = build_token_pairs(ctx.fwd.x, ctx.z, cfg.mine_pair_rows, mine_stream);
    const double i_xz_bits = nats_to_bits(dv_bound(sys.critic_xz, xz.joint, xz.marginal));
    const bool bracket_active = i_xz_bits - r_k > 0.0;

    auto route_token_grads = [&](const TokenPairs& pairs, const PairGrads& grads) {
        for (std::size_t i = 0; i < pairs.idx.size(); ++i) {
            auto add_row = [&](std::size_t row, const Tensor& src, std::size_t src_row) {
                double* dst = gx.row(row).data();
                const double* s = src.row(src_row).data();
                for (std::size_t c = 0; c < gx.cols(); ++c) dst[c] += s[c];
            };
            add_row(pairs.idx[i], grads.x_joint, i);
            add_row(pairs.idx[i], grads.y_joint, i); // dY/dX = I
            add_row(pairs.idx[i], grads.x_marginal, i);
            add_row(pairs.idx[pairs.perm[i]], grads.y_marginal, i);
        }
    };

    double i_xy_bits;
    {
        TokenPairs xy =
            build_token_pairs(ctx.fwd.x, ctx.y, cfg.mine_pair_rows, mine_stream);
        if (cfg.beta > 0.0) {
            PairGrads grads = make_pair_grads(xy.joint);
            // d(total)/d(i_xy nats) = -beta / ln2
            const double nats = dv_bound_with_input_grads(
                sys.critic_xy, xy.joint, xy.marginal, -cfg.beta / kLn2, grads);
            i_xy_bits = nats_to_bits(nats);
            route_token_grads(xy, grads);
        } else {
            i_xy_bits = nats_to_bits(dv_bound(sys.critic_xy, xy.joint, xy.marginal));
        }
    }
    if (cfg.beta > 0.0 && bracket_active) {
        PairGrads grads = make_pair_grads(xz.joint);
        dv_bound_with_input_grads(sys.critic_xz, xz.joint, xz.marginal,
                                  cfg.beta / kLn2, grads);
        route_token_grads(xz, grads);
    }

    double r_l_bits;
    {
        Tensor z_flat = flatten_messages(ctx.z, n);
        MessagePairs mz = build_message_pairs(ctx.m_flat, z_flat, mine_stream);
        if (cfg.alpha > 0.0) {
            PairGrads grads = make_pair_grads(mz.joint);
            // r_l = nats / (ln2 * n); d(total)/d(nats) = alpha / (ln2 * n)
            const double nats = dv_bound_with_input_grads(
                sys.critic_mz, mz.joint, mz.marginal,
                cfg.alpha / (kLn2 * static_cast<double>(n)), grads);
            r_l_bits = nats_to_bits(nats) / static_cast<double>(n);
            // Route the flattened Z gradients back onto the stacked X. The
            // marginal row b borrowed message perm[b]'s Z.
            const std::size_t block = n * cfg.channel_dim;
            for (std::size_t b = 0; b < cfg.batch; ++b) {
                const double* gj = grads.y_joint.row(b).data();
                const double* gm = grads.y_marginal.row(b).data();
                double* dstj = gx.data().data() + b * block;
                double* dstm = gx.data().data() + mz.perm[b] * block;
                for (std::size_t i = 0; i < block; ++i) {
                    dstj[i] += gj[i];
                    dstm[i] += gm[i];
                }
            }
        } else {
            r_l_bits = nats_to_bits(dv_bound(sys.critic_mz, mz.joint, mz.marginal)) /
                       static_cast<double>(n);
        }
    }

    const double c_s_bits = secrecy_capacity(i_xy_bits, i_xz_bits, r_k);
    const double total = total_loss(l_r, r_l_bits, c_s_bits, cfg.alpha, cfg.beta);
    if (!std::isfinite(total))
        throw DivergenceError("train_system: loss diverged at step " +
                              std::to_string(step));

    // Backward through Bob (the y-path gradient adds onto gx since
    // Y = X + noise) and then through Alice.
    Tensor gy = bob_backward(sys, ctx.keys, cfg.gamma, g_feature);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += gy.data()[i];
    Tensor gu = alice_backward(sys, ctx.fwd, ctx.keys, cfg.gamma, gx);
    if (cfg.family == CodecFamily::token)
        sys.embedding.accumulate_lookup_grad(ctx.data.flat_tokens, gu);
    else
        sys.patch_embed.backward(gu);

    adam_codec(sys, cfg.lr_codec);

    TraceRow row;
    row.step = step;
    row.l_r = l_r;
    row.r_l = r_l_bits;
    row.i_xy = i_xy_bits;
    row.i_xz = i_xz_bits;
    row.c_s = c_s_bits;
    row.total = total;
    return row;
}

double eve_update(SecureSystem& sys, const StepContext& ctx) {
    const SystemConfig& cfg = sys.cfg;
    sys.eve_channel_decoder.zero_grads();
    sys.eve_semantic_decoder.zero_grads();
    if (cfg.family == CodecFamily::token) sys.eve_codebook.zero_grads();

    const Tensor feature = eve_forward(sys, ctx.z);
    Tensor g_feature(feature.rows(), feature.cols());
    double loss = 0.0;
    if (cfg.family == CodecFamily::token) {
        loss = ce_distance_loss(feature, ctx.data.flat_tokens, sys.eve_codebook,
                                &g_feature);
    } else {
        const double inv = 1.0 / static_cast<double>(feature.size());
        for (std::size_t i = 0; i < feature.size(); ++i) {
            const double diff = feature.data()[i] - ctx.data.dense.data()[i];
            loss += diff * diff * inv;
            g_feature.data()[i] = 2.0 * diff * inv;
        }
    }
    if (!std::isfinite(loss))
        throw DivergenceError("train_system: Eve loss diverged");
    sys.eve_channel_decoder.backward(sys.eve_semantic_decoder.backward(g_feature));
    sys.eve_channel_decoder.adam_step(cfg.lr_codec);
    sys.eve_semantic_decoder.adam_step(cfg.lr_codec);
    if (cfg.family == CodecFamily::token) sys.eve_codebook.adam_step(cfg.lr_codec);
    return loss;
}

} // namespace

TrainResult train_system(const SystemConfig& cfg) {
    cfg.validate();
    TrainResult result{SecureSystem::make(cfg), {}, {}};
    SecureSystem& sys = result.system;

    const Rng master(cfg.seed);
    Rng batch_stream = master.substream("batch");
    Rng key_stream = master.substream("key-sampling");
    Rng chan_bob = master.substream("channel/bob");
    Rng chan_eve = master.substream("channel/eve");
    Rng mine_stream = master.substream("mine");

    std::size_t bob_updates = 0;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        StepContext ctx = run_common_phase(sys, batch_stream, key_stream, chan_bob,
                                           chan_eve);
        update_critics(sys, ctx, mine_stream);
        const bool bob_turn = cfg.eve_mode == EveTrainingMode::post || step % 2 == 0;
        if (bob_turn) {
            TraceRow row = bob_update(sys, ctx, mine_stream, step);
            if (bob_updates % cfg.log_every == 0 || step + 1 == cfg.steps)
                result.trace.push_back(row);
            ++bob_updates;
        } else {
            result.eve_loss_trace.push_back(eve_update(sys, ctx));
        }
    }
    if (cfg.eve_mode == EveTrainingMode::post) {
        // Same budget for the attacker: as many update steps as Bob got.
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            StepContext ctx = run_common_phase(sys, batch_stream, key_stream,
                                               chan_bob, chan_eve);
            result.eve_loss_trace.push_back(eve_update(sys, ctx));
        }
    }
    return result;
}

std::vector<double> train_eve(SecureSystem& sys, std::size_t steps,
                              std::string_view stream_label) {
    const Rng master(sys.cfg.seed);
    const Rng scoped = master.substream(stream_label);
    Rng batch_stream = scoped.substream("batch");
    Rng key_stream = scoped.substream("key-sampling");
    Rng chan_bob = scoped.substream("channel/bob");
    Rng chan_eve = scoped.substream("channel/eve");
    std::vector<double> trace;
    trace.reserve(steps);
    for (std::size_t step = 0; step < steps; ++step) {
        StepContext ctx = run_common_phase(sys, batch_stream, key_stream, chan_bob,
                                           chan_eve);
        trace.push_back(eve_update(sys, ctx));
    }
    return trace;
}

// --- evaluation ---------------------------------------------------------------

namespace {

RunRecord evaluate_point(SecureSystem sys, double snr_db, std::uint64_t stream_seed) {
    const SystemConfig& cfg = sys.cfg;
    sys.cfg.channel.snr_db = snr_db;
    const Rng point(stream_seed);
    Rng batch_stream = point.substream("batch");
    Rng key_stream = point.substream("key-sampling");
    Rng chan_bob = point.substream("channel/bob");
    Rng chan_eve = point.substream("channel/eve");
    Rng mine_stream = point.substream("mine");

    const std::size_t n = cfg.message_rows;
    RunRecord rec;
    rec.snr_db = snr_db;
    rec.channel = cfg.channel.kind;
    rec.mode = cfg.mode;
    rec.seed = cfg.seed;
    rec.r_k = cfg.analytic_key_rate();

    double bob_mse = 0.0, bob_acc = 0.0, bob_bleu = 0.0;
    double eve_mse = 0.0, eve_acc = 0.0, eve_bleu = 0.0;
    double i_xy_nats = 0.0, i_xz_nats = 0.0, r_l_nats = 0.0;
    std::size_t mi_batches = 0;

    const std::size_t chunk = 50; // messages per evaluation batch
    std::size_t done = 0;
    while (done < cfg.eval_messages) {
        const std::size_t count = std::min(chunk, cfg.eval_messages - done);
        BatchData data = sample_batch(cfg, count, batch_stream);
        std::vector<PermKey> keys;
        keys.reserve(count);
        for (std::size_t b = 0; b < count; ++b)
            keys.push_back(sys.key_for_message(key_stream));
        AliceForward fwd =
            alice_forward(sys, embed_batch(sys, data), keys, cfg.gamma);
        Tensor y = transmit_stacked(fwd.x, sys.cfg.channel, n, chan_bob);
        Tensor z = transmit_stacked(fwd.x, sys.cfg.channel, n, chan_eve);

        const Tensor bob_feature = bob_forward(sys, y, keys, cfg.gamma);
        const Tensor eve_feature = eve_forward(sys, z);

        if (cfg.family == CodecFamily::token) {
            const Tensor u_clean = fwd.u;
            bob_mse += mse(bob_feature, u_clean) * static_cast<double>(count);
            eve_mse += mse(eve_feature, u_clean) * static_cast<double>(count);
            const std::vector<int> bob_tokens = decode_tokens(bob_feature, sys.embedding);
            const std::vector<int> eve_tokens =
                decode_tokens(eve_feature, sys.eve_codebook);
            for (std::size_t b = 0; b < count; ++b) {
                const TokenSeq truth = data.tokens[b];
                const TokenSeq bob_seq(bob_tokens.begin() + b * n,
                                       bob_tokens.begin() + (b + 1) * n);
                const TokenSeq eve_seq(eve_tokens.begin() + b * n,
                                       eve_tokens.begin() + (b + 1) * n);
                bob_acc += token_accuracy(bob_seq, truth);
                eve_acc += token_accuracy(eve_seq, truth);
                bob_bleu += bleu(bob_seq, truth, 1);
                eve_bleu += bleu(eve_seq, truth, 1);
            }
        } else {
            bob_mse += mse(bob_feature, data.dense) * static_cast<double>(count);
            eve_mse += mse(eve_feature, data.dense) * static_cast<double>(count);
        }

        // Frozen-critic information estimates on the evaluation batches.
        TokenPairs xy = build_token_pairs(fwd.x, y, cfg.mine_pair_rows, mine_stream);
        i_xy_nats += dv_bound(sys.critic_xy, xy.joint, xy.marginal);
        TokenPairs xz = build_token_pairs(fwd.x, z, cfg.mine_pair_rows, mine_stream);
        i_xz_nats += dv_bound(sys.critic_xz, xz.joint, xz.marginal);
        Tensor z_flat = flatten_messages(z, n);
        MessagePairs mz = build_message_pairs(message_flat_of(cfg, data), z_flat,
                                              mine_stream);
        r_l_nats += dv_bound(sys.critic_mz, mz.joint, mz.marginal);
        ++mi_batches;

        done += count;
    }

    const double inv_msgs = 1.0 / static_cast<double>(cfg.eval_messages);
    rec.bob_mse = bob_mse * inv_msgs;
    rec.eve_mse = eve_mse * inv_msgs;
    if (cfg.family == CodecFamily::token) {
        rec.bob_acc = bob_acc * inv_msgs;
        rec.eve_acc = eve_acc * inv_msgs;
        rec.bob_bleu1 = bob_bleu * inv_msgs;
        rec.eve_bleu1 = eve_bleu * inv_msgs;
    } else {
        rec.bob_acc = rec.eve_acc = std::numeric_limits<double>::quiet_NaN();
        rec.bob_bleu1 = rec.eve_bleu1 = std::numeric_limits<double>::quiet_NaN();
    }
    const double inv_batches = 1.0 / static_cast<double>(mi_batches);
    rec.i_xy = nats_to_bits(i_xy_nats * inv_batches);
    rec.i_xz = nats_to_bits(i_xz_nats * inv_batches);
    rec.r_l = nats_to_bits(r_l_nats * inv_batches) / static_cast<double>(n);
    rec.c_s = secrecy_capacity(rec.i_xy, rec.i_xz, rec.r_k);
    return rec;
}

} // namespace

std::vector<RunRecord> run_sweep(const SecureSystem& sys,
                                 const std::vector<double>& snr_list) {
    std::vector<std::future<RunRecord>> futures;
    futures.reserve(snr_list.size());
    for (std::size_t i = 0; i < snr_list.size(); ++i) {
        const std::uint64_t stream_seed =
            Rng::derive_seed(sys.cfg.seed, "eval/" + std::to_string(i));
        futures.push_back(std::async(std::launch::async, evaluate_point, sys,
                                     snr_list[i], stream_seed));
    }
    std::vector<RunRecord> records;
    records.reserve(snr_list.size());
    for (auto& f : futures) records.push_back(f.get());
    return records;
}

// --- persistence ----------------------------------------------------------------

void SecureSystem::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    if (cfg.family == CodecFamily::token) {
        embedding.save(dir / "alice_embedding.psec");
        eve_codebook.save(dir / "eve_codebook.psec");
    } else {
        patch_embed.save(dir / "alice_patch_embed.psec");
    }
    semantic_encoder.save(dir / "alice_semantic.psec");
    channel_encoder.save(dir / "alice_channel.psec");
    channel_decoder.save(dir / "bob_channel.psec");
    semantic_decoder.save(dir / "bob_semantic.psec");
    eve_channel_decoder.save(dir / "eve_channel.psec");
    eve_semantic_decoder.save(dir / "eve_semantic.psec");
    critic_xy.net.save(dir / "critic_xy.psec");
    critic_xz.net.save(dir / "critic_xz.psec");
    critic_mz.net.save(dir / "critic_mz.psec");
    if (fixed_key) {
        std::ofstream out(dir / "fixed_key.txt");
        out << fixed_key->serialize() << '\n';
    }
}

SecureSystem SecureSystem::load(const std::filesystem::path& dir,
                                const SystemConfig& cfg) {
    SecureSystem sys = make(cfg);
    if (cfg.family == CodecFamily::token) {
        sys.embedding = Embedding::load(dir / "alice_embedding.psec");
        sys.eve_codebook = Embedding::load(dir / "eve_codebook.psec");
    } else {
        sys.patch_embed = MlpNetwork::load(dir / "alice_patch_embed.psec");
    }
    sys.semantic_encoder = MlpNetwork::load(dir / "alice_semantic.psec");
    sys.channel_encoder = MlpNetwork::load(dir / "alice_channel.psec");
    sys.channel_decoder = MlpNetwork::load(dir / "bob_channel.psec");
    sys.semantic_decoder = MlpNetwork::load(dir / "bob_semantic.psec");
    sys.eve_channel_decoder = MlpNetwork::load(dir / "eve_channel.psec");
    sys.eve_semantic_decoder = MlpNetwork::load(dir / "eve_semantic.psec");
    sys.critic_xy.net = MlpNetwork::load(dir / "critic_xy.psec");
    sys.critic_xz.net = MlpNetwork::load(dir / "critic_xz.psec");
    sys.critic_mz.net = MlpNetwork::load(dir / "critic_mz.psec");
    const auto key_path = dir / "fixed_key.txt";
    if (std::filesystem::exists(key_path)) {
        std::ifstream in(key_path);
        std::string line;
        std::getline(in, line);
        sys.fixed_key = PermKey::parse(line);
    }
    return sys;
}

// --- csv -------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    const auto rc = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, rc.ptr);
}

std::string records_csv_header() {
    return "snr_db,channel,mode,bob_mse,bob_acc,bob_bleu1,eve_mse,eve_acc,"
           "eve_bleu1,i_xy,i_xz,r_l,c_s,r_k,seed";
}

void append_records_csv(const std::filesystem::path& path,
                        const std::vector<RunRecord>& records) {
    const bool fresh = !std::filesystem::exists(path) ||
                       std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("append_records_csv: cannot open " + path.string());
    if (fresh) out << records_csv_header() << '\n';
    for (const RunRecord& r : records) {
        out << format_double(r.snr_db) << ',' << to_string(r.channel) << ','
            << to_string(r.mode) << ',' << format_double(r.bob_mse) << ','
            << format_double(r.bob_acc) << ',' << format_double(r.bob_bleu1) << ','
            << format_double(r.eve_mse) << ',' << format_double(r.eve_acc) << ','
            << format_double(r.eve_bleu1) << ',' << format_double(r.i_xy) << ','
            << format_double(r.i_xz) << ',' << format_double(r.r_l) << ','
            << format_double(r.c_s) << ',' << format_double(r.r_k) << ','
            << r.seed << '\n';
    }
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
    out << "step,l_r,r_l,i_xy,i_xz,c_s,total\n";
    for (const TraceRow& r : trace) {
        out << r.step << ',' << format_double(r.l_r) << ',' << format_double(r.r_l)
            << ',' << format_double(r.i_xy) << ',' << format_double(r.i_xz) << ','
            << format_double(r.c_s) << ',' << format_double(r.total) << '\n';
    }
}

} // namespace permsec
