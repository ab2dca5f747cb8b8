// permsec: shuffling-based secure semantic transmission experiments.
//
// Subcommands: keyrate, bound, brute-mi, handshake, codebook, train, sweep,
// attack. Every run is a pure function of its flags and --seed.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "permsec/channel.hpp"
#include "permsec/keyexchange.hpp"
#include "permsec/pipeline.hpp"
#include "permsec/secrecy.hpp"
#include "permsec/shuffle.hpp"

namespace fs = std::filesystem;
using namespace permsec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonOverrides {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "run-out";
    bool have_seed = false;
    std::uint64_t seed = 42;
    std::string channel_kind;
    bool have_snr = false;
    double snr_db = 0.0;
    bool have_flip = false;
    double flip_prob = 0.0;
};

void add_common(CLI::App* cmd, CommonOverrides& opts) {
    cmd->add_option("--config", opts.config_path, "config file (key = value)");
    cmd->add_option("--set", opts.sets, "override a config key, e.g. --set steps=100")
        ->take_all();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "master seed")
        ->each([&](const std::string&) { opts.have_seed = true; });
    cmd->add_option("--channel", opts.channel_kind, "awgn|rayleigh|bsc");
    cmd->add_option("--snr", opts.snr_db, "channel SNR in dB")
        ->each([&](const std::string&) { opts.have_snr = true; });
    cmd->add_option("--p", opts.flip_prob, "BSC flip probability")
        ->each([&](const std::string&) { opts.have_flip = true; });
}

SystemConfig resolve_config(const CommonOverrides& opts) {
    KvFile kv = opts.config_path.empty() ? SystemConfig{}.to_kv()
                                         : KvFile::load(opts.config_path);
    // file values sit on top of defaults; --set and dedicated flags override
    KvFile merged = SystemConfig{}.to_kv();
    for (const auto& [k, v] : kv.items()) merged.set(k, v);
    for (const std::string& entry : opts.sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got: " + entry);
        merged.set(entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (opts.have_seed) merged.set("seed", std::to_string(opts.seed));
    if (!opts.channel_kind.empty()) merged.set("channel.kind", opts.channel_kind);
    if (opts.have_snr) merged.set("channel.snr_db", format_double(opts.snr_db));
    if (opts.have_flip) merged.set("channel.flip_prob", format_double(opts.flip_prob));
    return SystemConfig::from_kv(merged);
}

void echo_config(const SystemConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    cfg.to_kv().save(out_dir / "effective-config.txt");
}

std::vector<double> parse_snr_list(const std::string& csv) {
    std::vector<double> snrs;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        snrs.push_back(std::stod(csv.substr(pos, comma - pos)));
        if (comma == csv.size()) break;
        pos = comma + 1;
    }
    if (snrs.empty()) throw ConfigError("empty --snrs list");
    return snrs;
}

int cmd_keyrate(std::size_t n, std::size_t l, std::size_t c, std::uint32_t gr,
                std::uint32_t gc, const std::string& kind_name) {
    const DataKind kind = kind_name == "audio" ? DataKind::audio
                                               : DataKind::text_image;
    if (kind == DataKind::audio && c == 0)
        throw ConfigError("audio key rates need --c (filter count)");
    std::printf("# R_K bits per %s, N=%zu L=%zu",
                kind == DataKind::audio ? "sample" : "unit", n, l);
    if (c > 0) std::printf(" C=%zu", c);
    std::printf(" g_r=%u g_c=%u\n", gr, gc);
    std::printf("mode,rk\n");
    std::printf("row,%.4f\n", key_rate(n, l, gr, gc, ShuffleMode::row, kind, c ? c : 1));
    std::printf("col,%.4f\n",
                key_rate(n, l, gr, gc, ShuffleMode::column, kind, c ? c : 1));
    std::printf("row+col,%.4f\n",
                key_rate(n, l, gr, gc, ShuffleMode::row_column, kind, c ? c : 1));
    if (c > 0)
        std::printf("3-order,%.6g\n",
                    key_rate(n, l, gr, gc, ShuffleMode::three_order, kind, c));
    else
        std::printf("3-order,/\n");
    return kExitOk;
}

int cmd_bound(std::size_t n, std::size_t g, std::size_t alphabet, double pe) {
    const double raw = eve_rate_bound(n, g, alphabet, pe);
    std::printf("n=%zu g=%zu |X|=%zu p_e=%g\n", n, g, alphabet, pe);
    std::printf("eve_rate_bound,%.6f\n", raw);
    std::printf("eve_capacity_clamped,%.6f\n", eve_capacity_clamped(n, g, alphabet, pe));
    return kExitOk;
}

int cmd_brute_mi(std::size_t alphabet, std::size_t n, std::size_t g) {
    PermChannelSpec spec;
    spec.alphabet_size = alphabet;
    spec.n = n;
    spec.g = g;
    std::printf("|X|=%zu n=%zu g=%zu uniform input\n", alphabet, n, g);
    spec.model = PermChannelModel::exact_multiset;
    std::printf("exact_multiset,%.6f\n", exact_perm_channel_mi(spec));
    const double bound = static_cast<double>(n) * std::log2(double(alphabet)) -
                         log2_factorial_exact(double(n) / double(g));
    try {
        spec.model = PermChannelModel::idealized_rowmodel;
        std::printf("idealized_rowmodel,%.6f\n", idealized_perm_channel_mi(spec));
    } catch (const ModelInfeasible&) {
        std::printf("idealized_rowmodel,infeasible\n");
    }
    std::printf("theorem_bound,%.6f\n", bound);
    return kExitOk;
}

int cmd_codebook(std::size_t n, std::size_t l, std::uint32_t gr, std::uint32_t gc,
                 std::size_t count, std::uint64_t seed, const std::string& out) {
    const Codebook book = build_codebook(n, l, gr, gc, count, seed);
    book.save(out);
    std::printf("wrote %zu keys to %s\n", book.size(), out.c_str());
    return kExitOk;
}

int cmd_handshake(const std::string& prime_str, const std::string& root_str,
                  std::uint64_t seed, const std::string& book_path,
                  std::size_t book_count, std::size_t book_n, std::size_t book_l,
                  bool tamper) {
    DhParams params{mpz_class(prime_str), mpz_class(root_str)};
    validate_params(params);
    const Rng master(seed);
    auto draw_private = [&](std::string_view who) {
        Rng stream = master.substream(who);
        mpz_class r = 0;
        for (int i = 0; i < 4; ++i) {
            r <<= 64;
            r += mpz_class(stream.next_u64());
        }
        return mpz_class(1 + r % (params.p - 2));
    };
    const mpz_class a = draw_private("dh/alice");
    const mpz_class b = draw_private("dh/bob");
    const mpz_class pub_a = dh_public(params, a);
    mpz_class pub_b = dh_public(params, b);
    std::cout << "P = " << params.p << "\nG = " << params.g << '\n';
    std::cout << "alice private a = " << a << '\n';
    std::cout << "bob   private b = " << b << '\n';
    std::cout << "A = G^a mod P = " << pub_a << '\n';
    std::cout << "B = G^b mod P = " << pub_b << '\n';
    if (tamper) {
        pub_b = pub_b == 2 ? 3 : 2; // corrupted public value reaches Alice
        std::cout << "(tampered B in flight: " << pub_b << ")\n";
    }
    const mpz_class shared_alice = dh_shared(params, a, pub_b);
    const mpz_class shared_bob = dh_shared(params, b, pub_a);
    std::cout << "I1 = B^a mod P = " << shared_alice << '\n';
    std::cout << "I2 = A^b mod P = " << shared_bob << '\n';
    const bool match = shared_alice == shared_bob;
    std::cout << "agreement: " << (match ? "yes" : "MISMATCH") << '\n';

    Codebook book;
    if (!book_path.empty())
        book = Codebook::load(book_path);
    else
        book = build_codebook(book_n, book_l, 1, 1, book_count,
                              Rng::derive_seed(seed, "codebook"));
    const mpz_class index = shared_alice % mpz_class((unsigned long)book.size());
    std::cout << "codebook size = " << book.size() << '\n';
    std::cout << "index = shared mod " << book.size() << " = " << index << '\n';
    std::cout << "key = " << lookup(book, shared_alice).serialize() << '\n';
    return match ? kExitOk : 1;
}

int cmd_train(const CommonOverrides& opts) {
    const SystemConfig cfg = resolve_config(opts);
    echo_config(cfg, opts.out_dir);
    const TrainResult result = train_system(cfg);
    write_trace_csv(fs::path(opts.out_dir) / "trace.csv", result.trace);
    result.system.save(fs::path(opts.out_dir) / "checkpoint");
    std::ofstream eve_out(fs::path(opts.out_dir) / "eve_loss.csv");
    eve_out << "step,loss\n";
    for (std::size_t i = 0; i < result.eve_loss_trace.size(); ++i)
        eve_out << i << ',' << format_double(result.eve_loss_trace[i]) << '\n';
    if (!result.trace.empty()) {
        const TraceRow& last = result.trace.back();
        std::printf("trained %zu steps: l_r=%.4f r_l=%.4f c_s=%.4f total=%.4f\n",
                    cfg.steps, last.l_r, last.r_l, last.c_s, last.total);
    }
    std::printf("outputs in %s\n", opts.out_dir.c_str());
    return kExitOk;
}

int cmd_sweep(const CommonOverrides& opts, const std::string& snr_csv,
              const std::string& load_dir) {
    const SystemConfig cfg = resolve_config(opts);
    echo_config(cfg, opts.out_dir);
    SecureSystem sys = load_dir.empty()
                           ? train_system(cfg).system
                           : SecureSystem::load(load_dir, cfg);
    if (load_dir.empty()) sys.save(fs::path(opts.out_dir) / "checkpoint");
    const std::vector<RunRecord> records = run_sweep(sys, parse_snr_list(snr_csv));
    const fs::path csv = fs::path(opts.out_dir) / "records.csv";
    fs::remove(csv);
    append_records_csv(csv, records);
    for (const RunRecord& r : records)
        std::printf("snr=%5.1f bob_acc=%.4f eve_acc=%.4f r_l=%.4f c_s=%.4f\n",
                    r.snr_db, r.bob_acc, r.eve_acc, r.r_l, r.c_s);
    std::printf("records in %s\n", csv.string().c_str());
    return kExitOk;
}

int cmd_attack(const CommonOverrides& opts, const std::string& snr_csv) {
    // the no-protection ablation: same system, shuffling disabled
    CommonOverrides patched = opts;
    patched.sets.push_back("mode=none");
    const SystemConfig cfg = resolve_config(patched);
    echo_config(cfg, opts.out_dir);
    const TrainResult result = train_system(cfg);
    result.system.save(fs::path(opts.out_dir) / "checkpoint");
    const std::vector<RunRecord> records =
        run_sweep(result.system, parse_snr_list(snr_csv));
    const fs::path csv = fs::path(opts.out_dir) / "records.csv";
    fs::remove(csv);
    append_records_csv(csv, records);
    for (const RunRecord& r : records)
        std::printf("snr=%5.1f bob_acc=%.4f eve_acc=%.4f gap=%.4f\n", r.snr_db,
                    r.bob_acc, r.eve_acc, r.bob_acc - r.eve_acc);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"shuffling-based secure semantic transmission toolkit"};
    app.require_subcommand(1);

    // keyrate
    auto* keyrate = app.add_subcommand("keyrate", "key rates per shuffling mode");
    std::size_t kr_n = 16, kr_l = 16, kr_c = 0;
    std::uint32_t kr_gr = 1, kr_gc = 1;
    std::string kr_kind = "text";
    keyrate->add_option("--n", kr_n, "rows (tokens/patches)")->required();
    keyrate->add_option("--l", kr_l, "columns (feature width)")->required();
    keyrate->add_option("--c", kr_c, "filters (audio features)");
    keyrate->add_option("--grain-row", kr_gr, "row grain");
    keyrate->add_option("--grain-col", kr_gc, "column grain");
    keyrate->add_option("--kind", kr_kind, "text|image|audio");

    // bound
    auto* bound = app.add_subcommand("bound", "Eve rate upper bound");
    std::size_t b_n = 16, b_g = 1, b_alpha = 2;
    double b_pe = 0.0;
    bound->add_option("--n", b_n, "block length")->required();
    bound->add_option("--g", b_g, "shuffle grain")->required();
    bound->add_option("--alphabet", b_alpha, "alphabet size");
    bound->add_option("--pe", b_pe, "error probability");

    // brute-mi
    auto* brute = app.add_subcommand("brute-mi",
                                     "brute-force permutation channel MI");
    std::size_t m_alpha = 2, m_n = 2, m_g = 1;
    brute->add_option("--alphabet", m_alpha, "alphabet size")->required();
    brute->add_option("--n", m_n, "block length")->required();
    brute->add_option("--g", m_g, "shuffle grain");

    // handshake
    auto* handshake = app.add_subcommand("handshake", "Diffie-Hellman demo");
    std::string h_prime = "23", h_root = "5", h_book;
    std::uint64_t h_seed = 42;
    std::size_t h_count = 36, h_n = 16, h_l = 16;
    bool h_tamper = false;
    handshake->add_option("--prime", h_prime, "public prime P");
    handshake->add_option("--root", h_root, "public generator G");
    handshake->add_option("--seed", h_seed, "private-key seed");
    handshake->add_option("--book", h_book, "codebook file (one key per line)");
    handshake->add_option("--count", h_count, "ad-hoc codebook size");
    handshake->add_option("--book-n", h_n, "ad-hoc codebook rows");
    handshake->add_option("--book-l", h_l, "ad-hoc codebook cols");
    handshake->add_flag("--tamper", h_tamper, "corrupt B in flight");

    // codebook
    auto* codebook = app.add_subcommand("codebook", "write an index->key table");
    std::size_t cb_n = 16, cb_l = 16, cb_count = 64;
    std::uint32_t cb_gr = 1, cb_gc = 1;
    std::uint64_t cb_seed = 42;
    std::string cb_out = "codebook.txt";
    codebook->add_option("--n", cb_n, "rows")->required();
    codebook->add_option("--l", cb_l, "columns")->required();
    codebook->add_option("--grain-row", cb_gr, "row grain");
    codebook->add_option("--grain-col", cb_gc, "column grain");
    codebook->add_option("--count", cb_count, "number of keys")->required();
    codebook->add_option("--seed", cb_seed, "sampling seed");
    codebook->add_option("--out", cb_out, "output file")->required();

    // train / sweep / attack
    CommonOverrides train_opts, sweep_opts, attack_opts;
    auto* train = app.add_subcommand("train", "train the secure codec system");
    add_common(train, train_opts);
    auto* sweep = app.add_subcommand("sweep", "train then evaluate across SNRs");
    add_common(sweep, sweep_opts);
    std::string sweep_snrs = "0,3,6,9,12,15,18", sweep_load;
    sweep->add_option("--snrs", sweep_snrs, "comma-separated dB list");
    sweep->add_option("--load", sweep_load, "checkpoint dir to reuse");
    auto* attack = app.add_subcommand("attack", "no-shuffle inversion-attack ablation");
    add_common(attack, attack_opts);
    std::string attack_snrs = "10";
    attack->add_option("--snrs", attack_snrs, "comma-separated dB list");

    try {
        app.parse(argc, argv);
        if (keyrate->parsed())
            return cmd_keyrate(kr_n, kr_l, kr_c, kr_gr, kr_gc, kr_kind);
        if (bound->parsed()) return cmd_bound(b_n, b_g, b_alpha, b_pe);
        if (brute->parsed()) return cmd_brute_mi(m_alpha, m_n, m_g);
        if (handshake->parsed())
            return cmd_handshake(h_prime, h_root, h_seed, h_book, h_count, h_n, h_l,
                                 h_tamper);
        if (codebook->parsed())
            return cmd_codebook(cb_n, cb_l, cb_gr, cb_gc, cb_count, cb_seed, cb_out);
        if (train->parsed()) return cmd_train(train_opts);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_snrs, sweep_load);
        if (attack->parsed()) return cmd_attack(attack_opts, attack_snrs);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
