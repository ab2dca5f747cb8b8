#include "permsec/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace permsec {

namespace {

double activate(double x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
    }
    return x;
}

// Derivative in terms of the pre-activation value.
double activate_deriv(double pre, Activation act) {
    switch (act) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(pre);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 AdamState& state, long step, double lr, double beta1, double beta2,
                 double eps) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("MlpNetwork: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const DenseLayer& l = layers_[i];
        if (l.w.size() != l.in * l.out || l.b.size() != l.out)
            throw std::invalid_argument("MlpNetwork: layer buffer sizes inconsistent");
        if (i > 0 && layers_[i - 1].out != l.in)
            throw std::invalid_argument("MlpNetwork: layer dimensions do not chain");
        gw_.emplace_back(l.w.size(), 0.0);
        gb_.emplace_back(l.b.size(), 0.0);
        aw_.push_back({std::vector<double>(l.w.size(), 0.0),
                       std::vector<double>(l.w.size(), 0.0)});
        ab_.push_back({std::vector<double>(l.b.size(), 0.0),
                       std::vector<double>(l.b.size(), 0.0)});
    }
}

MlpNetwork MlpNetwork::make(const std::vector<std::size_t>& dims,
                            const std::vector<Activation>& acts, Rng& init) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw std::invalid_argument("MlpNetwork::make: dims/acts mismatch");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer l;
        l.in = dims[i];
        l.out = dims[i + 1];
        l.act = acts[i];
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        l.w.resize(l.in * l.out);
        for (double& w : l.w) w = init.uniform(-bound, bound);
        l.b.assign(l.out, 0.0);
        layers.push_back(std::move(l));
    }
    return MlpNetwork(std::move(layers));
}

Tensor MlpNetwork::forward(const Tensor& input) {
    if (input.rank3() || input.cols() != layers_.front().in)
        throw std::invalid_argument("MlpNetwork::forward: input shape mismatch");
    input_ = input;
    pre_.clear();
    post_.clear();
    const std::size_t n = input.rows();
    Tensor cur = input;
    for (const DenseLayer& l : layers_) {
        Tensor pre(n, l.out);
        for (std::size_t r = 0; r < n; ++r) {
            const double* x = cur.row(r).data();
            for (std::size_t o = 0; o < l.out; ++o) {
                const double* wrow = l.w.data() + o * l.in;
                double acc = l.b[o];
                for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * x[i];
                pre.at(r, o) = acc;
            }
        }
        Tensor post = pre;
        if (l.act != Activation::identity)
            for (double& v : post.data()) v = activate(v, l.act);
        pre_.push_back(std::move(pre));
        post_.push_back(std::move(post));
        cur = post_.back();
    }
    has_forward_ = true;
    return post_.back();
}

Tensor MlpNetwork::backward(const Tensor& upstream) {
    if (!has_forward_)
        throw std::logic_error("MlpNetwork::backward called before forward");
    if (!upstream.same_shape(post_.back()))
        throw std::invalid_argument("MlpNetwork::backward: upstream shape mismatch");
    const std::size_t n = upstream.rows();
    Tensor delta = upstream;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const DenseLayer& l = layers_[li];
        const Tensor& pre = pre_[li];
        const Tensor& below = li == 0 ? input_ : post_[li - 1];
        if (l.act != Activation::identity)
            for (std::size_t idx = 0; idx < delta.size(); ++idx)
                delta.data()[idx] *= activate_deriv(pre.data()[idx], l.act);
        std::vector<double>& gw = gw_[li];
        std::vector<double>& gb = gb_[li];
        Tensor next(n, l.in);
        for (std::size_t r = 0; r < n; ++r) {
            const double* d = delta.row(r).data();
            const double* x = below.row(r).data();
            double* nx = next.row(r).data();
            for (std::size_t o = 0; o < l.out; ++o) {
                const double dv = d[o];
                gb[o] += dv;
                double* gwrow = gw.data() + o * l.in;
                const double* wrow = l.w.data() + o * l.in;
                for (std::size_t i = 0; i < l.in; ++i) {
                    gwrow[i] += dv * x[i];
                    nx[i] += dv * wrow[i];
                }
            }
        }
        delta = std::move(next);
    }
    return delta;
}

void MlpNetwork::zero_grads() {
    for (auto& g : gw_) std::fill(g.begin(), g.end(), 0.0);
    for (auto& g : gb_) std::fill(g.begin(), g.end(), 0.0);
}

void MlpNetwork::adam_step(double lr, double beta1, double beta2, double eps) {
    ++step_;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        adam_update(layers_[li].w, gw_[li], aw_[li], step_, lr, beta1, beta2, eps);
        adam_update(layers_[li].b, gb_[li], ab_[li], step_, lr, beta1, beta2, eps);
    }
}

std::size_t MlpNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& l : layers_) n += l.w.size() + l.b.size();
    return n;
}

// --- checkpoint io -------------------------------------------------------
//
// magic "PSEC", version u16, layer count u32, then per layer:
// in u32, out u32, activation u8, W as out*in little-endian f32, b as f32.

namespace {

constexpr char kMagic[4] = {'P', 'S', 'E', 'C'};
constexpr std::uint16_t kVersion = 1;

void write_u16(std::ostream& os, std::uint16_t v) {
    unsigned char buf[2] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(buf), 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 4);
}

void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

std::uint16_t read_u16(std::istream& is) {
    unsigned char buf[2];
    is.read(reinterpret_cast<char*>(buf), 2);
    return static_cast<std::uint16_t>(buf[0] | (buf[1] << 8));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& is) {
    const std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void save_layers(const std::filesystem::path& path,
                 const std::vector<DenseLayer>& layers) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint save: cannot open " + path.string());
    os.write(kMagic, 4);
    write_u16(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(layers.size()));
    for (const DenseLayer& l : layers) {
        write_u32(os, static_cast<std::uint32_t>(l.in));
        write_u32(os, static_cast<std::uint32_t>(l.out));
        os.put(static_cast<char>(l.act));
        for (double w : l.w) write_f32(os, static_cast<float>(w));
        for (double b : l.b) write_f32(os, static_cast<float>(b));
    }
    if (!os) throw std::runtime_error("checkpoint save: write failed");
}

std::vector<DenseLayer> load_layers(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint load: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint load: bad magic");
    if (read_u16(is) != kVersion)
        throw std::runtime_error("checkpoint load: unsupported version");
    const std::uint32_t count = read_u32(is);
    std::vector<DenseLayer> layers(count);
    for (DenseLayer& l : layers) {
        l.in = read_u32(is);
        l.out = read_u32(is);
        const int act = is.get();
        if (act < 0 || act > 2)
            throw std::runtime_error("checkpoint load: bad activation tag");
        l.act = static_cast<Activation>(act);
        l.w.resize(l.in * l.out);
        for (double& w : l.w) w = read_f32(is);
        l.b.resize(l.out);
        for (double& b : l.b) b = read_f32(is);
    }
    if (!is) throw std::runtime_error("checkpoint load: truncated file");
    return layers;
}

} // namespace

void MlpNetwork::save(const std::filesystem::path& path) const {
    save_layers(path, layers_);
}

MlpNetwork MlpNetwork::load(const std::filesystem::path& path) {
    return MlpNetwork(load_layers(path));
}

// --- embedding -----------------------------------------------------------

Embedding::Embedding(std::size_t vocab, std::size_t dim, Rng& init)
    : vocab_(vocab), dim_(dim), table_(vocab * dim), grad_(vocab * dim, 0.0) {
    const double bound = std::sqrt(6.0 / static_cast<double>(vocab + dim));
    for (double& v : table_) v = init.uniform(-bound, bound);
    adam_.m.assign(table_.size(), 0.0);
    adam_.v.assign(table_.size(), 0.0);
}

Tensor Embedding::forward(const std::vector<int>& tokens) const {
    Tensor out(tokens.size(), dim_);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        const int t = tokens[r];
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_)
            throw std::invalid_argument("Embedding::forward: token out of range");
        std::copy_n(table_.data() + static_cast<std::size_t>(t) * dim_, dim_,
                    out.row(r).data());
    }
    return out;
}

void Embedding::accumulate_lookup_grad(const std::vector<int>& tokens,
                                       const Tensor& grad) {
    if (grad.rows() != tokens.size() || grad.cols() != dim_)
        throw std::invalid_argument("Embedding::accumulate_lookup_grad: shape mismatch");
    for (std::size_t r = 0; r < tokens.size(); ++r) {
        double* dst = grad_.data() + static_cast<std::size_t>(tokens[r]) * dim_;
        const double* src = grad.row(r).data();
        for (std::size_t c = 0; c < dim_; ++c) dst[c] += src[c];
    }
}

void Embedding::accumulate_table_grad(const Tensor& grad) {
    if (grad.rows() != vocab_ || grad.cols() != dim_)
        throw std::invalid_argument("Embedding::accumulate_table_grad: shape mismatch");
    for (std::size_t i = 0; i < grad_.size(); ++i) grad_[i] += grad.data()[i];
}

void Embedding::zero_grads() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Embedding::adam_step(double lr, double beta1, double beta2, double eps) {
    ++step_;
    adam_update(table_, grad_, adam_, step_, lr, beta1, beta2, eps);
}

void Embedding::save(const std::filesystem::path& path) const {
    DenseLayer l;
    l.in = vocab_;
    l.out = dim_;
    l.act = Activation::identity;
    // stored transposed relative to MlpNetwork weights (vocab rows of dim)
    l.w = table_;
    l.b.assign(dim_, 0.0);
    save_layers(path, {l});
}

Embedding Embedding::load(const std::filesystem::path& path) {
    const auto layers = load_layers(path);
    if (layers.size() != 1)
        throw std::runtime_error("Embedding::load: expected a single layer");
    Embedding e;
    e.vocab_ = layers[0].in;
    e.dim_ = layers[0].out;
    e.table_ = layers[0].w;
    e.grad_.assign(e.table_.size(), 0.0);
    e.adam_.m.assign(e.table_.size(), 0.0);
    e.adam_.v.assign(e.table_.size(), 0.0);
    return e;
}

// --- finite differences ---------------------------------------------------

LossFn squared_loss(const Tensor& target) {
    LossFn fn;
    fn.value = [target](const Tensor& out) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - target.data()[i];
            acc += d * d;
        }
        return acc;
    };
    fn.grad = [target](const Tensor& out) {
        Tensor g = out;
        for (std::size_t i = 0; i < g.size(); ++i)
            g.data()[i] = 2.0 * (out.data()[i] - target.data()[i]);
        return g;
    };
    return fn;
}

double finite_diff_check(MlpNetwork& net, const Tensor& input, const LossFn& loss,
                         double eps) {
    net.zero_grads();
    const Tensor out = net.forward(input);
    net.backward(loss.grad(out));

    // Snapshot analytic gradients before poking at the parameters.
    const auto gw = net.weight_grads();
    const auto gb = net.bias_grads();

    double worst = 0.0;
    auto probe = [&](std::vector<double>& param, const std::vector<double>& analytic) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double saved = param[i];
            param[i] = saved + eps;
            const double up = loss.value(net.forward(input));
            param[i] = saved - eps;
            const double down = loss.value(net.forward(input));
            param[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[i];
            const double rel =
                std::fabs(a - numeric) / (std::fabs(a) + std::fabs(numeric) + 1e-12);
            worst = std::max(worst, rel);
        }
    };
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        probe(net.layers()[li].w, gw[li]);
        probe(net.layers()[li].b, gb[li]);
    }
    // Restore caches for the unperturbed parameters.
    net.forward(input);
    return worst;
}

} // namespace permsec
