#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "permsec/rng.hpp"
#include "permsec/tensor.hpp"

namespace permsec {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w; // out x in, row-major
    std::vector<double> b; // out
    Activation act = Activation::identity;
};

// Adam moments for one parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

// Token-wise dense network: each row of an (N, in) tensor passes through
// the layer stack independently, which is what makes the whole network
// commute with row permutations. A network owns its gradient buffers and
// Adam state; forward caches the activations that backward consumes.
class MlpNetwork {
public:
    MlpNetwork() = default;
    explicit MlpNetwork(std::vector<DenseLayer> layers);

    // dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
    // Weights start uniform in +-sqrt(6/(in+out)), biases at zero.
    static MlpNetwork make(const std::vector<std::size_t>& dims,
                           const std::vector<Activation>& acts, Rng& init);

    Tensor forward(const Tensor& input);
    // Accumulates dLoss/dW, dLoss/db for every layer and returns
    // dLoss/dInput. Requires a prior forward on this network.
    Tensor backward(const Tensor& upstream);

    void zero_grads();
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    std::size_t input_dim() const { return layers_.front().in; }
    std::size_t output_dim() const { return layers_.back().out; }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<std::vector<double>>& weight_grads() const { return gw_; }
    const std::vector<std::vector<double>>& bias_grads() const { return gb_; }
    std::vector<std::vector<double>>& weight_grads() { return gw_; }
    std::vector<std::vector<double>>& bias_grads() { return gb_; }
    long step_count() const { return step_; }

    void save(const std::filesystem::path& path) const;
    static MlpNetwork load(const std::filesystem::path& path);

private:
    std::vector<DenseLayer> layers_;
    std::vector<std::vector<double>> gw_, gb_;
    std::vector<AdamState> aw_, ab_;
    long step_ = 0;

    // forward caches
    bool has_forward_ = false;
    Tensor input_;
    std::vector<Tensor> pre_;  // pre-activation per layer
    std::vector<Tensor> post_; // post-activation per layer
};

// Token embedding table (vocab x dim) with the same optimizer contract as
// MlpNetwork. Serialized as a one-layer network.
class Embedding {
public:
    Embedding() = default;
    Embedding(std::size_t vocab, std::size_t dim, Rng& init);

    Tensor forward(const std::vector<int>& tokens) const;
    // Scatter-add upstream row gradients into the rows selected by tokens.
    void accumulate_lookup_grad(const std::vector<int>& tokens, const Tensor& grad);
    // Dense gradient w.r.t. the whole table (vocab x dim).
    void accumulate_table_grad(const Tensor& grad);

    void zero_grads();
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    std::size_t vocab() const { return vocab_; }
    std::size_t dim() const { return dim_; }
    const std::vector<double>& table() const { return table_; }
    std::vector<double>& table() { return table_; }
    const std::vector<double>& grads() const { return grad_; }

    void save(const std::filesystem::path& path) const;
    static Embedding load(const std::filesystem::path& path);

private:
    std::size_t vocab_ = 0, dim_ = 0;
    std::vector<double> table_, grad_;
    AdamState adam_;
    long step_ = 0;
};

// Scalar loss over a network output, with its exact gradient. Used by the
// finite-difference harness and by tests.
struct LossFn {
    std::function<double(const Tensor&)> value;
    std::function<Tensor(const Tensor&)> grad;
};

LossFn squared_loss(const Tensor& target);

// Max over parameters of |analytic - numeric| / (|analytic| + |numeric| +
// 1e-12), with numeric from central differences at the given epsilon.
double finite_diff_check(MlpNetwork& net, const Tensor& input, const LossFn& loss,
                         double eps = 1e-5);

} // namespace permsec
