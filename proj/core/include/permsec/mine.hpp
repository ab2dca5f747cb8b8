#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "permsec/neural.hpp"
#include "permsec/rng.hpp"
#include "permsec/tensor.hpp"

namespace permsec {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Aligned sample pairs: row i of x goes with row i of y.
struct PairBatch {
    Tensor x;
    Tensor y;

    std::size_t size() const { return x.rows(); }
    void validate() const;
};

// Donsker-Varadhan critic T(x,y) on concatenated pairs. The exponential
// moving average of E[e^T] stabilizes the gradient of the log-denominator
// during training; the reported bound always uses the raw batch mean.
struct MineCritic {
    MlpNetwork net;          // input dim = dim(x)+dim(y), output dim = 1
    double ema_denominator = 0.0;
    bool ema_ready = false;
    double ema_rate = 0.99;

    static MineCritic make(std::size_t dim_x, std::size_t dim_y,
                           const std::vector<std::size_t>& hidden, Rng& init);
};

// Marginal batch: same x, y permuted within the batch.
PairBatch make_marginal(const PairBatch& joint, Rng& rng);

// mean(T over joint) - ln(mean(e^T over marginal)), in nats. T is clamped
// to [-50, 50] before exponentiation. Pure evaluation, no state change.
double dv_bound(MineCritic& critic, const PairBatch& joint, const PairBatch& marginal);

// One maximization step on the critic: computes the bound, accumulates
// gradients (log-denominator gradient uses the EMA), applies Adam, and
// returns the raw bound. Throws DivergenceError on NaN.
double mine_update(MineCritic& critic, const PairBatch& joint,
                   const PairBatch& marginal, double lr);

// Bound plus d(bound)/d(inputs) with the critic parameters held fixed;
// the gradients are scaled by `scale` and accumulated into the four
// output tensors (shaped like the batch inputs). Critic parameter-grad
// buffers are left zeroed.
struct PairGrads {
    Tensor x_joint, y_joint, x_marginal, y_marginal;
};
double dv_bound_with_input_grads(MineCritic& critic, const PairBatch& joint,
                                 const PairBatch& marginal, double scale,
                                 PairGrads& grads);

using PairSampler = std::function<PairBatch(std::size_t batch, Rng& rng)>;

struct MineTrainResult {
    std::vector<double> bound_trace; // per step, nats
    double final_bound = 0.0;        // evaluated on a fresh large sample
};

// Trains the critic on batches from the sampler, lr 5e-5 Adam by default,
// and evaluates the final bound on eval_samples held-out pairs.
MineTrainResult train_mine(MineCritic& critic, const PairSampler& sampler,
                           std::size_t steps, Rng& rng, double lr = 5e-5,
                           std::size_t batch = 256, std::size_t eval_samples = 100000);

// DV bound on I(M; Z) divided by symbols_per_message, in bits. The
// batches are whole-message samples; the marginal is formed by permuting
// Z within the batch.
double estimate_leakage(MineCritic& critic_mz, const Tensor& m_batch,
                        const Tensor& z_batch, std::size_t symbols_per_message,
                        Rng& rng);

// Correlated standard bivariate Gaussian pairs with the given rho;
// closed-form I(X;Y) = -0.5*ln(1-rho^2) nats makes them the calibration
// oracle for the estimator.
PairBatch gaussian_pairs(std::size_t count, double rho, Rng& rng);

constexpr double nats_to_bits(double nats) { return nats / 0.6931471805599453; }

} // namespace permsec
