#include "permsec/mine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace permsec {

namespace {

constexpr double kClamp = 50.0;

Tensor concat_pairs(const PairBatch& batch) {
    Tensor out(batch.x.rows(), batch.x.cols() + batch.y.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto dst = out.row(r);
        auto x = batch.x.row(r);
        auto y = batch.y.row(r);
        std::copy(x.begin(), x.end(), dst.begin());
        std::copy(y.begin(), y.end(), dst.begin() + x.size());
    }
    return out;
}

struct BoundParts {
    double mean_joint = 0.0;
    double denom = 0.0; // mean of e^clamped(T) over the marginal batch
    Tensor t_joint, t_marginal;
};

BoundParts eval_parts(MineCritic& critic, const PairBatch& joint,
                      const PairBatch& marginal) {
    joint.validate();
    marginal.validate();
    if (joint.size() == 0 || marginal.size() == 0)
        throw std::invalid_argument("dv_bound: empty batch");
    BoundParts parts;
    parts.t_joint = critic.net.forward(concat_pairs(joint));
    for (std::size_t r = 0; r < parts.t_joint.rows(); ++r)
        parts.mean_joint += parts.t_joint.at(r, 0);
    parts.mean_joint /= static_cast<double>(parts.t_joint.rows());

    parts.t_marginal = critic.net.forward(concat_pairs(marginal));
    for (std::size_t r = 0; r < parts.t_marginal.rows(); ++r)
        parts.denom += std::exp(std::clamp(parts.t_marginal.at(r, 0), -kClamp, kClamp));
    parts.denom /= static_cast<double>(parts.t_marginal.rows());
    return parts;
}

Tensor joint_upstream(const Tensor& t_joint, double scale) {
    Tensor up(t_joint.rows(), 1);
    const double g = scale / static_cast<double>(t_joint.rows());
    for (std::size_t r = 0; r < up.rows(); ++r) up.at(r, 0) = g;
    return up;
}

Tensor marginal_upstream(const Tensor& t_marginal, double denom, double scale) {
    Tensor up(t_marginal.rows(), 1);
    const double bsz = static_cast<double>(t_marginal.rows());
    for (std::size_t r = 0; r < up.rows(); ++r) {
        const double t = t_marginal.at(r, 0);
        const double inside = (t > -kClamp && t < kClamp) ? 1.0 : 0.0;
        up.at(r, 0) = -scale * inside * std::exp(std::clamp(t, -kClamp, kClamp)) /
                      (bsz * denom);
    }
    return up;
}

} // namespace

void PairBatch::validate() const {
    if (x.rows() != y.rows())
        throw std::invalid_argument("PairBatch: x/y row counts differ");
    if (x.rank3() || y.rank3())
        throw std::invalid_argument("PairBatch: rank-3 tensors not supported");
}

MineCritic MineCritic::make(std::size_t dim_x, std::size_t dim_y,
                            const std::vector<std::size_t>& hidden, Rng& init) {
    std::vector<std::size_t> dims{dim_x + dim_y};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    std::vector<Activation> acts(dims.size() - 1, Activation::relu);
    acts.back() = Activation::identity;
    MineCritic critic;
    critic.net = MlpNetwork::make(dims, acts, init);
    return critic;
}

PairBatch make_marginal(const PairBatch& joint, Rng& rng) {
    joint.validate();
    const std::size_t n = joint.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    PairBatch marg;
    marg.x = joint.x;
    marg.y = Tensor(n, joint.y.cols());
    for (std::size_t r = 0; r < n; ++r) {
        auto src = joint.y.row(perm[r]);
        std::copy(src.begin(), src.end(), marg.y.row(r).begin());
    }
    return marg;
}

double dv_bound(MineCritic& critic, const PairBatch& joint, const PairBatch& marginal) {
    const BoundParts parts = eval_parts(critic, joint, marginal);
    return parts.mean_joint - std::log(parts.denom);
}

double mine_update(MineCritic& critic, const PairBatch& joint,
                   const PairBatch& marginal, double lr) {
    const BoundParts parts = eval_parts(critic, joint, marginal);
    const double bound = parts.mean_joint - std::log(parts.denom);
    if (!std::isfinite(bound)) {
        std::ostringstream os;
        os << "mine_update: bound diverged (mean_joint=" << parts.mean_joint
           << ", denom=" << parts.denom << ")";
        throw DivergenceError(os.str());
    }

    if (!critic.ema_ready) {
        critic.ema_denominator = parts.denom;
        critic.ema_ready = true;
    } else {
        critic.ema_denominator =
            critic.ema_rate * critic.ema_denominator +
            (1.0 - critic.ema_rate) * parts.denom;
    }

    // Gradient of -bound (Adam minimizes); the log-denominator term uses
    // the moving average to damp the small-batch bias of 1/denom.
    critic.net.zero_grads();
    critic.net.forward(concat_pairs(joint));
    critic.net.backward(joint_upstream(parts.t_joint, -1.0));
    critic.net.forward(concat_pairs(marginal));
    critic.net.backward(marginal_upstream(parts.t_marginal,
                                          critic.ema_denominator, -1.0));
    critic.net.adam_step(lr);
    return bound;
}

double dv_bound_with_input_grads(MineCritic& critic, const PairBatch& joint,
                                 const PairBatch& marginal, double scale,
                                 PairGrads& grads) {
    const BoundParts parts = eval_parts(critic, joint, marginal);
    const double bound = parts.mean_joint - std::log(parts.denom);

    const std::size_t dx = joint.x.cols();
    auto split_accumulate = [&](const Tensor& full, Tensor& gx, Tensor& gy) {
        if (!gx.same_shape(Tensor(full.rows(), dx)))
            throw std::invalid_argument("dv_bound_with_input_grads: grad shape mismatch");
        for (std::size_t r = 0; r < full.rows(); ++r) {
            auto src = full.row(r);
            auto dstx = gx.row(r);
            auto dsty = gy.row(r);
            for (std::size_t c = 0; c < dx; ++c) dstx[c] += src[c];
            for (std::size_t c = dx; c < full.cols(); ++c) dsty[c - dx] += src[c];
        }
    };

    critic.net.zero_grads();
    critic.net.forward(concat_pairs(joint));
    Tensor gin = critic.net.backward(joint_upstream(parts.t_joint, scale));
    split_accumulate(gin, grads.x_joint, grads.y_joint);
    critic.net.forward(concat_pairs(marginal));
    gin = critic.net.backward(marginal_upstream(parts.t_marginal, parts.denom, scale));
    split_accumulate(gin, grads.x_marginal, grads.y_marginal);
    critic.net.zero_grads();
    return bound;
}

MineTrainResult train_mine(MineCritic& critic, const PairSampler& sampler,
                           std::size_t steps, Rng& rng, double lr, std::size_t batch,
                           std::size_t eval_samples) {
    if (steps < 1) throw std::invalid_argument("train_mine: steps must be >= 1");
    MineTrainResult result;
    result.bound_trace.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        const PairBatch joint = sampler(batch, rng);
        const PairBatch marginal = make_marginal(joint, rng);
        result.bound_trace.push_back(mine_update(critic, joint, marginal, lr));
    }
    const PairBatch joint = sampler(eval_samples, rng);
    const PairBatch marginal = make_marginal(joint, rng);
    result.final_bound = dv_bound(critic, joint, marginal);
    return result;
}

double estimate_leakage(MineCritic& critic_mz, const Tensor& m_batch,
                        const Tensor& z_batch, std::size_t symbols_per_message,
                        Rng& rng) {
    if (m_batch.rows() != z_batch.rows() || m_batch.rows() == 0)
        throw std::invalid_argument("estimate_leakage: batches misaligned or empty");
    if (symbols_per_message == 0)
        throw std::invalid_argument("estimate_leakage: zero symbol count");
    PairBatch joint{m_batch, z_batch};
    const PairBatch marginal = make_marginal(joint, rng);
    const double nats = dv_bound(critic_mz, joint, marginal);
    return nats_to_bits(nats) / static_cast<double>(symbols_per_message);
}

PairBatch gaussian_pairs(std::size_t count, double rho, Rng& rng) {
    PairBatch batch{Tensor(count, 1), Tensor(count, 1)};
    const double ortho = std::sqrt(1.0 - rho * rho);
    for (std::size_t r = 0; r < count; ++r) {
        const double x = rng.gaussian();
        batch.x.at(r, 0) = x;
        batch.y.at(r, 0) = rho * x + ortho * rng.gaussian();
    }
    return batch;
}

} // namespace permsec
