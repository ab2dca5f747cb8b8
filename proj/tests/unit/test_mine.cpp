#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "permsec/mine.hpp"

using namespace permsec;

namespace {

// Critic computing T(x,y) = c for every input.
MineCritic constant_critic(std::size_t dim_x, std::size_t dim_y, double c) {
    DenseLayer l;
    l.in = dim_x + dim_y;
    l.out = 1;
    l.w.assign(l.in, 0.0);
    l.b = {c};
    l.act = Activation::identity;
    MineCritic critic;
    critic.net = MlpNetwork({l});
    return critic;
}

} // namespace

TEST_CASE("dv_bound is exactly zero for a constant critic") {
    Rng rng(1);
    const PairBatch joint = gaussian_pairs(64, 0.5, rng);
    for (double c : {0.0, 1.7, -3.0}) {
        MineCritic critic = constant_critic(1, 1, c);
        // marginal equal to the joint batch
        CHECK(std::fabs(dv_bound(critic, joint, joint)) < 1e-12);
        const PairBatch marginal = make_marginal(joint, rng);
        CHECK(std::fabs(dv_bound(critic, joint, marginal)) < 1e-12);
    }
}

TEST_CASE("independent variables give a non-positive bound in expectation") {
    Rng rng(2);
    Rng init(3);
    MineCritic critic = MineCritic::make(1, 1, {16}, init);
    const PairBatch joint = gaussian_pairs(50000, 0.0, rng);
    const PairBatch marginal = make_marginal(joint, rng);
    CHECK(dv_bound(critic, joint, marginal) < 0.05);
}

TEST_CASE("trained critic approaches the closed-form Gaussian MI") {
    Rng init(4);
    MineCritic critic = MineCritic::make(1, 1, {32, 32}, init);
    Rng rng(5);
    const double rho = 0.5;
    const auto sampler = [rho](std::size_t batch, Rng& r) {
        return gaussian_pairs(batch, rho, r);
    };
    const MineTrainResult result =
        train_mine(critic, sampler, 1500, rng, 5e-4, 256, 50000);
    const double truth = oracle::gaussian_mi_nats(rho); // 0.1438 nats
    CHECK(result.final_bound == doctest::Approx(truth).epsilon(0.30));
    CHECK(result.bound_trace.size() == 1500);

    // lower bound: must not exceed the true MI by more than sampling error.
    // Standard error estimated by chunking a fresh evaluation sample.
    Rng eval(6);
    std::vector<double> chunk_bounds;
    for (int c = 0; c < 10; ++c) {
        const PairBatch joint = gaussian_pairs(10000, rho, eval);
        const PairBatch marginal = make_marginal(joint, eval);
        chunk_bounds.push_back(dv_bound(critic, joint, marginal));
    }
    double mean = 0.0;
    for (double b : chunk_bounds) mean += b;
    mean /= chunk_bounds.size();
    double var = 0.0;
    for (double b : chunk_bounds) var += (b - mean) * (b - mean);
    var /= (chunk_bounds.size() - 1);
    const double se = std::sqrt(var / chunk_bounds.size());
    CHECK(mean <= truth + 3.0 * se + 1e-3);
}

TEST_CASE("zero-correlation pairs train to a near-zero bound") {
    Rng init(7);
    MineCritic critic = MineCritic::make(1, 1, {32, 32}, init);
    Rng rng(8);
    const auto sampler = [](std::size_t batch, Rng& r) {
        return gaussian_pairs(batch, 0.0, r);
    };
    const MineTrainResult result =
        train_mine(critic, sampler, 800, rng, 5e-4, 256, 50000);
    CHECK(std::fabs(result.final_bound) < 0.05);
}

TEST_CASE("training is deterministic per seed") {
    auto run = [] {
        Rng init(9);
        MineCritic critic = MineCritic::make(1, 1, {16}, init);
        Rng rng(10);
        const auto sampler = [](std::size_t batch, Rng& r) {
            return gaussian_pairs(batch, 0.3, r);
        };
        return train_mine(critic, sampler, 50, rng, 5e-4, 64, 1000).bound_trace;
    };
    CHECK(run() == run());
}

TEST_CASE("estimate_leakage on known sources") {
    // Z independent of M: leakage near zero
    {
        Rng init(11);
        MineCritic critic = MineCritic::make(1, 1, {32}, init);
        Rng rng(12);
        const auto sampler = [](std::size_t batch, Rng& r) {
            PairBatch b{Tensor(batch, 1), Tensor(batch, 1)};
            for (std::size_t i = 0; i < batch; ++i) {
                b.x.at(i, 0) = static_cast<double>(r.below(4));
                b.y.at(i, 0) = r.gaussian();
            }
            return b;
        };
        train_mine(critic, sampler, 500, rng, 5e-4, 256, 1000);
        const PairBatch eval = sampler(20000, rng);
        Rng marg(13);
        const double bits = estimate_leakage(critic, eval.x, eval.y, 1, marg);
        CHECK(std::fabs(bits) < 0.05);
    }

    // Z = M exactly, M uniform over 4 values: I(M;Z) = 2 bits
    {
        Rng init(14);
        MineCritic critic = MineCritic::make(1, 1, {32, 32}, init);
        Rng rng(15);
        const auto sampler = [](std::size_t batch, Rng& r) {
            PairBatch b{Tensor(batch, 1), Tensor(batch, 1)};
            for (std::size_t i = 0; i < batch; ++i) {
                const double m = static_cast<double>(r.below(4));
                b.x.at(i, 0) = m;
                b.y.at(i, 0) = m;
            }
            return b;
        };
        train_mine(critic, sampler, 2500, rng, 1e-3, 256, 1000);
        const PairBatch eval = sampler(20000, rng);
        Rng marg(16);
        const double bits = estimate_leakage(critic, eval.x, eval.y, 1, marg);
        CHECK(bits > 1.5);
        CHECK(bits < 2.05);
        // normalization by the symbol count
        Rng marg2(16);
        const double per_symbol = estimate_leakage(critic, eval.x, eval.y, 4, marg2);
        CHECK(per_symbol == doctest::Approx(bits / 4.0).epsilon(1e-12));
    }

    MineCritic critic = constant_critic(1, 1, 0.0);
    Rng rng(17);
    CHECK_THROWS_AS(estimate_leakage(critic, Tensor(3, 1), Tensor(4, 1), 1, rng),
                    std::invalid_argument);
}

TEST_CASE("divergence aborts with diagnostics") {
    MineCritic critic = constant_critic(1, 1, std::numeric_limits<double>::quiet_NaN());
    Rng rng(18);
    const PairBatch joint = gaussian_pairs(16, 0.2, rng);
    const PairBatch marginal = make_marginal(joint, rng);
    CHECK_THROWS_AS(mine_update(critic, joint, marginal, 1e-4), DivergenceError);
}

TEST_CASE("input gradients from the bound pass a finite-difference probe") {
    Rng init(19);
    MineCritic critic = MineCritic::make(2, 2, {8}, init);
    Rng rng(20);
    PairBatch joint{Tensor(6, 2), Tensor(6, 2)};
    for (double& v : joint.x.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : joint.y.data()) v = rng.uniform(-1.0, 1.0);
    PairBatch marginal = make_marginal(joint, rng);

    PairGrads grads{Tensor(6, 2), Tensor(6, 2), Tensor(6, 2), Tensor(6, 2)};
    dv_bound_with_input_grads(critic, joint, marginal, 1.0, grads);

    const double eps = 1e-6;
    auto bound_at = [&](const PairBatch& j, const PairBatch& m) {
        return dv_bound(critic, j, m);
    };
    for (std::size_t probe = 0; probe < 6; ++probe) {
        PairBatch jp = joint;
        jp.x.data()[probe * 2] += eps;
        PairBatch jm = joint;
        jm.x.data()[probe * 2] -= eps;
        const double numeric = (bound_at(jp, marginal) - bound_at(jm, marginal)) /
                               (2 * eps);
        CHECK(grads.x_joint.at(probe, 0) == doctest::Approx(numeric).epsilon(1e-4));
    }
    for (std::size_t probe = 0; probe < 6; ++probe) {
        PairBatch mp = marginal;
        mp.y.data()[probe * 2 + 1] += eps;
        PairBatch mm = marginal;
        mm.y.data()[probe * 2 + 1] -= eps;
        const double numeric = (bound_at(joint, mp) - bound_at(joint, mm)) / (2 * eps);
        CHECK(grads.y_marginal.at(probe, 1) == doctest::Approx(numeric).epsilon(1e-4));
    }
}
