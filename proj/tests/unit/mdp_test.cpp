#include <sparserl/hard_instance.hpp>
#include <sparserl/mdp.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sparserl;

namespace {

// One state, |A| actions, phi = (1), psi = (1): an absorbing state.
SparseLinearMDP absorbing(Eigen::RowVectorXd rewards, double gamma) {
    const Index na = rewards.size();
    return SparseLinearMDP(1, na, gamma, Eigen::MatrixXd::Ones(na, 1), {0}, Eigen::MatrixXd::Ones(1, 1),
                           Eigen::MatrixXd(rewards));
}

Policy random_policy(Index ns, Index na, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Eigen::MatrixXd p(ns, na);
    for (Index x = 0; x < ns; ++x) {
        for (Index a = 0; a < na; ++a) p(x, a) = u(gen);
        p.row(x) /= p.row(x).sum();
    }
    return Policy(p);
}

}  // namespace

TEST(TransitionProb, TwoStateChainReadsPsi) {
    Eigen::MatrixXd features(2, 2);
    features << 1, 0, 1, 0;
    Eigen::MatrixXd psi(1, 2);
    psi << 0.3, 0.7;
    SparseLinearMDP mdp(2, 1, 0.9, features, {0}, psi, Eigen::MatrixXd::Zero(2, 1));
    EXPECT_DOUBLE_EQ(mdp.transition_prob(0, 0, 0), 0.3);
    EXPECT_DOUBLE_EQ(mdp.transition_prob(1, 0, 1), 0.7);
    EXPECT_THROW(mdp.transition_prob(2, 0, 0), std::out_of_range);
    EXPECT_THROW(mdp.transition_prob(0, 1, 0), std::out_of_range);
}

TEST(TransitionProb, ZeroFeaturesOnSupportRejected) {
    Eigen::MatrixXd features(2, 2);
    features << 0, 1, 1, 0;
    Eigen::MatrixXd psi(1, 2);
    psi << 0.5, 0.5;
    EXPECT_THROW(SparseLinearMDP(2, 1, 0.9, features, {0}, psi, Eigen::MatrixXd::Zero(2, 1)), std::invalid_argument);
}

TEST(TransitionProb, RowSumOffByMoreThanToleranceRejected) {
    Eigen::MatrixXd psi(1, 2);
    psi << 0.5, 0.5 + 1e-7;
    EXPECT_THROW(SparseLinearMDP(2, 1, 0.9, Eigen::MatrixXd::Ones(2, 1), {0}, psi, Eigen::MatrixXd::Zero(2, 1)),
                 std::invalid_argument);
    psi << 0.5, 0.5 + 1e-10;
    EXPECT_NO_THROW(SparseLinearMDP(2, 1, 0.9, Eigen::MatrixXd::Ones(2, 1), {0}, psi, Eigen::MatrixXd::Zero(2, 1)));
}

TEST(TransitionProb, HardInstanceRowsSumToOne) {
    HardInstanceParams p;
    p.s = 2;
    p.d = 6;
    p.varsigma1 = 0.25;
    p.varsigma2 = 0.25;
    HardInstanceBundle b = build_hard_instance(p);
    for (Index x = 0; x < 2; ++x) {
        for (Index a = 0; a < b.mdp.n_actions(); ++a) {
            double sum = b.mdp.transition_prob(x, a, 0) + b.mdp.transition_prob(x, a, 1);
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(ExactPolicyValue, AbsorbingStateGeometricSeries) {
    SparseLinearMDP mdp = absorbing(Eigen::RowVectorXd::Ones(1), 0.9);
    PolicyValue v = exact_policy_value(mdp, Policy::uniform(1, 1), InitialDistribution::uniform(1));
    EXPECT_NEAR(v.value, 10.0, 1e-12);
}

TEST(ExactPolicyValue, ZeroRewardsGiveZero) {
    SparseLinearMDP base = oracle::small_random_mdp(3, 4, 2, 5, 2, 0.8);
    SparseLinearMDP mdp(4, 2, 0.8, base.features(), base.support(), base.psi(), Eigen::MatrixXd::Zero(4, 2));
    PolicyValue v = exact_policy_value(mdp, Policy::uniform(4, 2), InitialDistribution::uniform(4));
    EXPECT_EQ(v.v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ExactPolicyValue, MatchesPowerSeries) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SparseLinearMDP mdp = oracle::small_random_mdp(seed, 3, 2, 4, 2, 0.5);
        Policy pi = random_policy(3, 2, seed + 100);
        PolicyValue v = exact_policy_value(mdp, pi, InitialDistribution::uniform(3));
        Eigen::VectorXd series = oracle::value_power_series(mdp, pi, 60);
        EXPECT_LE((v.v - series).cwiseAbs().maxCoeff(), 1e-9) << "seed " << seed;
    }
}

TEST(ExactPolicyValue, BellmanResidualAndOrdering) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SparseLinearMDP mdp = oracle::small_random_mdp(seed, 6, 3, 8, 3, 0.9);
        Policy pi = random_policy(6, 3, seed);
        PolicyValue v = exact_policy_value(mdp, pi, InitialDistribution::uniform(6));
        Eigen::MatrixXd p = policy_kernel(mdp, pi);
        Eigen::VectorXd residual = v.v - mdp.gamma() * p * v.v - policy_reward(mdp, pi);
        EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-8);
        OptimalValue opt = exact_optimal_value(mdp, 1e-10);
        for (Index x = 0; x < 6; ++x) {
            EXPECT_GE(v.v(x), -1e-12);
            EXPECT_LE(v.v(x), opt.v(x) + 1e-9);
            EXPECT_LE(opt.v(x), 1.0 / (1.0 - mdp.gamma()) + 1e-9);
        }
    }
}

TEST(ExactOptimalValue, SingleStateTwoActions) {
    Eigen::RowVectorXd r(2);
    r << 1.0, 0.0;
    OptimalValue opt = exact_optimal_value(absorbing(r, 0.9), 1e-10);
    EXPECT_NEAR(opt.v(0), 10.0, 1e-9);
    EXPECT_EQ(opt.actions[0], 0);
}

TEST(ExactOptimalValue, TiesGoToLowestIndex) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Constant(3, 0.4);
    OptimalValue opt = exact_optimal_value(absorbing(r, 0.5), 1e-12);
    EXPECT_NEAR(opt.v(0), 0.8, 1e-11);
    EXPECT_EQ(opt.actions[0], 0);
    EXPECT_THROW(exact_optimal_value(absorbing(r, 0.5), 0.0), std::invalid_argument);
}

TEST(ExactOptimalValue, ToleranceIsHonoured) {
    SparseLinearMDP mdp = oracle::small_random_mdp(11, 5, 3, 6, 2, 0.95);
    OptimalValue loose = exact_optimal_value(mdp, 1e-4);
    OptimalValue tight = exact_optimal_value(mdp, 1e-12);
    EXPECT_LE((loose.v - tight.v).cwiseAbs().maxCoeff(), 1e-4);
    // The greedy policy of the tight solve attains v*.
    PolicyValue v = exact_policy_value(mdp, tight.greedy, InitialDistribution::uniform(5));
    EXPECT_LE((v.v - tight.v).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ExactOptimalValue, HardInstanceOptimalActionIsAi) {
    for (Index model : {1, 2}) {
        HardInstanceParams p;
        p.s = 4;
        p.d = 6;
        p.gamma = 0.75;
        p.model = model;
        p.delta1 = 0.2;   // <= (1-gamma)/gamma = 1/3
        p.delta2 = 0.1;   // <= varsigma2
        HardInstanceBundle b = build_hard_instance(p);
        OptimalValue opt = exact_optimal_value(b.mdp, 1e-12);
        EXPECT_EQ(opt.actions[0], hard_action(p.s, p.d, model));
    }
}

TEST(Occupancy, AbsorbingStateUnderDeterministicPolicy) {
    Eigen::RowVectorXd r(2);
    r << 1.0, 0.0;
    SparseLinearMDP mdp = absorbing(r, 0.9);
    OccupancyMeasure mu = occupancy_discounted(mdp, Policy::deterministic({0}, 2), InitialDistribution::uniform(1));
    EXPECT_NEAR(mu.mass(0, 0), 1.0, 1e-11);
    EXPECT_NEAR(mu.mass(0, 1), 0.0, 1e-15);
    OccupancyMeasure uni = occupancy_discounted(mdp, Policy::uniform(1, 2), InitialDistribution::uniform(1));
    EXPECT_NEAR(uni.mass(0, 0), 0.5, 1e-11);
    EXPECT_NEAR(uni.mass(0, 1), 0.5, 1e-11);
}

TEST(Occupancy, MatchesSeriesOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SparseLinearMDP mdp = oracle::small_random_mdp(seed, 2, 2, 3, 2, 0.9);
        Policy pi = random_policy(2, 2, seed);
        Eigen::Vector2d xi(0.3, 0.7);
        OccupancyMeasure mu = occupancy_discounted(mdp, pi, InitialDistribution(xi), 1e-12);
        Eigen::MatrixXd series = oracle::occupancy_series(mdp, pi, xi, 400);
        EXPECT_LE((mu.mass - series).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_NEAR(mu.mass.sum(), 1.0, 1e-10);
        EXPECT_GE(mu.mass.minCoeff(), 0.0);
    }
}

TEST(MeanEmbedding, DefiningIdentityPointwise) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SparseLinearMDP mdp = oracle::small_random_mdp(seed, 7, 3, 12, 3, 0.9);
        Policy pi = random_policy(7, 3, seed + 7);
        EmbeddingMatrix k = matrix_mean_embedding(mdp, pi);
        Eigen::MatrixXd phi_pi = policy_features(mdp, pi);
        Eigen::MatrixXd p = oracle::kernel_from_factors(mdp);
        Eigen::MatrixXd lhs = mdp.features() * k;
        Eigen::MatrixXd rhs = p * phi_pi;
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
        int nonzero_rows = 0;
        for (Index j = 0; j < k.rows(); ++j) nonzero_rows += k.row(j).cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
        EXPECT_LE(nonzero_rows, 3);
    }
}

TEST(MeanEmbedding, HandSummationTwoStates) {
    // K row 0 = 0.4 phi(x0) + 0.6 phi(x1) = 0.4 (1, 0.5) + 0.6 (1, -0.25) = (1, 0.05).
    Eigen::MatrixXd features(2, 2);
    features << 1.0, 0.5, 1.0, -0.25;
    Eigen::MatrixXd psi(1, 2);
    psi << 0.4, 0.6;
    SparseLinearMDP mdp(2, 1, 0.9, features, {0}, psi, Eigen::MatrixXd::Zero(2, 1));
    EmbeddingMatrix k = matrix_mean_embedding(mdp, Policy::uniform(2, 1));
    EXPECT_NEAR(k(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(k(0, 1), 0.05, 1e-15);
    EXPECT_EQ(k(1, 0), 0.0);
    EXPECT_EQ(k(1, 1), 0.0);
}

TEST(Proposition1, ValueFixedPointThroughEmbedding) {
    // g_w = P r^pi + gamma P g_w^pi: with w = sum_x' psi(x') v(x'), Q = r + gamma phi^T w reproduces q_from_values.
    SparseLinearMDP mdp = oracle::small_random_mdp(5, 5, 2, 6, 2, 0.8);
    Policy pi = random_policy(5, 2, 1);
    PolicyValue v = exact_policy_value(mdp, pi, InitialDistribution::uniform(5));
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mdp.dim());
    for (Index j = 0; j < mdp.sparsity(); ++j) w(mdp.support()[static_cast<std::size_t>(j)]) = mdp.psi().row(j).dot(v.v);
    Eigen::MatrixXd q = q_from_values(mdp, v.v);
    for (Index x = 0; x < 5; ++x) {
        for (Index a = 0; a < 2; ++a) {
            EXPECT_NEAR(q(x, a), mdp.reward(x, a) + mdp.gamma() * mdp.feature(x, a).dot(w), 1e-10);
        }
    }
}

TEST(Policy, InvalidRowsRejected) {
    Eigen::MatrixXd p(1, 2);
    p << 0.6, 0.6;
    EXPECT_THROW(Policy{p}, std::invalid_argument);
    p << -0.1, 1.1;
    EXPECT_THROW(Policy{p}, std::invalid_argument);
    Eigen::Vector2d xi(0.5, 0.6);
    EXPECT_THROW(InitialDistribution{xi}, std::invalid_argument);
}
