#include <sparserl/generator.hpp>
#include <sparserl/ope.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace sparserl;

namespace {

// Three states, two actions, phi(x,a) = e_{(x+a) mod 3} padded with noise
// columns; psi_k is a point mass on state k, so transitions are deterministic.
SparseLinearMDP deterministic_mdp(Index extra, double gamma, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Index d = 3 + extra;
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(6, d);
    Eigen::MatrixXd r(3, 2);
    for (Index x = 0; x < 3; ++x)
        for (Index a = 0; a < 2; ++a) {
            f(x * 2 + a, (x + a) % 3) = 1.0;
            for (Index j = 3; j < d; ++j) f(x * 2 + a, j) = 2.0 * u(gen) - 1.0;
            r(x, a) = u(gen);
        }
    return SparseLinearMDP(3, 2, gamma, f, {0, 1, 2}, Eigen::MatrixXd::Identity(3, 3), r);
}

double exact_q_value(const Eigen::MatrixXd& q, const Policy& pi, const InitialDistribution& xi0) {
    return xi0.probs().dot((q.array() * pi.probs().array()).rowwise().sum().matrix());
}

}  // namespace

TEST(MonteCarlo, ConstantAndClipped) {
    Rng rng(1);
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(2, 2, 3.0);
    McEstimate e = monte_carlo_value(q, Policy::uniform(2, 2), InitialDistribution::uniform(2), 100, 10.0, rng);
    EXPECT_DOUBLE_EQ(e.estimate, 3.0);
    EXPECT_DOUBLE_EQ(e.std_error, 0.0);
    q.setConstant(100.0);
    EXPECT_DOUBLE_EQ(monte_carlo_value(q, Policy::uniform(2, 2), InitialDistribution::uniform(2), 10, 10.0, rng).estimate, 10.0);
    q.setConstant(-5.0);
    EXPECT_DOUBLE_EQ(monte_carlo_value(q, Policy::uniform(2, 2), InitialDistribution::uniform(2), 10, 10.0, rng).estimate, 0.0);
}

TEST(MonteCarlo, BernoulliMeanAndStandardError) {
    Rng rng(2);
    Eigen::MatrixXd q(2, 1);
    q << 0.0, 1.0;
    const Index m = 200000;
    McEstimate e = monte_carlo_value(q, Policy::uniform(2, 1), InitialDistribution::uniform(2), m, 10.0, rng);
    EXPECT_NEAR(e.estimate, 0.5, 5.0 * 0.5 / std::sqrt(static_cast<double>(m)));
    EXPECT_NEAR(e.std_error, 0.5 / std::sqrt(static_cast<double>(m)), 1e-5);
    EXPECT_THROW(monte_carlo_value(q, Policy::uniform(2, 1), InitialDistribution::uniform(2), 0, 10.0, rng),
                 std::invalid_argument);
}

TEST(LassoFqe, ZeroRewardsGiveZero) {
    SparseLinearMDP base = oracle::small_random_mdp(3, 4, 2, 6, 2, 0.9);
    SparseLinearMDP mdp(4, 2, 0.9, base.features(), base.support(), base.psi(), Eigen::MatrixXd::Zero(4, 2));
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(4, 2), InitialDistribution::uniform(4), 200, 1, 5);
    Rng rng(7);
    OpeResult r = lasso_fqe(data, split_folds(data, 10), access, Policy::uniform(4, 2),
                            InitialDistribution::uniform(4), OpeConfig{}, rng);
    EXPECT_EQ(r.value, 0.0);
    for (const auto& w : r.weights) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LassoFqe, SingleStateGeometricSeries) {
    // r = 1, gamma = 1/2, phi = 1: w_t = 2 - 2^{1-t}, Q = 1 + w_T / 2.
    SparseLinearMDP mdp(1, 1, 0.5, Eigen::MatrixXd::Ones(1, 1), {0}, Eigen::MatrixXd::Ones(1, 1),
                        Eigen::MatrixXd::Ones(1, 1));
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(1, 1), InitialDistribution::uniform(1), 10, 1, 0);
    OpeConfig cfg;
    cfg.lambda1 = 0.0;
    Rng rng(0);
    OpeResult r = lasso_fqe(data, split_folds(data, 10), access, Policy::uniform(1, 1),
                            InitialDistribution::uniform(1), cfg, rng);
    EXPECT_GE(r.value, 1.99);
    EXPECT_LE(r.value, 2.0);
    EXPECT_NEAR(r.value, 2.0 - std::pow(2.0, -10), 1e-12);
    ASSERT_EQ(r.weights.size(), 10u);
    for (int t = 1; t <= 10; ++t) EXPECT_NEAR(r.weights[t - 1](0), 2.0 - std::pow(2.0, 1 - t), 1e-12);
}

TEST(LassoFqe, MatchesExactBackupWithoutPenalty) {
    SparseLinearMDP mdp = deterministic_mdp(0, 0.9, 11);
    MdpAccess access(mdp);
    const int t_count = 25;
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 40 * t_count, 1, 3);
    Policy pi = Policy::deterministic({1, 0, 1}, 2);
    OpeConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lasso.tol = 1e-13;
    Rng rng(0);
    OpeResult r = lasso_fqe(data, split_folds(data, t_count), access, pi, InitialDistribution::point_mass(3, 0), cfg, rng);
    std::vector<Eigen::VectorXd> ref = oracle::exact_backup_fqe(mdp, pi, t_count);
    Eigen::MatrixXd phi_pi = policy_features(access, pi);
    Eigen::VectorXd r_pi = policy_reward(access, pi);
    for (int t = 0; t < t_count; ++t) {
        Eigen::VectorXd v = r_pi + 0.9 * phi_pi * r.weights[static_cast<std::size_t>(t)];
        EXPECT_LE((v - ref[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff(), 1e-9) << "t=" << t;
    }
    // Point mass xi0 and deterministic pi: the MC average is exact.
    EXPECT_NEAR(r.value, ref.back()(0), 1e-9);
}

TEST(LassoFqe, FoldCountMustMatchIterations) {
    SparseLinearMDP mdp = deterministic_mdp(1, 0.9, 1);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 40, 1, 3);
    OpeConfig cfg;
    cfg.iterations = 5;
    Rng rng(0);
    EXPECT_THROW(lasso_fqe(data, split_folds(data, 4), access, Policy::uniform(3, 2), InitialDistribution::uniform(3),
                           cfg, rng),
                 std::invalid_argument);
    EXPECT_THROW(lasso_fqe(data, split_folds(data, 4), access, Policy::uniform(2, 2), InitialDistribution::uniform(3),
                           OpeConfig{}, rng),
                 std::invalid_argument);
}

TEST(LassoFqe, DeterministicGivenSeeds) {
    SparseLinearMDP mdp = oracle::small_random_mdp(5, 6, 2, 10, 2, 0.8);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(6, 2), InitialDistribution::uniform(6), 300, 2, 9);
    OpeConfig cfg;
    cfg.lambda1 = 0.01;
    Rng a(42), b(42);
    OpeResult ra = lasso_fqe(data, split_folds(data, 10), access, Policy::uniform(6, 2), InitialDistribution::uniform(6), cfg, a);
    OpeResult rb = lasso_fqe(data, split_folds(data, 10), access, Policy::uniform(6, 2), InitialDistribution::uniform(6), cfg, b);
    EXPECT_EQ(ra.value, rb.value);
    EXPECT_EQ(ra.final_weights(), rb.final_weights());
    EXPECT_EQ(ra.mc_samples, data.size());
}

TEST(LassoFqe, DefaultLambdaIsFormula) {
    SparseLinearMDP mdp = oracle::small_random_mdp(6, 4, 2, 8, 2, 0.9);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(4, 2), InitialDistribution::uniform(4), 500, 1, 1);
    Rng rng(0);
    OpeResult r = lasso_fqe(data, split_folds(data, 5), access, Policy::uniform(4, 2), InitialDistribution::uniform(4),
                            OpeConfig{}, rng);
    EXPECT_DOUBLE_EQ(r.lambda1, default_lambda1(500, 5, 8, 0.9, 0.1));
}

TEST(LassoFqe, SmallDenseInstanceAccurate) {
    // d = s = 2, many samples, light penalty: median error over seeds stays small.
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        GeneratorSpec spec;
        spec.n_states = 5;
        spec.n_actions = 2;
        spec.d = 2;
        spec.s = 2;
        spec.gamma = 0.8;
        spec.seed = seed;
        SparseLinearMDP mdp = generate_mdp(spec);
        MdpAccess access(mdp);
        Policy pi = Policy::uniform(5, 2);
        InitialDistribution xi0 = InitialDistribution::uniform(5);
        BatchDataset data = collect(mdp, pi, xi0, 40000, 1, seed);
        OpeConfig cfg;
        cfg.lambda1 = 1e-4;
        Rng rng(seed, 99);
        OpeResult r = lasso_fqe(data, split_folds(data, 40), access, pi, xi0, cfg, rng);
        errs.push_back(std::abs(r.value - exact_policy_value(mdp, pi, xi0).value));
    }
    std::nth_element(errs.begin(), errs.begin() + 2, errs.end());
    EXPECT_LT(errs[2], 0.1);
}

TEST(RidgeFqe, ForcedSupportRecoversValue) {
    SparseLinearMDP mdp = deterministic_mdp(3, 0.9, 4);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 300, 1, 8);
    Policy pi = Policy::deterministic({0, 1, 1}, 2);
    OpeConfig cfg;
    cfg.lambda3 = 0.0;
    cfg.iterations = 200;
    Rng rng(0);
    OpeResult r = ridge_fqe(data, access, pi, InitialDistribution::point_mass(3, 2), mdp.support(), cfg, rng);
    double truth = exact_policy_value(mdp, pi, InitialDistribution::point_mass(3, 2)).value;
    EXPECT_NEAR(r.value, truth, 1e-6);
    // Same with every column: any superset of the support is realizable.
    OpeResult all = ridge_fqe(data, access, pi, InitialDistribution::point_mass(3, 2), {}, cfg, rng);
    EXPECT_EQ(all.selected.size(), 6u);
    EXPECT_NEAR(all.value, truth, 1e-6);
    // Averaging the exact Q table over a spread-out start gives the same agreement.
    Eigen::MatrixXd q = q_table(access, r.final_weights(), r.selected);
    InitialDistribution xi = InitialDistribution::uniform(3);
    EXPECT_NEAR(exact_q_value(q, pi, xi), exact_policy_value(mdp, pi, xi).value, 1e-6);
}

TEST(RidgeFqe, BadColumnsAndCapWarning) {
    SparseLinearMDP mdp = deterministic_mdp(0, 0.999, 4);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 30, 1, 8);
    Rng rng(0);
    EXPECT_THROW(ridge_fqe(data, access, Policy::uniform(3, 2), InitialDistribution::uniform(3), {7}, OpeConfig{}, rng),
                 std::invalid_argument);
    OpeConfig cfg;
    cfg.lambda3 = 0.0;
    OpeResult r = ridge_fqe(data, access, Policy::uniform(3, 2), InitialDistribution::uniform(3), {}, cfg, rng);
    EXPECT_EQ(r.iterations, 200);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(PostSelection, SelectsSupportAndRecovers) {
    SparseLinearMDP mdp = deterministic_mdp(3, 0.9, 5);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 600, 1, 2);
    Policy pi = Policy::deterministic({1, 1, 0}, 2);
    OpeConfig cfg;
    cfg.lambda2 = 1e-6;
    cfg.lambda3 = 0.0;
    cfg.iterations = 200;
    Rng rng(0);
    OpeResult r = post_selection_fqe(data, access, pi, InitialDistribution::point_mass(3, 1), cfg, rng);
    for (Index k : mdp.support()) EXPECT_NE(std::find(r.selected.begin(), r.selected.end(), k), r.selected.end());
    EXPECT_FALSE(r.degenerate);
    EXPECT_DOUBLE_EQ(r.lambda2, 1e-6);
    EXPECT_NEAR(r.value, exact_policy_value(mdp, pi, InitialDistribution::point_mass(3, 1)).value, 1e-6);
}

TEST(PostSelection, EmptySelectionFallsBackToReward) {
    SparseLinearMDP mdp = deterministic_mdp(2, 0.9, 6);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(3, 2), InitialDistribution::uniform(3), 100, 1, 2);
    Policy pi = Policy::deterministic({0, 0, 1}, 2);
    OpeConfig cfg;
    cfg.lambda2 = 1e6;
    Rng rng(0);
    OpeResult r = post_selection_fqe(data, access, pi, InitialDistribution::point_mass(3, 2), cfg, rng);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(r.selected.empty());
    EXPECT_NEAR(r.value, mdp.reward(2, 1), 1e-12);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(PostSelection, DefaultLambda2IsFormula) {
    SparseLinearMDP mdp = oracle::small_random_mdp(8, 5, 2, 6, 2, 0.9);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(5, 2), InitialDistribution::uniform(5), 400, 1, 2);
    Rng rng(0);
    OpeConfig cfg;
    cfg.lambda3 = 0.0;
    OpeResult r = post_selection_fqe(data, access, Policy::uniform(5, 2), InitialDistribution::uniform(5), cfg, rng);
    EXPECT_DOUBLE_EQ(r.lambda2, default_lambda2(400, 6, 0.1));
}

TEST(LassoFqe, SingleStateNearCap) {
    SparseLinearMDP mdp(1, 1, 0.5, Eigen::MatrixXd::Ones(1, 1), {0}, Eigen::MatrixXd::Ones(1, 1),
                        Eigen::MatrixXd::Ones(1, 1));
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(1, 1), InitialDistribution::uniform(1), 6000, 1, 0);
    OpeConfig cfg;
    cfg.lambda1 = 1e-6;
    Rng rng(0);
    OpeResult r = lasso_fqe(data, split_folds(data, 60), access, Policy::uniform(1, 1),
                            InitialDistribution::uniform(1), cfg, rng);
    EXPECT_GE(r.value, 1.99);
    EXPECT_LE(r.value, 2.0);
}

TEST(LassoFqe, ClippedValueFunctionViewAgrees) {
    // Regress the clipped previous value function on raw per-transition rows
    // and compare with the count-based implementation. Few samples and a high
    // discount make the unclipped iterates leave the value range.
    GeneratorSpec spec;
    spec.n_states = 6;
    spec.n_actions = 2;
    spec.d = 10;
    spec.s = 3;
    spec.gamma = 0.95;
    spec.seed = 2;
    SparseLinearMDP mdp = generate_mdp(spec);
    MdpAccess access(mdp);
    Policy pi = Policy::uniform(6, 2);
    InitialDistribution xi0 = InitialDistribution::uniform(6);
    BatchDataset data = collect(mdp, pi, xi0, 48, 1, 4);
    FoldSplit folds = split_folds(data, 12);
    OpeConfig cfg;
    cfg.lambda1 = 1e-3;
    cfg.lasso.tol = 1e-12;
    Rng rng(1);
    OpeResult r = lasso_fqe(data, folds, access, pi, xi0, cfg, rng);

    const double cap = 20.0;
    Eigen::MatrixXd phi_pi = policy_features(access, pi);
    Eigen::VectorXd r_pi = policy_reward(access, pi);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(10);
    bool clipped_somewhere = false;
    for (int t = 0; t < 12; ++t) {
        Eigen::VectorXd v = r_pi + 0.95 * phi_pi * w;
        clipped_somewhere |= v.maxCoeff() > cap || v.minCoeff() < 0.0;
        Eigen::VectorXd v_clip = v.cwiseMax(0.0).cwiseMin(cap);
        std::vector<Transition> tr = gather(data, folds.folds[static_cast<std::size_t>(t)]);
        RegressionProblem prob;
        prob.design.resize(static_cast<Index>(tr.size()), 10);
        prob.response.resize(static_cast<Index>(tr.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            prob.design.row(static_cast<Index>(i)) = mdp.feature(tr[i].x, tr[i].a);
            prob.response(static_cast<Index>(i)) = v_clip(tr[i].x_next);
        }
        prob.lambda = 1e-3;
        LassoOptions lo;
        lo.tol = 1e-12;
        lo.warm_start = &w;
        w = lasso(prob, lo).w;
        EXPECT_LE((w - r.weights[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff(), 1e-7) << "t=" << t;
    }
    EXPECT_TRUE(clipped_somewhere);
}
