#include <sparserl/batch_data.hpp>
#include <sparserl/generator.hpp>
#include <sparserl/solvers.hpp>

#include <gtest/gtest.h>

#include <algorithm>

using namespace sparserl;

TEST(Generator, HundredSeedsAreValidSparseMdps) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GeneratorSpec spec;
        spec.n_states = 2 + static_cast<Index>(seed % 7);
        spec.n_actions = 1 + static_cast<Index>(seed % 3);
        spec.d = 4 + static_cast<Index>(seed % 29);
        spec.s = 1 + static_cast<Index>(seed % 4);
        spec.seed = seed;
        SparseLinearMDP mdp = generate_mdp(spec);
        EXPECT_EQ(mdp.sparsity(), spec.s);
        EXPECT_TRUE(std::is_sorted(mdp.support().begin(), mdp.support().end()));
        EXPECT_LE((mdp.kernel().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_GE(mdp.kernel().minCoeff(), 0.0);
        EXPECT_GE(mdp.reward().minCoeff(), 0.0);
        EXPECT_LE(mdp.reward().maxCoeff(), 1.0);
        EXPECT_LE(mdp.features().cwiseAbs().maxCoeff(), 1.0);
        // Support features are simplex weights.
        for (Index i = 0; i < mdp.features().rows(); ++i) {
            double sum = 0.0;
            for (Index k : mdp.support()) sum += mdp.features()(i, k);
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(Generator, DynamicsIndependentOfAmbientDimension) {
    GeneratorSpec a;
    a.d = 8;
    a.seed = 4;
    GeneratorSpec b = a;
    b.d = 64;
    SparseLinearMDP ma = generate_mdp(a), mb = generate_mdp(b);
    EXPECT_EQ(ma.kernel(), mb.kernel());
    EXPECT_EQ(ma.reward(), mb.reward());
    EXPECT_EQ(ma.psi(), mb.psi());
}

TEST(Generator, SameSeedSameMdp) {
    GeneratorSpec spec;
    spec.seed = 11;
    SparseLinearMDP a = generate_mdp(spec), b = generate_mdp(spec);
    EXPECT_EQ(a.features(), b.features());
    EXPECT_EQ(a.support(), b.support());
    spec.seed = 12;
    EXPECT_NE(generate_mdp(spec).features(), a.features());
}

TEST(Generator, DenseAndContiguousCases) {
    GeneratorSpec spec;
    spec.d = 5;
    spec.s = 5;
    SparseLinearMDP full = generate_mdp(spec);
    EXPECT_EQ(full.support(), (std::vector<Index>{0, 1, 2, 3, 4}));
    spec.d = 20;
    spec.s = 3;
    spec.contiguous_support = true;
    EXPECT_EQ(generate_mdp(spec).support(), (std::vector<Index>{0, 1, 2}));
    spec.noise = 0.0;
    spec.contiguous_support = false;
    SparseLinearMDP quiet = generate_mdp(spec);
    for (Index j = 0; j < 20; ++j) {
        if (std::find(quiet.support().begin(), quiet.support().end(), j) == quiet.support().end()) {
            EXPECT_EQ(quiet.features().col(j).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Generator, InvalidSpecsRejected) {
    GeneratorSpec spec;
    spec.s = 40;
    EXPECT_THROW(generate_mdp(spec), std::invalid_argument);
    spec = GeneratorSpec{};
    spec.gamma = 1.0;
    EXPECT_THROW(generate_mdp(spec), std::invalid_argument);
    spec = GeneratorSpec{};
    spec.noise = 2.0;
    EXPECT_THROW(generate_mdp(spec), std::invalid_argument);
}

TEST(EpsilonGreedy, Probabilities) {
    Policy p = epsilon_greedy({1, 0}, 3, 0.3);
    EXPECT_NEAR(p(0, 1), 0.8, 1e-15);
    EXPECT_NEAR(p(0, 0), 0.1, 1e-15);
    EXPECT_NEAR(p(1, 0), 0.8, 1e-15);
    EXPECT_EQ(epsilon_greedy({2}, 3, 0.0).probs(), Policy::deterministic({2}, 3).probs());
    EXPECT_NEAR(epsilon_greedy({2}, 4, 1.0)(0, 2), 0.25, 1e-15);
    EXPECT_THROW(epsilon_greedy({3}, 3, 0.1), std::out_of_range);
    EXPECT_THROW(epsilon_greedy({0}, 3, 1.1), std::invalid_argument);
}

TEST(Generator, DenseInstanceLassoAndRidgeAgreeWithoutPenalty) {
    GeneratorSpec spec;
    spec.n_states = 6;
    spec.n_actions = 2;
    spec.d = 4;
    spec.s = 4;
    spec.seed = 8;
    SparseLinearMDP mdp = generate_mdp(spec);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(6, 2), InitialDistribution::uniform(6), 500, 1, 2);
    std::vector<Transition> tr = gather(data);
    RegressionProblem prob;
    prob.design = design_matrix(access, tr);
    prob.response.resize(static_cast<Index>(tr.size()));
    for (std::size_t i = 0; i < tr.size(); ++i) prob.response(static_cast<Index>(i)) = mdp.reward(tr[i].x_next, 0);
    prob.lambda = 0.0;
    LassoOptions opts;
    opts.tol = 1e-12;
    Eigen::VectorXd wl = lasso(prob, opts).w;
    Eigen::VectorXd wr = ridge(prob).w;
    EXPECT_LE((wl - wr).cwiseAbs().maxCoeff(), 1e-8);
}
