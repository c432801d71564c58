#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace sparserl {

using Index = Eigen::Index;

/// Stationary stochastic policy, one row of action probabilities per state.
class Policy {
public:
    Policy() = default;
    explicit Policy(Eigen::MatrixXd probs);

    static Policy uniform(Index n_states, Index n_actions);
    /// Deterministic policy from one action index per state.
    static Policy deterministic(const std::vector<Index>& actions, Index n_actions);

    Index n_states() const { return probs_.rows(); }
    Index n_actions() const { return probs_.cols(); }
    double operator()(Index x, Index a) const { return probs_(x, a); }
    const Eigen::MatrixXd& probs() const { return probs_; }

private:
    Eigen::MatrixXd probs_;
};

/// Probability vector over states.
class InitialDistribution {
public:
    InitialDistribution() = default;
    explicit InitialDistribution(Eigen::VectorXd xi);

    static InitialDistribution uniform(Index n_states);
    static InitialDistribution point_mass(Index n_states, Index x);

    Index size() const { return xi_.size(); }
    double operator()(Index x) const { return xi_(x); }
    const Eigen::VectorXd& probs() const { return xi_; }

private:
    Eigen::VectorXd xi_;
};

/// Discounted occupancy over state-action pairs, |X| x |A|.
struct OccupancyMeasure {
    Eigen::MatrixXd mass;
    int horizon = 0;
};

/// d x d matrix with phi(x,a)^T K = E[phi^pi(x')^T | x, a].
using EmbeddingMatrix = Eigen::MatrixXd;

/**
 * Finite discounted MDP whose transition kernel factors through a sparse
 * subset of the features:
 *
 *     P(x'|x,a) = sum_{k in support} phi_k(x,a) psi_k(x').
 *
 * Features are stored as a (|X|*|A|) x d table with row x*|A| + a. psi is
 * s x |X| with row j belonging to support()[j]. The induced kernel is
 * materialised at construction and validated; the object is immutable.
 */
class SparseLinearMDP {
public:
    SparseLinearMDP(Index n_states, Index n_actions, double gamma,
                    Eigen::MatrixXd features, std::vector<Index> support,
                    Eigen::MatrixXd psi, Eigen::MatrixXd reward);

    Index n_states() const { return n_states_; }
    Index n_actions() const { return n_actions_; }
    Index dim() const { return features_.cols(); }
    Index sparsity() const { return static_cast<Index>(support_.size()); }
    double gamma() const { return gamma_; }

    Index pair_index(Index x, Index a) const { return x * n_actions_ + a; }
    auto feature(Index x, Index a) const { return features_.row(pair_index(x, a)); }
    const Eigen::MatrixXd& features() const { return features_; }
    const std::vector<Index>& support() const { return support_; }
    const Eigen::MatrixXd& psi() const { return psi_; }
    const Eigen::MatrixXd& reward() const { return reward_; }
    double reward(Index x, Index a) const { return reward_(x, a); }

    /// Induced kernel, row pair_index(x,a), column x'.
    const Eigen::MatrixXd& kernel() const { return kernel_; }

    /// Clamped to [0,1]. Throws std::out_of_range on bad indices.
    double transition_prob(Index x, Index a, Index x_next) const;

    bool same_shape(const Policy& pi) const {
        return pi.n_states() == n_states_ && pi.n_actions() == n_actions_;
    }

private:
    Index n_states_;
    Index n_actions_;
    double gamma_;
    Eigen::MatrixXd features_;
    std::vector<Index> support_;
    Eigen::MatrixXd psi_;
    Eigen::MatrixXd reward_;
    Eigen::MatrixXd kernel_;
};

/// State-level quantities induced by a policy.
Eigen::MatrixXd policy_kernel(const SparseLinearMDP& mdp, const Policy& pi);  // |X| x |X|
Eigen::VectorXd policy_reward(const SparseLinearMDP& mdp, const Policy& pi);  // r^pi
Eigen::MatrixXd policy_features(const SparseLinearMDP& mdp, const Policy& pi);  // |X| x d, phi^pi

struct PolicyValue {
    double value = 0.0;  // xi0 . v
    Eigen::VectorXd v;
};

/// Direct solve of (I - gamma P^pi) v = r^pi.
PolicyValue exact_policy_value(const SparseLinearMDP& mdp, const Policy& pi,
                               const InitialDistribution& xi0);

struct OptimalValue {
    Eigen::VectorXd v;
    Policy greedy;
    std::vector<Index> actions;
    int iterations = 0;
};

/// Value iteration; the returned v is within tol of v* in sup norm.
/// Greedy ties go to the lowest action index.
OptimalValue exact_optimal_value(const SparseLinearMDP& mdp, double tol = 1e-10);

/// Q(x,a) = r(x,a) + gamma * sum_x' P(x'|x,a) v(x'), shape |X| x |A|.
Eigen::MatrixXd q_from_values(const SparseLinearMDP& mdp, const Eigen::VectorXd& v);

/// Lowest-index argmax per row.
std::vector<Index> greedy_actions(const Eigen::MatrixXd& q);

/// Forward flow of the state-action distribution until the tail
/// gamma^H / (1 - gamma) drops below tol.
OccupancyMeasure occupancy_discounted(const SparseLinearMDP& mdp, const Policy& pi,
                                      const InitialDistribution& xi0, double tol = 1e-12);

/// Rows outside the support are exactly zero.
EmbeddingMatrix matrix_mean_embedding(const SparseLinearMDP& mdp, const Policy& pi);

}  // namespace sparserl
