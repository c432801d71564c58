#pragma once

#include "sparserl/access.hpp"
#include "sparserl/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sparserl {

struct Transition {
    Index x = 0;
    Index a = 0;
    Index x_next = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMeta {
    Index episodes = 0;  // K
    Index length = 0;    // L
    std::uint64_t seed = 0;
    std::string behavior;
};

/// K episodes of L contiguous transitions each.
struct BatchDataset {
    std::vector<std::vector<Transition>> episodes;
    DatasetMeta meta;

    Index num_episodes() const { return static_cast<Index>(episodes.size()); }
    Index episode_length() const { return meta.length; }
    Index size() const { return num_episodes() * meta.length; }

    /// Throws if episodes are ragged or disagree with meta.
    void validate() const;
};

/// T disjoint runs of R = floor(K/T) episodes; the remaining K mod T are unused.
struct FoldSplit {
    std::vector<std::vector<Index>> folds;
    Index episodes_per_fold = 0;
    std::vector<Index> leftover;

    Index num_folds() const { return static_cast<Index>(folds.size()); }
};

enum class CovarianceKind { empirical, population };

struct CovarianceMatrix {
    Eigen::MatrixXd sigma;
    CovarianceKind kind = CovarianceKind::empirical;
};

/// Episode k uses its own stream (seed, k); x_{h+1} = x'_h.
BatchDataset collect(const SparseLinearMDP& mdp, const std::vector<Policy>& behavior,
                     const InitialDistribution& initial, Index episodes, Index length, std::uint64_t seed,
                     std::string description = {});

BatchDataset collect(const SparseLinearMDP& mdp, const Policy& behavior, const InitialDistribution& initial,
                     Index episodes, Index length, std::uint64_t seed, std::string description = {});

FoldSplit split_folds(const BatchDataset& dataset, Index folds);

/// Transitions of the listed episodes, in order.
std::vector<Transition> gather(const BatchDataset& dataset, const std::vector<Index>& episodes);
std::vector<Transition> gather(const BatchDataset& dataset);

/// Rows phi(x_n, a_n) of the given transitions.
Eigen::MatrixXd design_matrix(const MdpAccess& access, const std::vector<Transition>& transitions);

CovarianceMatrix empirical_covariance(const MdpAccess& access, const std::vector<Transition>& transitions);
CovarianceMatrix empirical_covariance(const MdpAccess& access, const BatchDataset& dataset);

/// Exact state marginals rho_0..rho_{L-1} of a behavior episode.
std::vector<Eigen::VectorXd> behavior_state_marginals(const SparseLinearMDP& mdp, const Policy& behavior,
                                                       const InitialDistribution& initial, Index length);

/// mu-bar: average over the L steps of the state-action marginal, |X| x |A|.
Eigen::MatrixXd behavior_occupancy(const SparseLinearMDP& mdp, const Policy& behavior,
                                   const InitialDistribution& initial, Index length);

/// Sigma = sum_{x,a} mu-bar(x,a) phi(x,a) phi(x,a)^T.
CovarianceMatrix population_covariance(const SparseLinearMDP& mdp, const Policy& behavior,
                                       const InitialDistribution& initial, Index length);

/**
 * Empirical transition frequencies of a set of transitions, normalised by
 * their count n: pair_weight(i) = #{n : (x_n,a_n) = i} / n and
 * pair_next(i, x') = #{n : (x_n,a_n) = i, x'_n = x'} / n. Every least-squares
 * statistic the fitted-Q algorithms need is a contraction of these.
 */
struct TransitionCounts {
    Eigen::VectorXd pair_weight;
    Eigen::MatrixXd pair_next;
    Eigen::VectorXd next_weight;  // column sums of pair_next
    std::vector<Index> visited;   // pairs with nonzero weight
    Index n = 0;
};

TransitionCounts count_transitions(const MdpAccess& access, const std::vector<Transition>& transitions);

/// Covariance of features under an arbitrary state-action distribution.
Eigen::MatrixXd second_moment(const Eigen::MatrixXd& features, const Eigen::MatrixXd& pair_mass);

}  // namespace sparserl
