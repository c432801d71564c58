#include "sparserl/batch_data.hpp"

#include "sparserl/rng.hpp"

#include <stdexcept>
#include <string>

namespace sparserl {

void BatchDataset::validate() const {
    if (static_cast<Index>(episodes.size()) != meta.episodes) {
        throw std::invalid_argument("dataset: episode count disagrees with meta");
    }
    for (const auto& ep : episodes) {
        if (static_cast<Index>(ep.size()) != meta.length) throw std::invalid_argument("dataset: ragged episodes");
    }
}

BatchDataset collect(const SparseLinearMDP& mdp, const std::vector<Policy>& behavior,
                     const InitialDistribution& initial, Index episodes, Index length, std::uint64_t seed,
                     std::string description) {
    if (behavior.empty()) throw std::invalid_argument("collect: empty behavior policy list");
    if (episodes < 1 || length < 1) throw std::invalid_argument("collect: K and L must be >= 1");
    if (static_cast<Index>(behavior.size()) != episodes) {
        throw std::invalid_argument("collect: need one behavior policy per episode");
    }
    if (initial.size() != mdp.n_states()) throw std::invalid_argument("collect: initial distribution size");
    for (const auto& pi : behavior) {
        if (!mdp.same_shape(pi)) throw std::invalid_argument("collect: behavior policy shape");
    }

    BatchDataset data;
    data.meta = DatasetMeta{episodes, length, seed, std::move(description)};
    data.episodes.resize(static_cast<std::size_t>(episodes));
    const Eigen::MatrixXd& kernel = mdp.kernel();
    for (Index k = 0; k < episodes; ++k) {
        Rng rng(seed, static_cast<std::uint64_t>(k));
        const Policy& pi = behavior[static_cast<std::size_t>(k)];
        auto& ep = data.episodes[static_cast<std::size_t>(k)];
        ep.reserve(static_cast<std::size_t>(length));
        Index x = rng.categorical(initial.probs());
        for (Index h = 0; h < length; ++h) {
            Index a = rng.categorical(pi.probs().row(x));
            Index next = rng.categorical(kernel.row(mdp.pair_index(x, a)));
            ep.push_back(Transition{x, a, next});
            x = next;
        }
    }
    return data;
}

BatchDataset collect(const SparseLinearMDP& mdp, const Policy& behavior, const InitialDistribution& initial,
                     Index episodes, Index length, std::uint64_t seed, std::string description) {
    if (episodes < 1) throw std::invalid_argument("collect: K and L must be >= 1");
    std::vector<Policy> repeated(static_cast<std::size_t>(episodes), behavior);
    return collect(mdp, repeated, initial, episodes, length, seed, std::move(description));
}

FoldSplit split_folds(const BatchDataset& dataset, Index folds) {
    if (folds < 1) throw std::invalid_argument("split_folds: T must be >= 1");
    const Index k = dataset.num_episodes();
    if (k < folds) {
        throw std::invalid_argument("split_folds: " + std::to_string(k) + " episodes cannot fill " +
                                    std::to_string(folds) + " folds");
    }
    FoldSplit split;
    split.episodes_per_fold = k / folds;
    split.folds.resize(static_cast<std::size_t>(folds));
    Index next = 0;
    for (auto& fold : split.folds) {
        for (Index r = 0; r < split.episodes_per_fold; ++r) fold.push_back(next++);
    }
    for (; next < k; ++next) split.leftover.push_back(next);
    return split;
}

std::vector<Transition> gather(const BatchDataset& dataset, const std::vector<Index>& episodes) {
    std::vector<Transition> out;
    out.reserve(episodes.size() * static_cast<std::size_t>(dataset.episode_length()));
    for (Index e : episodes) {
        const auto& ep = dataset.episodes.at(static_cast<std::size_t>(e));
        out.insert(out.end(), ep.begin(), ep.end());
    }
    return out;
}

std::vector<Transition> gather(const BatchDataset& dataset) {
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(dataset.size()));
    for (const auto& ep : dataset.episodes) out.insert(out.end(), ep.begin(), ep.end());
    return out;
}

Eigen::MatrixXd design_matrix(const MdpAccess& access, const std::vector<Transition>& transitions) {
    Eigen::MatrixXd x(static_cast<Index>(transitions.size()), access.dim());
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        x.row(static_cast<Index>(i)) = access.feature(transitions[i].x, transitions[i].a);
    }
    return x;
}

TransitionCounts count_transitions(const MdpAccess& access, const std::vector<Transition>& transitions) {
    if (transitions.empty()) throw std::invalid_argument("count_transitions: no transitions");
    const Index pairs = access.n_states() * access.n_actions();
    TransitionCounts c;
    c.n = static_cast<Index>(transitions.size());
    c.pair_weight = Eigen::VectorXd::Zero(pairs);
    c.pair_next = Eigen::MatrixXd::Zero(pairs, access.n_states());
    for (const auto& t : transitions) {
        Index i = access.pair_index(t.x, t.a);
        c.pair_weight(i) += 1.0;
        c.pair_next(i, t.x_next) += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(c.n);
    c.pair_weight *= inv;
    c.pair_next *= inv;
    c.next_weight = c.pair_next.colwise().sum().transpose();
    for (Index i = 0; i < pairs; ++i) {
        if (c.pair_weight(i) > 0.0) c.visited.push_back(i);
    }
    return c;
}

Eigen::MatrixXd second_moment(const Eigen::MatrixXd& features, const Eigen::MatrixXd& pair_mass) {
    // pair_mass is |X| x |A|; features rows follow x*|A| + a.
    const Index n_actions = pair_mass.cols();
    Eigen::VectorXd w(features.rows());
    for (Index i = 0; i < features.rows(); ++i) w(i) = pair_mass(i / n_actions, i % n_actions);
    Eigen::MatrixXd sigma = features.transpose() * w.asDiagonal() * features;
    return 0.5 * (sigma + sigma.transpose());
}

CovarianceMatrix empirical_covariance(const MdpAccess& access, const std::vector<Transition>& transitions) {
    if (transitions.empty()) throw std::invalid_argument("empirical_covariance: no transitions");
    // Aggregate visit counts first: |X||A| distinct rows at most.
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(access.n_states(), access.n_actions());
    for (const auto& t : transitions) counts(t.x, t.a) += 1.0;
    counts /= static_cast<double>(transitions.size());
    return CovarianceMatrix{second_moment(access.features(), counts), CovarianceKind::empirical};
}

CovarianceMatrix empirical_covariance(const MdpAccess& access, const BatchDataset& dataset) {
    return empirical_covariance(access, gather(dataset));
}

std::vector<Eigen::VectorXd> behavior_state_marginals(const SparseLinearMDP& mdp, const Policy& behavior,
                                                       const InitialDistribution& initial, Index length) {
    if (length < 1) throw std::invalid_argument("episode length must be >= 1");
    if (initial.size() != mdp.n_states()) throw std::invalid_argument("initial distribution size");
    Eigen::MatrixXd p = policy_kernel(mdp, behavior);
    std::vector<Eigen::VectorXd> marginals;
    marginals.reserve(static_cast<std::size_t>(length));
    Eigen::RowVectorXd rho = initial.probs().transpose();
    for (Index h = 0; h < length; ++h) {
        marginals.emplace_back(rho.transpose());
        rho = rho * p;
    }
    return marginals;
}

Eigen::MatrixXd behavior_occupancy(const SparseLinearMDP& mdp, const Policy& behavior,
                                   const InitialDistribution& initial, Index length) {
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(mdp.n_states());
    for (const auto& rho : behavior_state_marginals(mdp, behavior, initial, length)) avg += rho;
    avg /= static_cast<double>(length);
    return avg.asDiagonal() * behavior.probs();
}

CovarianceMatrix population_covariance(const SparseLinearMDP& mdp, const Policy& behavior,
                                       const InitialDistribution& initial, Index length) {
    return CovarianceMatrix{second_moment(mdp.features(), behavior_occupancy(mdp, behavior, initial, length)),
                            CovarianceKind::population};
}

}  // namespace sparserl
