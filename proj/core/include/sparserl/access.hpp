#pragma once

#include "sparserl/mdp.hpp"

#include <vector>

namespace sparserl {

/**
 * What the learning algorithms may see of an MDP: features, the reward
 * black box and the discount. The kernel and psi are deliberately not
 * reachable through this view.
 */
class MdpAccess {
public:
    explicit MdpAccess(const SparseLinearMDP& mdp) : mdp_(&mdp) {}

    Index n_states() const { return mdp_->n_states(); }
    Index n_actions() const { return mdp_->n_actions(); }
    Index dim() const { return mdp_->dim(); }
    double gamma() const { return mdp_->gamma(); }
    double value_cap() const { return 1.0 / (1.0 - mdp_->gamma()); }

    Index pair_index(Index x, Index a) const { return mdp_->pair_index(x, a); }
    auto feature(Index x, Index a) const { return mdp_->feature(x, a); }
    const Eigen::MatrixXd& features() const { return mdp_->features(); }
    double reward(Index x, Index a) const { return mdp_->reward(x, a); }
    const Eigen::MatrixXd& reward() const { return mdp_->reward(); }

private:
    const SparseLinearMDP* mdp_;
};

/// phi^pi(x) = sum_a pi(a|x) phi(x,a), one row per state.
Eigen::MatrixXd policy_features(const MdpAccess& access, const Policy& pi);

/// r^pi(x) = sum_a pi(a|x) r(x,a).
Eigen::VectorXd policy_reward(const MdpAccess& access, const Policy& pi);

/// Q_w(x,a) = r(x,a) + gamma phi(x,a)_S^T w as an |X| x |A| table. An empty
/// `columns` means all d features; otherwise w is indexed like `columns`.
Eigen::MatrixXd q_table(const MdpAccess& access, const Eigen::VectorXd& w, const std::vector<Index>& columns = {});

}  // namespace sparserl
