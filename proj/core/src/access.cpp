#include "sparserl/access.hpp"

#include <stdexcept>

namespace sparserl {

namespace {

void check_shape(const MdpAccess& access, const Policy& pi) {
    if (pi.n_states() != access.n_states() || pi.n_actions() != access.n_actions()) {
        throw std::invalid_argument("policy shape does not match MDP");
    }
}

}  // namespace

Eigen::MatrixXd policy_features(const MdpAccess& access, const Policy& pi) {
    check_shape(access, pi);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(access.n_states(), access.dim());
    for (Index x = 0; x < access.n_states(); ++x) {
        for (Index a = 0; a < access.n_actions(); ++a) {
            if (pi(x, a) != 0.0) out.row(x) += pi(x, a) * access.feature(x, a);
        }
    }
    return out;
}

Eigen::VectorXd policy_reward(const MdpAccess& access, const Policy& pi) {
    check_shape(access, pi);
    return pi.probs().cwiseProduct(access.reward()).rowwise().sum();
}

Eigen::MatrixXd q_table(const MdpAccess& access, const Eigen::VectorXd& w, const std::vector<Index>& columns) {
    const Index pairs = access.n_states() * access.n_actions();
    Eigen::VectorXd g(pairs);
    if (columns.empty()) {
        if (w.size() != access.dim()) throw std::invalid_argument("q_table: weight size must equal d");
        g = access.features() * w;
    } else {
        if (w.size() != static_cast<Index>(columns.size())) throw std::invalid_argument("q_table: weight size");
        g.setZero();
        for (std::size_t j = 0; j < columns.size(); ++j) g += w(static_cast<Index>(j)) * access.features().col(columns[j]);
    }
    Eigen::MatrixXd q(access.n_states(), access.n_actions());
    for (Index x = 0; x < access.n_states(); ++x) {
        for (Index a = 0; a < access.n_actions(); ++a) {
            q(x, a) = access.reward(x, a) + access.gamma() * g(access.pair_index(x, a));
        }
    }
    return q;
}

}  // namespace sparserl
