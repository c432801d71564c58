#include "sparserl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sparserl {

namespace {

constexpr double kRowSumTol = 1e-8;
constexpr double kEntryTol = 1e-12;
constexpr double kDistributionTol = 1e-12;

void check_distribution_rows(const Eigen::MatrixXd& m, const char* what) {
    for (Index i = 0; i < m.rows(); ++i) {
        if ((m.row(i).array() < 0.0).any()) {
            throw std::invalid_argument(std::string(what) + ": negative probability in row " +
                                        std::to_string(i));
        }
        double sum = m.row(i).sum();
        if (std::abs(sum - 1.0) > kDistributionTol * std::max<double>(1.0, m.cols())) {
            std::ostringstream msg;
            msg << what << ": row " << i << " sums to " << sum;
            throw std::invalid_argument(msg.str());
        }
    }
}

}  // namespace

Policy::Policy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.rows() == 0 || probs_.cols() == 0) throw std::invalid_argument("Policy: empty table");
    check_distribution_rows(probs_, "Policy");
}

Policy Policy::uniform(Index n_states, Index n_actions) {
    return Policy(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
}

Policy Policy::deterministic(const std::vector<Index>& actions, Index n_actions) {
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Index>(actions.size()), n_actions);
    for (std::size_t x = 0; x < actions.size(); ++x) {
        if (actions[x] < 0 || actions[x] >= n_actions) throw std::out_of_range("Policy: action index");
        probs(static_cast<Index>(x), actions[x]) = 1.0;
    }
    return Policy(std::move(probs));
}

InitialDistribution::InitialDistribution(Eigen::VectorXd xi) : xi_(std::move(xi)) {
    if (xi_.size() == 0) throw std::invalid_argument("InitialDistribution: empty");
    check_distribution_rows(xi_.transpose(), "InitialDistribution");
}

InitialDistribution InitialDistribution::uniform(Index n_states) {
    return InitialDistribution(Eigen::VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states)));
}

InitialDistribution InitialDistribution::point_mass(Index n_states, Index x) {
    if (x < 0 || x >= n_states) throw std::out_of_range("InitialDistribution: state index");
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(n_states);
    xi(x) = 1.0;
    return InitialDistribution(std::move(xi));
}

SparseLinearMDP::SparseLinearMDP(Index n_states, Index n_actions, double gamma,
                                 Eigen::MatrixXd features, std::vector<Index> support,
                                 Eigen::MatrixXd psi, Eigen::MatrixXd reward)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      features_(std::move(features)),
      support_(std::move(support)),
      psi_(std::move(psi)),
      reward_(std::move(reward)) {
    if (n_states_ < 1 || n_actions_ < 1) throw std::invalid_argument("MDP: need at least one state and action");
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("MDP: gamma must lie in (0,1)");
    if (features_.rows() != n_states_ * n_actions_ || features_.cols() < 1) {
        throw std::invalid_argument("MDP: features must be (|X|*|A|) x d");
    }
    const Index d = features_.cols();
    if (support_.empty()) throw std::invalid_argument("MDP: support must be nonempty");
    for (std::size_t j = 0; j < support_.size(); ++j) {
        if (support_[j] < 0 || support_[j] >= d) throw std::invalid_argument("MDP: support index out of range");
        if (j > 0 && support_[j] <= support_[j - 1]) {
            throw std::invalid_argument("MDP: support must be strictly increasing");
        }
    }
    if (psi_.rows() != sparsity() || psi_.cols() != n_states_) throw std::invalid_argument("MDP: psi must be s x |X|");
    if (reward_.rows() != n_states_ || reward_.cols() != n_actions_) {
        throw std::invalid_argument("MDP: reward must be |X| x |A|");
    }
    if (!features_.allFinite() || !psi_.allFinite() || !reward_.allFinite()) {
        throw std::invalid_argument("MDP: non-finite entries");
    }
    if (features_.cwiseAbs().maxCoeff() > 1.0 + kEntryTol) throw std::invalid_argument("MDP: |phi| must be <= 1");
    if (reward_.minCoeff() < 0.0 || reward_.maxCoeff() > 1.0) throw std::invalid_argument("MDP: reward outside [0,1]");

    Eigen::MatrixXd phi_support(features_.rows(), sparsity());
    for (Index j = 0; j < sparsity(); ++j) phi_support.col(j) = features_.col(support_[static_cast<std::size_t>(j)]);
    kernel_ = phi_support * psi_;

    for (Index i = 0; i < kernel_.rows(); ++i) {
        double sum = kernel_.row(i).sum();
        if (std::abs(sum - 1.0) > kRowSumTol) {
            std::ostringstream msg;
            msg << "MDP: transition row (x=" << i / n_actions_ << ", a=" << i % n_actions_ << ") sums to " << sum;
            throw std::invalid_argument(msg.str());
        }
        if (kernel_.row(i).minCoeff() < -kEntryTol || kernel_.row(i).maxCoeff() > 1.0 + kEntryTol) {
            std::ostringstream msg;
            msg << "MDP: transition probability outside [0,1] at (x=" << i / n_actions_ << ", a=" << i % n_actions_
                << ")";
            throw std::invalid_argument(msg.str());
        }
    }
    kernel_ = kernel_.cwiseMax(0.0).cwiseMin(1.0);
}

double SparseLinearMDP::transition_prob(Index x, Index a, Index x_next) const {
    if (x < 0 || x >= n_states_ || a < 0 || a >= n_actions_ || x_next < 0 || x_next >= n_states_) {
        throw std::out_of_range("transition_prob: index out of range");
    }
    return kernel_(pair_index(x, a), x_next);
}

Eigen::MatrixXd policy_kernel(const SparseLinearMDP& mdp, const Policy& pi) {
    if (!mdp.same_shape(pi)) throw std::invalid_argument("policy shape does not match MDP");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.n_states());
    for (Index x = 0; x < mdp.n_states(); ++x) {
        for (Index a = 0; a < mdp.n_actions(); ++a) {
            if (pi(x, a) != 0.0) p.row(x) += pi(x, a) * mdp.kernel().row(mdp.pair_index(x, a));
        }
    }
    return p;
}

Eigen::VectorXd policy_reward(const SparseLinearMDP& mdp, const Policy& pi) {
    if (!mdp.same_shape(pi)) throw std::invalid_argument("policy shape does not match MDP");
    return pi.probs().cwiseProduct(mdp.reward()).rowwise().sum();
}

Eigen::MatrixXd policy_features(const SparseLinearMDP& mdp, const Policy& pi) {
    if (!mdp.same_shape(pi)) throw std::invalid_argument("policy shape does not match MDP");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.dim());
    for (Index x = 0; x < mdp.n_states(); ++x) {
        for (Index a = 0; a < mdp.n_actions(); ++a) {
            if (pi(x, a) != 0.0) out.row(x) += pi(x, a) * mdp.feature(x, a);
        }
    }
    return out;
}

PolicyValue exact_policy_value(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0) {
    if (xi0.size() != mdp.n_states()) throw std::invalid_argument("initial distribution size mismatch");
    const Index n = mdp.n_states();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * policy_kernel(mdp, pi);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    PolicyValue out;
    out.v = lu.solve(policy_reward(mdp, pi));
    if (!out.v.allFinite()) throw std::runtime_error("exact_policy_value: linear solve failed");
    out.value = xi0.probs().dot(out.v);
    return out;
}

Eigen::MatrixXd q_from_values(const SparseLinearMDP& mdp, const Eigen::VectorXd& v) {
    Eigen::VectorXd pv = mdp.kernel() * v;
    Eigen::MatrixXd q(mdp.n_states(), mdp.n_actions());
    for (Index x = 0; x < mdp.n_states(); ++x) {
        for (Index a = 0; a < mdp.n_actions(); ++a) {
            q(x, a) = mdp.reward(x, a) + mdp.gamma() * pv(mdp.pair_index(x, a));
        }
    }
    return q;
}

std::vector<Index> greedy_actions(const Eigen::MatrixXd& q) {
    std::vector<Index> actions(static_cast<std::size_t>(q.rows()), 0);
    for (Index x = 0; x < q.rows(); ++x) {
        double best = q.row(x).maxCoeff();
        double slack = 1e-12 * std::max(1.0, std::abs(best));
        for (Index a = 0; a < q.cols(); ++a) {
            if (q(x, a) >= best - slack) {
                actions[static_cast<std::size_t>(x)] = a;
                break;
            }
        }
    }
    return actions;
}

OptimalValue exact_optimal_value(const SparseLinearMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("exact_optimal_value: tol must be positive");
    const double gamma = mdp.gamma();
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states());
    OptimalValue out;
    for (int it = 1;; ++it) {
        Eigen::VectorXd next = q_from_values(mdp, v).rowwise().maxCoeff();
        double residual = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        if (residual <= stop) {
            out.iterations = it;
            break;
        }
        if (it > 10'000'000) throw std::runtime_error("exact_optimal_value: no convergence");
    }
    out.v = v;
    out.actions = greedy_actions(q_from_values(mdp, v));
    out.greedy = Policy::deterministic(out.actions, mdp.n_actions());
    return out;
}

OccupancyMeasure occupancy_discounted(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                      double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("occupancy_discounted: tol must be positive");
    if (xi0.size() != mdp.n_states()) throw std::invalid_argument("initial distribution size mismatch");
    const double gamma = mdp.gamma();
    Eigen::MatrixXd p_pi = policy_kernel(mdp, pi);
    Eigen::RowVectorXd state = xi0.probs().transpose();
    OccupancyMeasure out;
    out.mass = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.n_actions());
    double weight = 1.0 - gamma;
    double discount = 1.0;
    int h = 0;
    while (discount / (1.0 - gamma) > tol) {
        out.mass += weight * (state.transpose().asDiagonal() * pi.probs());
        state = state * p_pi;
        weight *= gamma;
        discount *= gamma;
        ++h;
    }
    out.horizon = h;
    return out;
}

EmbeddingMatrix matrix_mean_embedding(const SparseLinearMDP& mdp, const Policy& pi) {
    Eigen::MatrixXd phi_pi = policy_features(mdp, pi);
    EmbeddingMatrix k = EmbeddingMatrix::Zero(mdp.dim(), mdp.dim());
    for (Index j = 0; j < mdp.sparsity(); ++j) {
        k.row(mdp.support()[static_cast<std::size_t>(j)]) = mdp.psi().row(j) * phi_pi;
    }
    return k;
}

}  // namespace sparserl
