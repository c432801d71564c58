#include "sparserl/ope.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparserl {

namespace {

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<Index>& columns) {
    if (columns.empty()) return m;
    Eigen::MatrixXd out(m.rows(), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Index>(j)) = m.col(columns[j]);
    return out;
}

// Gram matrix (1/n) sum_n phi_S(x_n,a_n) phi_S(x_n,a_n)^T from aggregated counts.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& phi, const TransitionCounts& counts) {
    const Index v = static_cast<Index>(counts.visited.size());
    Eigen::MatrixXd rows(v, phi.cols());
    for (Index i = 0; i < v; ++i) {
        Index pair = counts.visited[static_cast<std::size_t>(i)];
        rows.row(i) = std::sqrt(counts.pair_weight(pair)) * phi.row(pair);
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(phi.cols(), phi.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
    return gram.selfadjointView<Eigen::Lower>();
}

// (1/n) sum_n phi_S(x_n,a_n) y(x'_n) for a target that depends only on x'.
Eigen::VectorXd weighted_cross(const Eigen::MatrixXd& phi, const TransitionCounts& counts, const Eigen::VectorXd& y) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(phi.cols());
    for (Index pair : counts.visited) out += counts.pair_next.row(pair).dot(y) * phi.row(pair).transpose();
    return out;
}

GramStats fold_stats(const Eigen::MatrixXd& phi, const TransitionCounts& counts, const Eigen::VectorXd& y) {
    GramStats s;
    s.gram = weighted_gram(phi, counts);
    s.cross = weighted_cross(phi, counts, y);
    s.yy = counts.next_weight.dot(y.cwiseAbs2());
    s.n = counts.n;
    return s;
}

void check_policy(const MdpAccess& access, const Policy& pi, const InitialDistribution& xi0) {
    if (pi.n_states() != access.n_states() || pi.n_actions() != access.n_actions()) {
        throw std::invalid_argument("target policy shape does not match MDP");
    }
    if (xi0.size() != access.n_states()) throw std::invalid_argument("initial distribution size mismatch");
}

}  // namespace

McEstimate monte_carlo_value(const Eigen::MatrixXd& q, const Policy& pi, const InitialDistribution& xi0, Index m,
                             double cap, Rng& rng) {
    if (m < 1) throw std::invalid_argument("monte_carlo_value: m must be >= 1");
    if (q.rows() != pi.n_states() || q.cols() != pi.n_actions() || xi0.size() != q.rows()) {
        throw std::invalid_argument("monte_carlo_value: shape mismatch");
    }
    double sum = 0.0;
    double sum_sq = 0.0;
    for (Index u = 0; u < m; ++u) {
        Index x = rng.categorical(xi0.probs());
        Index a = rng.categorical(pi.probs().row(x));
        double v = std::clamp(q(x, a), 0.0, cap);
        sum += v;
        sum_sq += v * v;
    }
    McEstimate out;
    const double md = static_cast<double>(m);
    out.estimate = sum / md;
    if (m > 1) {
        double var = std::max(0.0, (sum_sq - md * out.estimate * out.estimate) / (md - 1.0));
        out.std_error = std::sqrt(var / md);
    }
    return out;
}

McEstimate monte_carlo_value(const Eigen::VectorXd& w, const MdpAccess& access, const Policy& pi,
                             const InitialDistribution& xi0, Index m, Rng& rng) {
    return monte_carlo_value(q_table(access, w), pi, xi0, m, access.value_cap(), rng);
}

OpeResult lasso_fqe(const BatchDataset& dataset, const FoldSplit& folds, const MdpAccess& access, const Policy& pi,
                    const InitialDistribution& xi0, const OpeConfig& config, Rng& rng) {
    check_policy(access, pi, xi0);
    const int t_count = static_cast<int>(folds.num_folds());
    if (t_count < 1) throw std::invalid_argument("lasso_fqe: no folds");
    if (config.iterations && *config.iterations != t_count) {
        throw std::invalid_argument("lasso_fqe: T = " + std::to_string(*config.iterations) + " but the split has " +
                                    std::to_string(t_count) + " folds");
    }
    const double n = static_cast<double>(dataset.size());
    const double gamma = access.gamma();
    const double cap = access.value_cap();

    OpeResult out;
    out.iterations = t_count;
    out.lambda1 = config.lambda1.value_or(
        default_lambda1(n, t_count, static_cast<double>(access.dim()), gamma, config.delta));
    out.mc_samples = config.mc_samples.value_or(dataset.size());
    if (out.lambda1 < 0.0) throw std::invalid_argument("lasso_fqe: lambda1 must be >= 0");

    const Eigen::MatrixXd phi_pi = policy_features(access, pi);
    const Eigen::VectorXd r_pi = policy_reward(access, pi);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(access.dim());
    for (int t = 0; t < t_count; ++t) {
        TransitionCounts counts = count_transitions(access, gather(dataset, folds.folds[static_cast<std::size_t>(t)]));
        // Targets are V_{w_{t-1}}(x'), clipped to the value range.
        Eigen::VectorXd y = (r_pi + gamma * (phi_pi * w)).cwiseMax(0.0).cwiseMin(cap);
        LassoOptions opts = config.lasso;
        opts.warm_start = &w;
        LassoResult fit = lasso(fold_stats(access.features(), counts, y), out.lambda1, opts);
        if (!fit.report.converged) {
            out.warnings.push_back("lasso did not converge at iteration " + std::to_string(t + 1));
        }
        w = fit.w;
        out.weights.push_back(w);
        out.reports.push_back(fit.report);
    }
    McEstimate mc = monte_carlo_value(q_table(access, w), pi, xi0, out.mc_samples, cap, rng);
    out.value = mc.estimate;
    out.std_error = mc.std_error;
    return out;
}

OpeResult ridge_fqe(const BatchDataset& dataset, const MdpAccess& access, const Policy& pi,
                    const InitialDistribution& xi0, const std::vector<Index>& columns, const OpeConfig& config,
                    Rng& rng) {
    check_policy(access, pi, xi0);
    if (dataset.size() == 0) throw std::invalid_argument("ridge_fqe: empty dataset");
    for (Index c : columns) {
        if (c < 0 || c >= access.dim()) throw std::invalid_argument("ridge_fqe: feature index out of range");
    }
    const double n = static_cast<double>(dataset.size());
    const double gamma = access.gamma();
    const double cap = access.value_cap();

    OpeResult out;
    out.iterations = config.iterations.value_or(default_iterations(n, gamma).t);
    if (out.iterations < 1) throw std::invalid_argument("ridge_fqe: T must be >= 1");
    if (!config.iterations && default_iterations(n, gamma).capped) {
        out.warnings.push_back("iteration count capped at " + std::to_string(out.iterations));
    }
    out.mc_samples = config.mc_samples.value_or(dataset.size());
    out.selected = columns;
    if (columns.empty()) {
        for (Index j = 0; j < access.dim(); ++j) out.selected.push_back(j);
    }

    const Eigen::MatrixXd phi = select_columns(access.features(), out.selected);
    const TransitionCounts counts = count_transitions(access, gather(dataset));
    const Eigen::MatrixXd gram = weighted_gram(phi, counts);
    if (config.lambda3) {
        out.lambda3 = *config.lambda3;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        out.lambda3 = default_lambda3(eig.eigenvalues()(0), static_cast<double>(phi.cols()), config.delta,
                                      static_cast<double>(dataset.episode_length()));
    }
    RidgeSolver solver(gram, out.lambda3);
    if (solver.rank_deficient()) out.warnings.push_back("ridge system is rank deficient; using minimum-norm solution");

    const Eigen::MatrixXd phi_pi = select_columns(policy_features(access, pi), out.selected);
    const Eigen::VectorXd r_pi = policy_reward(access, pi);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(phi.cols());
    for (int t = 0; t < out.iterations; ++t) {
        // Target V_{w_{t-1}}(x'), not clipped.
        Eigen::VectorXd y = r_pi + gamma * (phi_pi * w);
        w = solver.solve(weighted_cross(phi, counts, y));
        out.weights.push_back(w);
        SolverReport rep;
        rep.iterations = 1;
        rep.converged = true;
        rep.rank_deficient = solver.rank_deficient();
        out.reports.push_back(rep);
    }
    McEstimate mc = monte_carlo_value(q_table(access, w, out.selected), pi, xi0, out.mc_samples, cap, rng);
    out.value = mc.estimate;
    out.std_error = mc.std_error;
    return out;
}

OpeResult post_selection_fqe(const BatchDataset& dataset, const MdpAccess& access, const Policy& pi,
                             const InitialDistribution& xi0, const OpeConfig& config, Rng& rng) {
    check_policy(access, pi, xi0);
    if (dataset.size() == 0) throw std::invalid_argument("post_selection_fqe: empty dataset");
    const double n = static_cast<double>(dataset.size());
    const double d = static_cast<double>(access.dim());
    const double lambda2 = config.lambda2.value_or(default_lambda2(n, d, config.delta));
    if (lambda2 < 0.0) throw std::invalid_argument("post_selection_fqe: lambda2 must be >= 0");

    // Stage 1: screening on the full dataset, response phi^pi(x').
    const TransitionCounts counts = count_transitions(access, gather(dataset));
    const Eigen::MatrixXd phi_pi = policy_features(access, pi);
    const Eigen::MatrixXd gram = weighted_gram(access.features(), counts);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(access.dim(), access.dim());
    for (Index pair : counts.visited) {
        cross.noalias() += access.features().row(pair).transpose() * (counts.pair_next.row(pair) * phi_pi);
    }
    GroupLassoResult screen = group_lasso_embedding(gram, cross, lambda2, config.group);

    OpeResult out;
    if (screen.selected.empty()) {
        out.iterations = config.iterations.value_or(default_iterations(n, access.gamma()).t);
        out.mc_samples = config.mc_samples.value_or(dataset.size());
        out.degenerate = true;
        out.warnings.push_back("no features selected; Q reduces to the reward");
        McEstimate mc = monte_carlo_value(access.reward(), pi, xi0, out.mc_samples, access.value_cap(), rng);
        out.value = mc.estimate;
        out.std_error = mc.std_error;
    } else {
        out = ridge_fqe(dataset, access, pi, xi0, screen.selected, config, rng);
    }
    out.lambda2 = lambda2;
    out.screening = screen.report;
    if (!screen.report.converged) out.warnings.push_back("group lasso did not converge");
    return out;
}

}  // namespace sparserl
