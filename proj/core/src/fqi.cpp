#include "sparserl/fqi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparserl {

FqiResult lasso_fqi(const BatchDataset& dataset, const FoldSplit& folds, const MdpAccess& access,
                    const FqiConfig& config) {
    const int t_count = static_cast<int>(folds.num_folds());
    if (t_count < 1) throw std::invalid_argument("lasso_fqi: no folds");
    const double gamma = access.gamma();
    const double cap = access.value_cap();

    FqiResult out;
    out.iterations = t_count;
    out.lambda1 = config.lambda1.value_or(default_lambda1(static_cast<double>(dataset.size()), t_count,
                                                          static_cast<double>(access.dim()), gamma, config.delta));
    if (out.lambda1 < 0.0) throw std::invalid_argument("lasso_fqi: lambda1 must be >= 0");

    const Eigen::MatrixXd& phi = access.features();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(access.dim());
    for (int t = 0; t < t_count; ++t) {
        TransitionCounts counts = count_transitions(access, gather(dataset, folds.folds[static_cast<std::size_t>(t)]));
        Eigen::VectorXd y = q_table(access, w).rowwise().maxCoeff().cwiseMax(0.0).cwiseMin(cap);

        GramStats stats;
        const Index v = static_cast<Index>(counts.visited.size());
        Eigen::MatrixXd rows(v, phi.cols());
        stats.cross = Eigen::VectorXd::Zero(phi.cols());
        for (Index i = 0; i < v; ++i) {
            Index pair = counts.visited[static_cast<std::size_t>(i)];
            rows.row(i) = std::sqrt(counts.pair_weight(pair)) * phi.row(pair);
            stats.cross += counts.pair_next.row(pair).dot(y) * phi.row(pair).transpose();
        }
        stats.gram = rows.transpose() * rows;
        stats.yy = counts.next_weight.dot(y.cwiseAbs2());
        stats.n = counts.n;

        LassoOptions opts = config.lasso;
        opts.warm_start = &w;
        LassoResult fit = lasso(stats, out.lambda1, opts);
        if (!fit.report.converged) out.warnings.push_back("lasso did not converge at iteration " + std::to_string(t + 1));
        w = fit.w;
        out.weights.push_back(w);
        out.reports.push_back(fit.report);
    }
    out.actions = greedy_actions(q_table(access, w));
    out.policy = Policy::deterministic(out.actions, access.n_actions());
    return out;
}

Suboptimality policy_suboptimality(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                   double tol) {
    OptimalValue opt = exact_optimal_value(mdp, tol);
    PolicyValue val = exact_policy_value(mdp, pi, xi0);
    Eigen::VectorXd gap = opt.v - val.v;
    Suboptimality out;
    out.sup_gap = std::max(0.0, gap.maxCoeff());
    out.xi0_gap = std::max(0.0, xi0.probs().dot(gap));
    return out;
}

}  // namespace sparserl
