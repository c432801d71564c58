#pragma once

#include "sparserl/access.hpp"
#include "sparserl/batch_data.hpp"
#include "sparserl/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sparserl {

struct FqiConfig {
    std::optional<double> lambda1;
    double delta = 0.1;
    LassoOptions lasso;
};

struct FqiResult {
    std::vector<Eigen::VectorXd> weights;  // w_1..w_T
    std::vector<Index> actions;            // greedy action per state
    Policy policy;
    std::vector<SolverReport> reports;
    double lambda1 = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;

    const Eigen::VectorXd& final_weights() const { return weights.back(); }
};

/// Lasso-regularized fitted Q-iteration; one fold per iteration.
FqiResult lasso_fqi(const BatchDataset& dataset, const FoldSplit& folds, const MdpAccess& access,
                    const FqiConfig& config = {});

struct Suboptimality {
    double sup_gap = 0.0;  // ||v* - v^pi||_inf
    double xi0_gap = 0.0;  // xi0 . (v* - v^pi)
};

/// Gaps against exact value iteration; tiny negative round-off is clamped to 0.
Suboptimality policy_suboptimality(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                   double tol = 1e-10);

}  // namespace sparserl
