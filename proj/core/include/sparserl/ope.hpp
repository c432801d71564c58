#pragma once

#include "sparserl/access.hpp"
#include "sparserl/batch_data.hpp"
#include "sparserl/rng.hpp"
#include "sparserl/solvers.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sparserl {

/// Unset fields fall back to the theory-driven defaults.
struct OpeConfig {
    std::optional<int> iterations;  // T
    std::optional<Index> mc_samples;  // m, default N
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<double> lambda3;
    double delta = 0.1;
    LassoOptions lasso;
    GroupLassoOptions group;
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

struct OpeResult {
    double value = 0.0;
    double std_error = 0.0;
    std::vector<Eigen::VectorXd> weights;  // w_1..w_T
    std::vector<Index> selected;           // post-selection only; columns of the weights
    std::vector<SolverReport> reports;
    SolverReport screening;
    bool degenerate = false;  // empty selected set, Q = r
    int iterations = 0;
    Index mc_samples = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    std::vector<std::string> warnings;

    const Eigen::VectorXd& final_weights() const { return weights.back(); }
};

/// Clipped sample mean of Q(x~, a~), x~ ~ xi0, a~ ~ pi(.|x~), with i.i.d. draws from rng.
McEstimate monte_carlo_value(const Eigen::MatrixXd& q, const Policy& pi, const InitialDistribution& xi0, Index m,
                             double cap, Rng& rng);

McEstimate monte_carlo_value(const Eigen::VectorXd& w, const MdpAccess& access, const Policy& pi,
                             const InitialDistribution& xi0, Index m, Rng& rng);

/// Lasso fitted Q-evaluation over episode-disjoint folds.
OpeResult lasso_fqe(const BatchDataset& dataset, const FoldSplit& folds, const MdpAccess& access, const Policy& pi,
                    const InitialDistribution& xi0, const OpeConfig& config, Rng& rng);

/// Group-lasso screening of the embedding on the full data, then ridge FQE on the selected features.
OpeResult post_selection_fqe(const BatchDataset& dataset, const MdpAccess& access, const Policy& pi,
                             const InitialDistribution& xi0, const OpeConfig& config, Rng& rng);

/// Ridge FQE on a fixed feature subset (all features when `columns` is empty), full data each iteration.
OpeResult ridge_fqe(const BatchDataset& dataset, const MdpAccess& access, const Policy& pi,
                    const InitialDistribution& xi0, const std::vector<Index>& columns, const OpeConfig& config,
                    Rng& rng);

}  // namespace sparserl
