#pragma once

#include "sparserl/access.hpp"
#include "sparserl/batch_data.hpp"
#include "sparserl/solvers.hpp"

#include <vector>

namespace sparserl {

/// nu = E_{mu^pi}[phi_S(x,a)] under the discounted occupancy of pi from xi0.
Eigen::VectorXd occupancy_feature_mean(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                       const std::vector<Index>& columns);

/// Sigma restricted to rows/columns S.
Eigen::MatrixXd restrict(const Eigen::MatrixXd& sigma, const std::vector<Index>& columns);

/// nu^T Sigma^{-1} nu - 1. Throws std::domain_error when Sigma is singular or its
/// condition number exceeds 1e12, naming the deficient directions.
double chi_square_closed_form(const Eigen::VectorXd& nu, const Eigen::MatrixXd& sigma);

/// chi^2 of mu^pi against the exact behavior mixture mu-bar over the linear class on `columns`.
double restricted_chi_square(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                             const Policy& behavior, const InitialDistribution& data_init, Index length,
                             const std::vector<Index>& columns);

/// Same, with the empirical covariance of a dataset in place of the population one.
double restricted_chi_square_empirical(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                       const BatchDataset& dataset, const std::vector<Index>& columns);

struct SeriesResult {
    double value = 0.0;  // (1-gamma) sum_t gamma^t ||nu_t||_{Sigma^{-1}}
    int terms = 0;
    double tail_bound = 0.0;
};

/// Discounted series of per-step norms ||nu_t||_{Sigma_S^{-1}}, truncated once
/// gamma^t B / (1-gamma) <= horizon_tol with B = max_{x,a} ||phi_S(x,a)||_{Sigma_S^{-1}}.
SeriesResult divergence_series(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                               const Eigen::MatrixXd& sigma, const std::vector<Index>& columns,
                               double horizon_tol = 1e-10);

struct MismatchReport {
    double chi_square = 0.0;
    double series_value = 0.0;
    int series_terms = 0;
    RestrictedEigenvalue c_min;
    SignalCheck signal;
    std::vector<Index> feature_set;
};

struct AuditOptions {
    std::vector<Index> feature_set;  // empty: the true support
    double horizon_tol = 1e-10;
    RestrictedEigenvalueOptions re;
};

/// The signal check uses the upper end of the C_min bracket.
MismatchReport audit(const SparseLinearMDP& mdp, const Policy& behavior, const Policy& target,
                     const InitialDistribution& xi0, const InitialDistribution& data_init, Index length, double n,
                     double delta, const AuditOptions& options = {});

}  // namespace sparserl
