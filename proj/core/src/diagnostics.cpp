#include "sparserl/diagnostics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sparserl {

namespace {

constexpr double kMaxCondition = 1e12;

void check_columns(const std::vector<Index>& columns, Index d) {
    if (columns.empty()) throw std::invalid_argument("feature set must be nonempty");
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] < 0 || columns[j] >= d) throw std::invalid_argument("feature index out of range");
        if (j > 0 && columns[j] <= columns[j - 1]) throw std::invalid_argument("feature set must be increasing");
    }
}

// Inverse of a well-conditioned symmetric matrix via its eigen-decomposition.
Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (sigma + sigma.transpose()));
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double top = ev(ev.size() - 1);
    if (!(top > 0.0) || ev(0) <= top / kMaxCondition) {
        std::ostringstream msg;
        msg << "restricted covariance is singular or ill-conditioned (eigenvalues " << ev(0) << " .. " << top
            << "); deficient directions:";
        for (Index i = 0; i < ev.size(); ++i) {
            if (top > 0.0 && ev(i) > top / kMaxCondition) break;
            msg << " [";
            for (Index j = 0; j < ev.size(); ++j) {
                if (std::abs(eig.eigenvectors()(j, i)) > 1e-6) msg << " " << j << ":" << eig.eigenvectors()(j, i);
            }
            msg << " ]";
        }
        throw std::domain_error(msg.str());
    }
    return eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd pair_features(const SparseLinearMDP& mdp, const std::vector<Index>& columns) {
    Eigen::MatrixXd out(mdp.features().rows(), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Index>(j)) = mdp.features().col(columns[j]);
    return out;
}

Eigen::VectorXd mean_under(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& pair_mass) {
    const Index n_actions = pair_mass.cols();
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(phi.cols());
    for (Index i = 0; i < phi.rows(); ++i) {
        double m = pair_mass(i / n_actions, i % n_actions);
        if (m != 0.0) nu += m * phi.row(i).transpose();
    }
    return nu;
}

}  // namespace

Eigen::VectorXd occupancy_feature_mean(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                       const std::vector<Index>& columns) {
    check_columns(columns, mdp.dim());
    return mean_under(pair_features(mdp, columns), occupancy_discounted(mdp, pi, xi0).mass);
}

Eigen::MatrixXd restrict(const Eigen::MatrixXd& sigma, const std::vector<Index>& columns) {
    const Index k = static_cast<Index>(columns.size());
    Eigen::MatrixXd out(k, k);
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) out(i, j) = sigma(columns[static_cast<std::size_t>(i)], columns[static_cast<std::size_t>(j)]);
    }
    return out;
}

double chi_square_closed_form(const Eigen::VectorXd& nu, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != nu.size() || sigma.cols() != nu.size()) throw std::invalid_argument("chi_square: shape mismatch");
    return nu.dot(guarded_inverse(sigma) * nu) - 1.0;
}

double restricted_chi_square(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                             const Policy& behavior, const InitialDistribution& data_init, Index length,
                             const std::vector<Index>& columns) {
    check_columns(columns, mdp.dim());
    CovarianceMatrix sigma = population_covariance(mdp, behavior, data_init, length);
    return chi_square_closed_form(occupancy_feature_mean(mdp, pi, xi0, columns), restrict(sigma.sigma, columns));
}

double restricted_chi_square_empirical(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                                       const BatchDataset& dataset, const std::vector<Index>& columns) {
    check_columns(columns, mdp.dim());
    CovarianceMatrix sigma = empirical_covariance(MdpAccess(mdp), dataset);
    return chi_square_closed_form(occupancy_feature_mean(mdp, pi, xi0, columns), restrict(sigma.sigma, columns));
}

SeriesResult divergence_series(const SparseLinearMDP& mdp, const Policy& pi, const InitialDistribution& xi0,
                               const Eigen::MatrixXd& sigma, const std::vector<Index>& columns, double horizon_tol) {
    check_columns(columns, mdp.dim());
    if (!(horizon_tol > 0.0)) throw std::invalid_argument("divergence_series: horizon_tol must be positive");
    if (sigma.rows() != mdp.dim() || sigma.cols() != mdp.dim()) throw std::invalid_argument("divergence_series: Sigma must be d x d");
    if (xi0.size() != mdp.n_states() || !mdp.same_shape(pi)) throw std::invalid_argument("divergence_series: shape mismatch");

    const Eigen::MatrixXd inv = guarded_inverse(restrict(sigma, columns));
    const Eigen::MatrixXd phi = pair_features(mdp, columns);
    // nu_t is a convex combination of the rows of phi, so its norm is at most B.
    double bound = 0.0;
    for (Index i = 0; i < phi.rows(); ++i) {
        bound = std::max(bound, std::sqrt(std::max(0.0, phi.row(i).dot(inv * phi.row(i).transpose()))));
    }

    const double gamma = mdp.gamma();
    const Eigen::MatrixXd p_pi = policy_kernel(mdp, pi);
    Eigen::RowVectorXd state = xi0.probs().transpose();
    SeriesResult out;
    double discount = 1.0;
    while (discount * bound / (1.0 - gamma) > horizon_tol) {
        Eigen::MatrixXd mass = state.transpose().asDiagonal() * pi.probs();
        Eigen::VectorXd nu = mean_under(phi, mass);
        out.value += (1.0 - gamma) * discount * std::sqrt(std::max(0.0, nu.dot(inv * nu)));
        state = state * p_pi;
        discount *= gamma;
        ++out.terms;
        if (out.terms > 10'000'000) throw std::runtime_error("divergence_series: horizon too long");
    }
    out.tail_bound = discount * bound;
    return out;
}

MismatchReport audit(const SparseLinearMDP& mdp, const Policy& behavior, const Policy& target,
                     const InitialDistribution& xi0, const InitialDistribution& data_init, Index length, double n,
                     double delta, const AuditOptions& options) {
    MismatchReport out;
    out.feature_set = options.feature_set.empty() ? mdp.support() : options.feature_set;
    CovarianceMatrix sigma = population_covariance(mdp, behavior, data_init, length);
    out.chi_square = chi_square_closed_form(occupancy_feature_mean(mdp, target, xi0, out.feature_set),
                                            restrict(sigma.sigma, out.feature_set));
    SeriesResult series = divergence_series(mdp, target, xi0, sigma.sigma, out.feature_set, options.horizon_tol);
    out.series_value = series.value;
    out.series_terms = series.terms;
    out.c_min = restricted_eigenvalue(sigma.sigma, mdp.sparsity(), options.re);
    out.signal = signal_strength_check(mdp, target, n, delta, out.c_min.upper);
    return out;
}

}  // namespace sparserl
