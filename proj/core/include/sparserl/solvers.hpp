#pragma once

#include "sparserl/mdp.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace sparserl {

struct SolverReport {
    int iterations = 0;
    double kkt_violation = 0.0;  // max over coordinates / rows
    bool converged = false;
    bool rank_deficient = false;  // ridge only

    std::string to_string() const;
};

struct RegressionProblem {
    Eigen::MatrixXd design;    // n x p
    Eigen::VectorXd response;  // n
    double lambda = 0.0;

    void validate() const;
};

struct GroupLassoProblem {
    Eigen::MatrixXd design;    // N x d, rows phi(x_n, a_n)
    Eigen::MatrixXd response;  // N x d, rows phi^pi(x'_n)
    double lambda2 = 0.0;

    void validate() const;
};

/**
 * Sufficient statistics of a least-squares loss (1/n)||y - Xw||^2:
 * gram = X^T X / n, cross = X^T y / n, yy = y^T y / n. The solvers work on
 * these so that repeated fits on the same design cost O(p^2) per sweep.
 */
struct GramStats {
    Eigen::MatrixXd gram;
    Eigen::VectorXd cross;
    double yy = 0.0;
    Index n = 0;

    static GramStats from(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
};

struct LassoOptions {
    double tol = 1e-9;
    int max_iter = 100000;  // full sweeps
    const Eigen::VectorXd* warm_start = nullptr;
    /// Called after every sweep with (sweep, objective).
    std::function<void(int, double)> on_sweep;
};

struct LassoResult {
    Eigen::VectorXd w;
    SolverReport report;
};

/// min_w (1/n)||y - Xw||^2 + lambda ||w||_1 by cyclic coordinate descent.
LassoResult lasso(const RegressionProblem& problem, const LassoOptions& options = {});
LassoResult lasso(const GramStats& stats, double lambda, const LassoOptions& options = {});

double lasso_objective(const GramStats& stats, double lambda, const Eigen::VectorXd& w);

/// Largest |(2/n) X_j^T (Xw - y) + lambda sign(w_j)| style violation.
double lasso_kkt_violation(const GramStats& stats, double lambda, const Eigen::VectorXd& w);

struct GroupLassoOptions {
    double tol = 1e-8;
    int max_iter = 20000;
    const Eigen::MatrixXd* warm_start = nullptr;
    /// Rows with norm <= zero_threshold * max row norm are treated as unselected.
    double zero_threshold = 1e-9;
};

struct GroupLassoResult {
    EmbeddingMatrix k;
    std::vector<Index> selected;  // increasing row indices
    SolverReport report;
};

/// min_K (1/(Nd)) sum_n ||Y_n - X_n K||^2 + lambda2 sum_j ||K_j.||_2, rows as groups.
GroupLassoResult group_lasso_embedding(const GroupLassoProblem& problem, const GroupLassoOptions& options = {});

/// Same problem from gram = X^T X / N and cross = X^T Y / N.
GroupLassoResult group_lasso_embedding(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross, double lambda2,
                                       const GroupLassoOptions& options = {});

double group_lasso_objective(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross, double yy, double lambda2,
                             const EmbeddingMatrix& k);

/**
 * Ridge solver factored once for a fixed design:
 * (X^T X / N + lambda3 I) w = X^T y / N. With lambda3 = 0 and a singular
 * Gram matrix the minimum-norm solution is returned and flagged.
 */
class RidgeSolver {
public:
    RidgeSolver(const Eigen::MatrixXd& gram, double lambda3);

    Eigen::VectorXd solve(const Eigen::VectorXd& cross) const;
    bool rank_deficient() const { return rank_deficient_; }
    Index dim() const { return dim_; }

private:
    Index dim_ = 0;
    bool rank_deficient_ = false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    Eigen::MatrixXd pinv_;
};

struct RidgeResult {
    Eigen::VectorXd w;
    SolverReport report;
};

RidgeResult ridge(const RegressionProblem& problem);

struct RestrictedEigenvalue {
    double lower = 0.0;  // lambda_min(Z)
    double upper = 0.0;  // best objective found on the cone
    bool exact = true;   // false when the search budget was exceeded
    std::vector<Index> argmin_support;
};

struct RestrictedEigenvalueOptions {
    int restarts = 64;
    int steps = 500;
    std::uint64_t seed = 0;
    long long max_supports = 100000;
    double work_budget = 2e9;  // supports * (restarts+1) * steps * d^2
};

/// Bracket [lower, upper] around C_min(Z, s).
RestrictedEigenvalue restricted_eigenvalue(const Eigen::MatrixXd& z, Index s,
                                           const RestrictedEigenvalueOptions& options = {});

double default_lambda1(double n, double t, double d, double gamma, double delta);
double default_lambda2(double n, double d, double delta);
/// lambda_min(Sigma) log(12 |K|/delta) L |K|.
double default_lambda3(double sigma_min, double k_hat_size, double delta, double length);

struct IterationCount {
    int t = 1;
    bool capped = false;
};

/// ceil(log(N/(1-gamma)) / (1-gamma)), capped at `cap`.
IterationCount default_iterations(double n, double gamma, int cap = 200);

struct SignalCheck {
    bool pass = false;
    double ratio = 0.0;  // signal / threshold
    double signal = 0.0;
    double threshold = 0.0;
};

/**
 * min_{j in K} ||K^pi_j.||_2 / sqrt(d) from the exact embedding, against
 * (64 sqrt(2) s / C_min) sqrt(2 log(2 d^2 / delta) / N).
 */
SignalCheck signal_strength_check(const SparseLinearMDP& mdp, const Policy& pi, double n, double delta,
                                  double c_min);

}  // namespace sparserl
