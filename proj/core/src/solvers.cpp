#include "sparserl/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sparserl {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace

std::string SolverReport::to_string() const {
    std::ostringstream out;
    out << "iterations=" << iterations << " kkt=" << kkt_violation << " converged=" << (converged ? 1 : 0);
    if (rank_deficient) out << " rank_deficient=1";
    return out.str();
}

void RegressionProblem::validate() const {
    if (design.rows() != response.size()) throw std::invalid_argument("regression: design/response rows differ");
    if (design.rows() == 0 || design.cols() == 0) throw std::invalid_argument("regression: empty design");
    if (!(lambda >= 0.0)) throw std::invalid_argument("regression: lambda must be >= 0");
}

void GroupLassoProblem::validate() const {
    if (design.rows() != response.rows()) throw std::invalid_argument("group lasso: design/response rows differ");
    if (design.rows() == 0 || design.cols() == 0) throw std::invalid_argument("group lasso: empty design");
    if (response.cols() != design.cols()) throw std::invalid_argument("group lasso: response must be N x d");
    if (!(lambda2 >= 0.0)) throw std::invalid_argument("group lasso: lambda2 must be >= 0");
}

GramStats GramStats::from(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size() || x.rows() == 0) throw std::invalid_argument("GramStats: bad dimensions");
    const double n = static_cast<double>(x.rows());
    GramStats s;
    s.gram = Eigen::MatrixXd(x.cols(), x.cols());
    s.gram.setZero();
    s.gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / n);
    s.gram = s.gram.selfadjointView<Eigen::Lower>();
    s.cross = x.transpose() * y / n;
    s.yy = y.squaredNorm() / n;
    s.n = x.rows();
    return s;
}

double lasso_objective(const GramStats& stats, double lambda, const Eigen::VectorXd& w) {
    double loss = stats.yy - 2.0 * stats.cross.dot(w) + w.dot(stats.gram * w);
    return std::max(loss, 0.0) + lambda * w.lpNorm<1>();
}

namespace {

double kkt_from_gradient(const Eigen::VectorXd& grad, const Eigen::VectorXd& w, double lambda) {
    double worst = 0.0;
    for (Index j = 0; j < w.size(); ++j) {
        double v = w(j) == 0.0 ? std::max(0.0, std::abs(grad(j)) - lambda)
                               : std::abs(grad(j) + lambda * (w(j) > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace

double lasso_kkt_violation(const GramStats& stats, double lambda, const Eigen::VectorXd& w) {
    Eigen::VectorXd grad = 2.0 * (stats.gram * w - stats.cross);
    return kkt_from_gradient(grad, w, lambda);
}

LassoResult lasso(const GramStats& stats, double lambda, const LassoOptions& options) {
    const Index p = stats.gram.rows();
    if (stats.gram.cols() != p || stats.cross.size() != p) throw std::invalid_argument("lasso: bad Gram dimensions");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso: lambda must be >= 0");
    if (!(options.tol > 0.0)) throw std::invalid_argument("lasso: tol must be positive");

    LassoResult out;
    out.w = Eigen::VectorXd::Zero(p);
    if (options.warm_start != nullptr) {
        if (options.warm_start->size() != p) throw std::invalid_argument("lasso: warm start size");
        out.w = *options.warm_start;
    }
    Eigen::VectorXd& w = out.w;
    Eigen::VectorXd gw = stats.gram * w;  // kept in sync with w
    const Eigen::VectorXd a = 2.0 * stats.gram.diagonal();

    // Columns that are identically zero never move.
    for (Index j = 0; j < p; ++j) {
        if (a(j) <= 0.0) w(j) = 0.0;
    }
    gw = stats.gram * w;

    auto update = [&](Index j) {
        if (a(j) <= 0.0) return 0.0;
        double grad = 2.0 * (gw(j) - stats.cross(j));
        double next = soft_threshold(a(j) * w(j) - grad, lambda) / a(j);
        double delta = next - w(j);
        if (delta != 0.0) {
            w(j) = next;
            gw += delta * stats.gram.col(j);
        }
        return std::abs(delta);
    };

    std::vector<Index> active;
    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        for (Index j = 0; j < p; ++j) update(j);
        out.report.iterations = sweep;
        if (options.on_sweep) options.on_sweep(sweep, lasso_objective(stats, lambda, w));

        double kkt = kkt_from_gradient(2.0 * (gw - stats.cross), w, lambda);
        out.report.kkt_violation = kkt;
        if (kkt <= options.tol) {
            out.report.converged = true;
            break;
        }
        // Polish the current active set before the next full pass.
        active.clear();
        for (Index j = 0; j < p; ++j) {
            if (w(j) != 0.0) active.push_back(j);
        }
        for (int inner = 0; inner < 1000 && !active.empty(); ++inner) {
            double moved = 0.0;
            for (Index j : active) moved = std::max(moved, update(j));
            if (moved <= 1e-3 * options.tol) break;
        }
        gw = stats.gram * w;  // refresh to keep accumulated round-off bounded
    }
    return out;
}

LassoResult lasso(const RegressionProblem& problem, const LassoOptions& options) {
    problem.validate();
    return lasso(GramStats::from(problem.design, problem.response), problem.lambda, options);
}

double group_lasso_objective(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross, double yy, double lambda2,
                             const EmbeddingMatrix& k) {
    const double d = static_cast<double>(k.cols());
    double loss = yy - 2.0 * (cross.array() * k.array()).sum() + (k.transpose() * gram * k).trace();
    return std::max(loss, 0.0) / d + lambda2 * k.rowwise().norm().sum();
}

GroupLassoResult group_lasso_embedding(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& cross, double lambda2,
                                       const GroupLassoOptions& options) {
    const Index d = gram.rows();
    if (gram.cols() != d || cross.rows() != d) throw std::invalid_argument("group lasso: bad Gram dimensions");
    if (!(lambda2 >= 0.0)) throw std::invalid_argument("group lasso: lambda2 must be >= 0");
    const Index q = cross.cols();
    const double dd = static_cast<double>(q);

    GroupLassoResult out;
    out.k = EmbeddingMatrix::Zero(d, q);
    if (options.warm_start != nullptr) {
        if (options.warm_start->rows() != d || options.warm_start->cols() != q) {
            throw std::invalid_argument("group lasso: warm start shape");
        }
        out.k = *options.warm_start;
    }
    EmbeddingMatrix& k = out.k;
    std::vector<char> nonzero(static_cast<std::size_t>(d), 0);
    for (Index j = 0; j < d; ++j) {
        if (gram(j, j) <= 0.0) k.row(j).setZero();
        nonzero[static_cast<std::size_t>(j)] = k.row(j).squaredNorm() > 0.0;
    }

    // z_j = C_j - sum_{l != j} G_jl K_l, computed over the nonzero rows only.
    auto partial_residual = [&](Index j) {
        Eigen::RowVectorXd z = cross.row(j);
        for (Index l = 0; l < d; ++l) {
            if (nonzero[static_cast<std::size_t>(l)] && l != j) z.noalias() -= gram(j, l) * k.row(l);
        }
        return z;
    };
    const double shrink = lambda2 * dd / 2.0;

    auto update = [&](Index j) {
        if (gram(j, j) <= 0.0) return 0.0;
        Eigen::RowVectorXd z = partial_residual(j);
        double zn = z.norm();
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(q);
        if (zn > shrink) next = (1.0 - shrink / zn) / gram(j, j) * z;
        double delta = (next - k.row(j)).norm();
        k.row(j) = next;
        nonzero[static_cast<std::size_t>(j)] = next.squaredNorm() > 0.0;
        return delta;
    };

    auto kkt = [&]() {
        double worst = 0.0;
        for (Index j = 0; j < d; ++j) {
            if (gram(j, j) <= 0.0) continue;
            Eigen::RowVectorXd z = partial_residual(j);
            // gradient block (2/d)(G_j K - C_j) = (2/d)(G_jj K_j - z)
            Eigen::RowVectorXd grad = (2.0 / dd) * (gram(j, j) * k.row(j) - z);
            double nrm = k.row(j).norm();
            double v = nrm == 0.0 ? std::max(0.0, grad.norm() - lambda2)
                                  : (grad + lambda2 * k.row(j) / nrm).norm();
            worst = std::max(worst, v);
        }
        return worst;
    };

    std::vector<Index> active;
    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        for (Index j = 0; j < d; ++j) update(j);
        out.report.iterations = sweep;
        out.report.kkt_violation = kkt();
        if (out.report.kkt_violation <= options.tol) {
            out.report.converged = true;
            break;
        }
        active.clear();
        for (Index j = 0; j < d; ++j) {
            if (nonzero[static_cast<std::size_t>(j)]) active.push_back(j);
        }
        for (int inner = 0; inner < 1000 && !active.empty(); ++inner) {
            double moved = 0.0;
            for (Index j : active) moved = std::max(moved, update(j));
            if (moved <= 1e-3 * options.tol) break;
        }
    }

    Eigen::VectorXd norms = k.rowwise().norm();
    double top = norms.size() > 0 ? norms.maxCoeff() : 0.0;
    for (Index j = 0; j < d; ++j) {
        if (top > 0.0 && norms(j) > options.zero_threshold * top) out.selected.push_back(j);
    }
    return out;
}

GroupLassoResult group_lasso_embedding(const GroupLassoProblem& problem, const GroupLassoOptions& options) {
    problem.validate();
    const double n = static_cast<double>(problem.design.rows());
    Eigen::MatrixXd gram = problem.design.transpose() * problem.design / n;
    Eigen::MatrixXd cross = problem.design.transpose() * problem.response / n;
    return group_lasso_embedding(gram, cross, problem.lambda2, options);
}

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& gram, double lambda3) : dim_(gram.rows()) {
    if (gram.rows() != gram.cols()) throw std::invalid_argument("ridge: Gram matrix must be square");
    if (!(lambda3 >= 0.0)) throw std::invalid_argument("ridge: lambda3 must be >= 0");
    if (dim_ == 0) return;
    Eigen::MatrixXd a = gram + lambda3 * Eigen::MatrixXd::Identity(dim_, dim_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    double cutoff = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()) * static_cast<double>(dim_);
    if (ev.minCoeff() > cutoff) {
        ldlt_.compute(a);
        return;
    }
    rank_deficient_ = true;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(dim_);
    for (Index i = 0; i < dim_; ++i) {
        if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
    }
    pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::VectorXd RidgeSolver::solve(const Eigen::VectorXd& cross) const {
    if (cross.size() != dim_) throw std::invalid_argument("ridge: right-hand side size");
    if (dim_ == 0) return {};
    return rank_deficient_ ? Eigen::VectorXd(pinv_ * cross) : Eigen::VectorXd(ldlt_.solve(cross));
}

RidgeResult ridge(const RegressionProblem& problem) {
    problem.validate();
    GramStats stats = GramStats::from(problem.design, problem.response);
    RidgeSolver solver(stats.gram, problem.lambda);
    RidgeResult out;
    out.w = solver.solve(stats.cross);
    out.report.iterations = 1;
    out.report.rank_deficient = solver.rank_deficient();
    Eigen::VectorXd resid = stats.gram * out.w + problem.lambda * out.w - stats.cross;
    out.report.kkt_violation = solver.rank_deficient() ? 0.0 : resid.cwiseAbs().maxCoeff();
    out.report.converged = true;
    return out;
}

double default_lambda1(double n, double t, double d, double gamma, double delta) {
    if (!(n > 0 && t > 0 && d > 0)) throw std::invalid_argument("default_lambda1: N, T, d must be positive");
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("default_lambda1: gamma must lie in (0,1)");
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("default_lambda1: delta must lie in (0,1)");
    return std::sqrt(t * std::log(2.0 * d / delta) / n) / (1.0 - gamma);
}

double default_lambda2(double n, double d, double delta) {
    if (!(n > 0 && d > 0)) throw std::invalid_argument("default_lambda2: N, d must be positive");
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("default_lambda2: delta must lie in (0,1)");
    return 4.0 * std::sqrt(2.0 * std::log(2.0 * d * d / delta) / (n * d));
}

double default_lambda3(double sigma_min, double k_hat_size, double delta, double length) {
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("default_lambda3: delta must lie in (0,1)");
    if (k_hat_size <= 0) return 0.0;
    return std::max(sigma_min, 0.0) * std::log(12.0 * k_hat_size / delta) * length * k_hat_size;
}

IterationCount default_iterations(double n, double gamma, int cap) {
    if (!(n > 0)) throw std::invalid_argument("default_iterations: N must be positive");
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("default_iterations: gamma must lie in (0,1)");
    double raw = std::ceil(std::log(n / (1.0 - gamma)) / (1.0 - gamma));
    IterationCount out;
    if (raw > cap) {
        out.t = cap;
        out.capped = true;
    } else {
        out.t = std::max(1, static_cast<int>(raw));
    }
    return out;
}

SignalCheck signal_strength_check(const SparseLinearMDP& mdp, const Policy& pi, double n, double delta,
                                  double c_min) {
    if (!(n > 0)) throw std::invalid_argument("signal_strength_check: N must be positive");
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("signal_strength_check: delta must lie in (0,1)");
    EmbeddingMatrix k = matrix_mean_embedding(mdp, pi);
    const double d = static_cast<double>(mdp.dim());
    const double s = static_cast<double>(mdp.sparsity());
    SignalCheck out;
    out.signal = std::numeric_limits<double>::infinity();
    for (Index j : mdp.support()) out.signal = std::min(out.signal, k.row(j).norm() / std::sqrt(d));
    out.threshold = c_min > 0.0 ? 64.0 * std::sqrt(2.0) * s / c_min * std::sqrt(2.0 * std::log(2.0 * d * d / delta) / n)
                                : std::numeric_limits<double>::infinity();
    out.ratio = out.signal > 0.0 ? out.signal / out.threshold : 0.0;
    out.pass = out.signal > 0.0 && out.signal > out.threshold;
    return out;
}

}  // namespace sparserl
