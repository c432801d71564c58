#include "sparserl/rng.hpp"
#include "sparserl/solvers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sparserl {

namespace {

// Euclidean projection of v onto {u : ||u||_1 <= radius}.
void project_l1_ball(Eigen::Ref<Eigen::VectorXd> v, double radius) {
    if (v.size() == 0) return;
    if (radius <= 0.0) {
        v.setZero();
        return;
    }
    if (v.lpNorm<1>() <= radius) return;
    std::vector<double> mag(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) mag[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(mag.begin(), mag.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        cumsum += mag[i];
        double t = (cumsum - radius) / static_cast<double>(i + 1);
        if (mag[i] > t) theta = t;
    }
    for (Index i = 0; i < v.size(); ++i) {
        double m = std::max(std::abs(v(i)) - theta, 0.0);
        v(i) = v(i) >= 0.0 ? m : -m;
    }
}

double binomial(Index n, Index k) {
    double out = 1.0;
    for (Index i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
    return out;
}

struct ConeSearch {
    const Eigen::MatrixXd& z;
    std::vector<Index> in;   // S
    std::vector<Index> out;  // S^c
    int steps;
    double step0;

    // beta = (u on S, v on S^c); map back to the ambient vector.
    Eigen::VectorXd embed(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(z.rows());
        for (std::size_t i = 0; i < in.size(); ++i) beta(in[i]) = u(static_cast<Index>(i));
        for (std::size_t i = 0; i < out.size(); ++i) beta(out[i]) = v(static_cast<Index>(i));
        return beta;
    }

    void make_feasible(Eigen::VectorXd& u, Eigen::VectorXd& v) const {
        double nu = u.norm();
        if (nu == 0.0) {
            u.setZero();
            u(0) = 1.0;
        } else {
            u /= nu;
        }
        project_l1_ball(v, 3.0 * u.lpNorm<1>());
    }

    double run(Eigen::VectorXd u, Eigen::VectorXd v) const {
        make_feasible(u, v);
        Eigen::VectorXd beta = embed(u, v);
        double f = beta.dot(z * beta);
        double eta = step0;
        for (int k = 0; k < steps && eta > 1e-14 * step0; ++k) {
            Eigen::VectorXd grad = 2.0 * (z * beta);
            Eigen::VectorXd gu(u.size());
            Eigen::VectorXd gv(v.size());
            for (std::size_t i = 0; i < in.size(); ++i) gu(static_cast<Index>(i)) = grad(in[i]);
            for (std::size_t i = 0; i < out.size(); ++i) gv(static_cast<Index>(i)) = grad(out[i]);
            // Backtracking: shrink until the projected step decreases f.
            bool moved = false;
            while (eta > 1e-14 * step0) {
                Eigen::VectorXd nu = u - eta * gu;
                Eigen::VectorXd nv = v - eta * gv;
                make_feasible(nu, nv);
                Eigen::VectorXd nb = embed(nu, nv);
                double nf = nb.dot(z * nb);
                if (nf < f) {
                    u = std::move(nu);
                    v = std::move(nv);
                    beta = std::move(nb);
                    f = nf;
                    moved = true;
                    eta *= 1.5;
                    break;
                }
                eta *= 0.5;
            }
            if (!moved) break;
        }
        return f;
    }
};

}  // namespace

RestrictedEigenvalue restricted_eigenvalue(const Eigen::MatrixXd& z, Index s,
                                           const RestrictedEigenvalueOptions& options) {
    const Index d = z.rows();
    if (z.cols() != d || d == 0) throw std::invalid_argument("restricted_eigenvalue: Z must be square");
    if (s < 1 || s > d) throw std::invalid_argument("restricted_eigenvalue: need 1 <= s <= d");
    if ((z - z.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, z.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("restricted_eigenvalue: Z must be symmetric");
    }
    const Eigen::MatrixXd sym = 0.5 * (z + z.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(sym);

    RestrictedEigenvalue out;
    out.lower = full.eigenvalues()(0);
    out.upper = std::numeric_limits<double>::infinity();

    const double combos = binomial(d, s);
    const double work = combos * (options.restarts + 1.0) * options.steps * static_cast<double>(d) * d;
    const bool enumerate = combos <= static_cast<double>(options.max_supports);
    const bool search = enumerate && work <= options.work_budget;
    out.exact = search;

    const double top = std::max(full.eigenvalues()(d - 1), 1e-300);

    auto visit = [&](const std::vector<Index>& support, std::uint64_t stream) {
        Eigen::MatrixXd zss(s, s);
        for (Index i = 0; i < s; ++i) {
            for (Index j = 0; j < s; ++j) zss(i, j) = sym(support[i], support[j]);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(zss);
        double best = eig.eigenvalues()(0);
        if (search && s < d) {
            ConeSearch cone{sym, support, {}, options.steps, 0.5 / top};
            for (Index j = 0, p = 0; j < d; ++j) {
                if (p < s && support[p] == j) {
                    ++p;
                } else {
                    cone.out.push_back(j);
                }
            }
            const Index m = d - s;
            best = std::min(best, cone.run(eig.eigenvectors().col(0), Eigen::VectorXd::Zero(m)));
            Rng rng(options.seed, stream);
            for (int r = 0; r < options.restarts; ++r) {
                Eigen::VectorXd u(s);
                Eigen::VectorXd v(m);
                for (Index i = 0; i < s; ++i) u(i) = rng.normal();
                for (Index i = 0; i < m; ++i) v(i) = rng.normal();
                u.normalize();
                double radius = 3.0 * u.lpNorm<1>() * rng.uniform();
                if (v.lpNorm<1>() > 0.0) v *= radius / v.lpNorm<1>();
                best = std::min(best, cone.run(u, v));
            }
        }
        if (best < out.upper) {
            out.upper = best;
            out.argmin_support = support;
        }
    };

    if (enumerate) {
        std::vector<Index> idx(static_cast<std::size_t>(s));
        std::iota(idx.begin(), idx.end(), 0);
        std::uint64_t stream = 0;
        while (true) {
            visit(idx, stream++);
            Index i = s - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - s + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j < s; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    } else {
        // Too many supports to enumerate: any support still gives a valid
        // upper bound, so try the top-s coordinates of the bottom eigenvectors.
        for (Index e = 0; e < std::min<Index>(d, 8); ++e) {
            Eigen::VectorXd vec = full.eigenvectors().col(e).cwiseAbs();
            std::vector<Index> order(static_cast<std::size_t>(d));
            std::iota(order.begin(), order.end(), 0);
            std::partial_sort(order.begin(), order.begin() + s, order.end(),
                              [&](Index a, Index b) { return vec(a) > vec(b); });
            std::vector<Index> support(order.begin(), order.begin() + s);
            std::sort(support.begin(), support.end());
            visit(support, static_cast<std::uint64_t>(e));
        }
    }
    out.upper = std::max(out.upper, out.lower);
    return out;
}

}  // namespace sparserl
