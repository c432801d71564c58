#include "sparserl/hard_instance.hpp"

#include "sparserl/batch_data.hpp"
#include "sparserl/diagnostics.hpp"
#include "sparserl/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sparserl {

void HardInstanceParams::validate() const {
    if (s < 2 || s % 2 != 0) throw std::invalid_argument("hard instance: s must be even and >= 2");
    if (s >= d) throw std::invalid_argument("hard instance: need s < d so the behavior actions exist");
    if (!(gamma >= 2.0 / 3.0 && gamma < 1.0)) throw std::invalid_argument("hard instance: gamma must lie in [2/3, 1)");
    if (model < 1 || model > s / 2) throw std::invalid_argument("hard instance: model index must lie in [1, s/2]");
    if (!(varsigma1 > 0.0 && varsigma1 < 1.0) || !(varsigma2 > 0.0 && varsigma2 < 1.0)) {
        throw std::invalid_argument("hard instance: varsigma1, varsigma2 must lie in (0,1)");
    }
    const double top = 2.0 * (1.0 - gamma);
    if (!(delta1 >= 0.0 && delta1 < top) || !(delta2 >= 0.0 && delta2 < top)) {
        throw std::invalid_argument("hard instance: delta1, delta2 must lie in [0, 2(1-gamma))");
    }
}

Index hard_num_actions(Index s, Index d) { return s / 2 + s * (d - s); }

Index hard_action(Index s, Index /*d*/, Index i) {
    if (i < 1 || i > s / 2) throw std::out_of_range("hard_action: i");
    return i - 1;
}

Index hard_bar_action(Index s, Index d, Index i, Index k) {
    const Index m = d - s;
    if (i < 1 || i > s / 2 || k == 0 || k > m || k < -m) throw std::out_of_range("hard_bar_action: (i, k)");
    return s / 2 + (i - 1) * 2 * m + (k > 0 ? k - 1 : m + (-k) - 1);
}

Eigen::MatrixXd dct_matrix(Index s) {
    if (s < 1) throw std::invalid_argument("dct_matrix: s must be >= 1");
    Eigen::MatrixXd theta(s, s);
    const double sd = static_cast<double>(s);
    for (Index i = 1; i <= s; ++i) {
        theta(i - 1, 0) = 1.0 / std::sqrt(sd);
        for (Index j = 2; j <= s; ++j) {
            theta(i - 1, j - 1) =
                std::sqrt(2.0 / sd) * std::cos(static_cast<double>((2 * i - 1) * (j - 1)) * std::numbers::pi / (2.0 * sd));
        }
    }
    return theta;
}

Eigen::Matrix2d sigma_circ(double xi_top, double varsigma1, double varsigma2) {
    Eigen::Vector2d top(1.0 - varsigma1, varsigma1);
    Eigen::Vector2d bottom(varsigma2, 1.0 - varsigma2);
    return xi_top * top * top.transpose() + (1.0 - xi_top) * bottom * bottom.transpose();
}

double hard_p_min(Index s, double varsigma1, double varsigma2, double delta1, double delta2) {
    std::vector<double> p{1.0 - varsigma1, varsigma1, varsigma2, 1.0 - varsigma2};
    if (s > 2) {
        double q1 = (1.0 - varsigma1) * (1.0 - delta1) + varsigma1 * delta2;
        double q2 = varsigma2 * (1.0 - delta1) + (1.0 - varsigma2) * delta2;
        p.insert(p.end(), {q1, 1.0 - q1, q2, 1.0 - q2});
    }
    return *std::min_element(p.begin(), p.end());
}

HardInstanceBundle build_hard_instance(const HardInstanceParams& params, Index length,
                                       const InitialDistribution& data_init) {
    params.validate();
    if (length < 1) throw std::invalid_argument("build_hard_instance: L must be >= 1");
    if (data_init.size() != 2) throw std::invalid_argument("build_hard_instance: data init must cover 2 states");
    const Index s = params.s;
    const Index d = params.d;
    const Index m = d - s;
    const Index n_actions = hard_num_actions(s, d);
    const Eigen::MatrixXd theta = dct_matrix(s);
    const Eigen::MatrixXd theta_bar = dct_matrix(m);
    const double scale = std::sqrt(static_cast<double>(s) / 2.0);
    const double scale_off = std::sqrt(static_cast<double>(m) / 2.0);

    auto block = [&](Index i, double first, double second) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(s);
        e(2 * i - 2) = first;
        e(2 * i - 1) = second;
        return Eigen::VectorXd(scale * (theta * e));
    };

    Eigen::MatrixXd features = Eigen::MatrixXd::Zero(2 * n_actions, d);
    for (Index i = 1; i <= s / 2; ++i) {
        Index a = hard_action(s, d, i);
        features.row(a).head(s) = block(i, 1.0, 0.0).transpose();
        features.row(n_actions + a).head(s) = block(i, params.varsigma2, 1.0 - params.varsigma2).transpose();
        for (Index kk = 1; kk <= m; ++kk) {
            for (Index k : {kk, -kk}) {
                Index b = hard_bar_action(s, d, i, k);
                Eigen::VectorXd off = (k > 0 ? 1.0 : -1.0) * scale_off * theta_bar.col(kk - 1);
                features.row(b).head(s) = block(i, 1.0 - params.varsigma1, params.varsigma1).transpose();
                features.row(b).tail(m) = off.transpose();
                features.row(n_actions + b).head(s) = block(i, params.varsigma2, 1.0 - params.varsigma2).transpose();
                features.row(n_actions + b).tail(m) = off.transpose();
            }
        }
    }

    Eigen::VectorXd u_top(s);
    Eigen::VectorXd u_bottom(s);
    for (Index j = 1; j <= s / 2; ++j) {
        bool own = j == params.model;
        u_top(2 * j - 2) = own ? 1.0 : 1.0 - params.delta1;
        u_top(2 * j - 1) = own ? 0.0 : params.delta2;
        u_bottom(2 * j - 2) = own ? 0.0 : params.delta1;
        u_bottom(2 * j - 1) = own ? 1.0 : 1.0 - params.delta2;
    }
    const double psi_scale = std::sqrt(2.0 / static_cast<double>(s));
    Eigen::MatrixXd psi(s, 2);
    psi.col(0) = psi_scale * (theta * u_top);
    psi.col(1) = psi_scale * (theta * u_bottom);

    Eigen::MatrixXd reward(2, n_actions);
    reward.row(0).setOnes();
    reward.row(1).setZero();

    std::vector<Index> support(static_cast<std::size_t>(s));
    for (Index j = 0; j < s; ++j) support[static_cast<std::size_t>(j)] = j;

    Eigen::MatrixXd behavior = Eigen::MatrixXd::Zero(2, n_actions);
    behavior.rightCols(n_actions - s / 2).setConstant(1.0 / static_cast<double>(s * m));
    std::vector<Index> opt(2, hard_action(s, d, params.model));

    HardInstanceBundle out{params,
                           SparseLinearMDP(2, n_actions, params.gamma, std::move(features), std::move(support),
                                           std::move(psi), std::move(reward)),
                           Policy(std::move(behavior)),
                           Policy::deterministic(opt, n_actions),
                           InitialDistribution::point_mass(2, 0),
                           data_init,
                           length,
                           Eigen::Vector2d::Zero(),
                           Eigen::Matrix2d::Zero(),
                           0.0,
                           0.0};
    // x-under's optimal action depends on the deltas; take the greedy one.
    OptimalValue star = exact_optimal_value(out.mdp, 1e-12);
    std::vector<Index> best = star.actions;
    best[0] = hard_action(s, d, params.model);
    out.optimal = Policy::deterministic(best, n_actions);

    for (const auto& rho : behavior_state_marginals(out.mdp, out.behavior, data_init, length)) out.xi_bar += rho;
    out.xi_bar /= static_cast<double>(length);
    out.sigma_circ = sigma_circ(out.xi_bar(0), params.varsigma1, params.varsigma2);
    out.p_min = hard_p_min(s, params.varsigma1, params.varsigma2, params.delta1, params.delta2);
    out.lambda_min_circ = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(out.sigma_circ).eigenvalues()(0);
    return out;
}

DefaultHardParams default_hard_params(Index s, Index d, double n, Index length, double gamma, Index model) {
    if (!(gamma >= 2.0 / 3.0 && gamma < 1.0)) throw std::invalid_argument("default_hard_params: gamma must lie in [2/3, 1)");
    if (!(n > 0) || length < 1) throw std::invalid_argument("default_hard_params: N and L must be positive");
    DefaultHardParams out;
    HardInstanceParams& p = out.params;
    p.s = s;
    p.d = d;
    p.gamma = gamma;
    p.model = model;
    p.varsigma1 = (1.0 - gamma) / (2.0 * gamma);
    p.varsigma2 = p.varsigma1;

    const Eigen::Matrix2d sc = sigma_circ(0.5, p.varsigma1, p.varsigma2);
    const double det = sc.determinant();
    const double c1 = std::sqrt(sc(1, 1) / det);
    const double c2 = std::sqrt(sc(0, 1) * sc(0, 1) / (sc(1, 1) * det));
    const double sd = static_cast<double>(s);
    // delta depends on p_min, which depends on delta; the map is a strong contraction.
    double pm = hard_p_min(s, p.varsigma1, p.varsigma2, 0.0, 0.0);
    for (int it = 1; it <= 200; ++it) {
        double root = std::sqrt(sd * pm / (100.0 * n));
        p.delta1 = c1 * root;
        p.delta2 = c2 * root;
        double next = hard_p_min(s, p.varsigma1, p.varsigma2, p.delta1, p.delta2);
        out.fixed_point_iterations = it;
        if (std::abs(next - pm) <= 1e-15) {
            pm = next;
            break;
        }
        pm = next;
    }
    out.p_min = pm;
    out.sample_size_ok = n >= 2000.0 * sd * static_cast<double>(length) / (1.0 - gamma);
    if (!out.sample_size_ok) {
        std::ostringstream msg;
        msg << "N = " << n << " is below 2000 s L / (1 - gamma) = "
            << 2000.0 * sd * static_cast<double>(length) / (1.0 - gamma);
        out.note = msg.str();
    }
    p.validate();
    return out;
}

AnatomyReport verify_lower_bound_anatomy(const HardInstanceBundle& bundle, double tol,
                                         const RestrictedEigenvalueOptions& re) {
    const HardInstanceParams& p = bundle.params;
    const Index s = p.s;
    const Index d = p.d;
    AnatomyReport out;

    Eigen::MatrixXd theta = dct_matrix(s);
    Eigen::MatrixXd theta_bar = dct_matrix(d - s);
    out.dct_orthogonality = std::max((theta.transpose() * theta - Eigen::MatrixXd::Identity(s, s)).cwiseAbs().maxCoeff(),
                                     (theta_bar.transpose() * theta_bar - Eigen::MatrixXd::Identity(d - s, d - s))
                                         .cwiseAbs()
                                         .maxCoeff());
    out.row_sum_error = (bundle.mdp.kernel().rowwise().sum().array() - 1.0).abs().maxCoeff();

    CovarianceMatrix sigma = population_covariance(bundle.mdp, bundle.behavior, bundle.data_init, bundle.length);
    Eigen::MatrixXd predicted = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(s, s);
    for (Index i = 0; i < s / 2; ++i) blocks.block(2 * i, 2 * i, 2, 2) = bundle.sigma_circ;
    predicted.topLeftCorner(s, s) = theta * blocks * theta.transpose();
    predicted.bottomRightCorner(d - s, d - s) = 0.5 * Eigen::MatrixXd::Identity(d - s, d - s);
    out.block_error = (sigma.sigma - predicted).cwiseAbs().maxCoeff();

    out.c_min = restricted_eigenvalue(sigma.sigma, s, re);
    out.lambda_min_circ = bundle.lambda_min_circ;

    out.chi_square = restricted_chi_square(bundle.mdp, bundle.optimal, bundle.xi0, bundle.behavior, bundle.data_init,
                                           bundle.length, bundle.mdp.support());
    const Eigen::Matrix2d& sc = bundle.sigma_circ;
    out.chi_square_closed = static_cast<double>(s) * sc(1, 1) / (2.0 * sc.determinant()) - 1.0;

    auto fail = [&](const std::string& what, double value) {
        std::ostringstream msg;
        msg << what << " (" << value << ")";
        out.violations.push_back(msg.str());
    };
    if (out.dct_orthogonality > 1e-10) fail("DCT basis is not orthogonal", out.dct_orthogonality);
    if (out.row_sum_error > 1e-10) fail("transition rows do not sum to one", out.row_sum_error);
    if (out.block_error > tol) fail("covariance differs from the block-diagonal prediction", out.block_error);
    if (out.lambda_min_circ < out.c_min.lower - tol || out.lambda_min_circ > out.c_min.upper + tol) {
        fail("restricted eigenvalue bracket misses lambda_min(Sigma-circ)", out.lambda_min_circ);
    }
    if (std::abs(out.chi_square - out.chi_square_closed) > tol) {
        fail("1 + chi^2 differs from s Sigma22 / (2 det)", out.chi_square - out.chi_square_closed);
    }
    return out;
}

ValueGapReport verify_value_gap(const HardInstanceBundle& bundle) {
    const HardInstanceParams& p = bundle.params;
    const SparseLinearMDP& mdp = bundle.mdp;
    ValueGapReport out;
    out.bound = p.gamma * p.delta1 / (2.0 * (1.0 - p.gamma)) / (1.0 - p.gamma + 2.0 * p.gamma * p.varsigma2);
    out.preconditions = p.delta1 <= (1.0 - p.gamma) / p.gamma && p.delta2 <= p.varsigma2;
    const double v_star = bundle.xi0.probs().dot(exact_optimal_value(mdp, 1e-13).v);
    const Index own = hard_action(p.s, p.d, p.model);
    out.min_gap = std::numeric_limits<double>::infinity();
    for (Index top = 0; top < mdp.n_actions(); ++top) {
        if (top == own) continue;
        for (Index bottom = 0; bottom < mdp.n_actions(); ++bottom) {
            Policy pi = Policy::deterministic({top, bottom}, mdp.n_actions());
            double gap = v_star - exact_policy_value(mdp, pi, bundle.xi0).value;
            out.min_gap = std::min(out.min_gap, gap);
            ++out.policies;
        }
    }
    return out;
}

double likelihood_ratio_probability(const HardInstanceBundle& truth, const HardInstanceBundle& alternative,
                                    Index episodes, Index length, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("likelihood_ratio_probability: trials must be >= 1");
    if (truth.mdp.n_actions() != alternative.mdp.n_actions()) {
        throw std::invalid_argument("likelihood_ratio_probability: models must share the action set");
    }
    const double cap = 0.5 * truth.p_min;
    if (truth.params.delta1 > cap || truth.params.delta2 > cap) {
        throw std::invalid_argument("likelihood_ratio_probability: requires delta1, delta2 <= p_min / 2");
    }
    const Eigen::MatrixXd log_truth = truth.mdp.kernel().array().log();
    const Eigen::MatrixXd log_alt = alternative.mdp.kernel().array().log();
    int hits = 0;
    for (int trial = 0; trial < trials; ++trial) {
        BatchDataset data = collect(truth.mdp, truth.behavior, truth.data_init, episodes, length,
                                    mix_seed(seed, static_cast<std::uint64_t>(trial)));
        double llr = 0.0;
        for (const auto& ep : data.episodes) {
            for (const auto& t : ep) {
                Index row = truth.mdp.pair_index(t.x, t.a);
                llr += log_alt(row, t.x_next) - log_truth(row, t.x_next);
            }
        }
        if (llr >= std::log(0.5)) ++hits;
    }
    return static_cast<double>(hits) / trials;
}

}  // namespace sparserl
