#pragma once

#include "sparserl/mdp.hpp"
#include "sparserl/solvers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sparserl {

/**
 * Two-state lower-bound family. State 0 is the rewarding state x-bar,
 * state 1 is x-under. Actions a_1..a_{s/2} come first, followed by
 * abar_{i,k} for k = 1..d-s and then k = -1..-(d-s), grouped by i.
 * The relevant features are the first s coordinates.
 */
struct HardInstanceParams {
    Index s = 2;
    Index d = 4;
    double gamma = 0.75;
    Index model = 1;  // i in [1, s/2]
    double varsigma1 = 1.0 / 6.0;
    double varsigma2 = 1.0 / 6.0;
    double delta1 = 0.0;
    double delta2 = 0.0;

    /// Throws std::invalid_argument on any range violation.
    void validate() const;
};

Index hard_num_actions(Index s, Index d);
/// Index of a_i, i in [1, s/2].
Index hard_action(Index s, Index d, Index i);
/// Index of abar_{i,k}, k in +-[1, d-s].
Index hard_bar_action(Index s, Index d, Index i, Index k);

/// DCT-II style orthogonal matrix with first column 1/sqrt(s).
Eigen::MatrixXd dct_matrix(Index s);

struct HardInstanceBundle {
    HardInstanceParams params;
    SparseLinearMDP mdp;
    Policy behavior;          // uniform over the abar actions
    Policy optimal;           // pi_i^*: a_i at x-bar
    InitialDistribution xi0;  // point mass at x-bar
    InitialDistribution data_init;
    Index length = 1;
    Eigen::Vector2d xi_bar;    // step-averaged behavior state marginal
    Eigen::Matrix2d sigma_circ;
    double p_min = 0.0;
    double lambda_min_circ = 0.0;
};

HardInstanceBundle build_hard_instance(const HardInstanceParams& params, Index length = 1,
                                       const InitialDistribution& data_init = InitialDistribution::uniform(2));

/// Sigma-circ at a given two-state marginal.
Eigen::Matrix2d sigma_circ(double xi_top, double varsigma1, double varsigma2);

/// Smallest of the abar transition probabilities of model M_i.
double hard_p_min(Index s, double varsigma1, double varsigma2, double delta1, double delta2);

struct DefaultHardParams {
    HardInstanceParams params;
    bool sample_size_ok = true;  // N >= 2000 s L / (1 - gamma)
    double p_min = 0.0;
    int fixed_point_iterations = 0;
    std::string note;
};

/// varsigma1 = varsigma2 = (1-gamma)/(2 gamma), deltas from the constrained
/// maximisation at xi-bar = (1/2, 1/2), iterated with p_min to a fixed point.
DefaultHardParams default_hard_params(Index s, Index d, double n, Index length, double gamma, Index model = 1);

struct AnatomyReport {
    double dct_orthogonality = 0.0;  // ||Theta^T Theta - I||_max
    double row_sum_error = 0.0;
    double block_error = 0.0;  // ||Sigma - predicted block structure||_max
    RestrictedEigenvalue c_min;
    double lambda_min_circ = 0.0;
    double chi_square = 0.0;          // computed through diagnostics
    double chi_square_closed = 0.0;   // s Sigma22 / (2 det) - 1
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

AnatomyReport verify_lower_bound_anatomy(const HardInstanceBundle& bundle, double tol = 1e-6,
                                         const RestrictedEigenvalueOptions& re = {});

struct ValueGapReport {
    double bound = 0.0;     // gamma delta1 / (2(1-gamma)) / (1 - gamma + 2 gamma varsigma2)
    double min_gap = 0.0;   // over policies with pi(x-bar) != a_i
    Index policies = 0;
    bool preconditions = false;  // delta1 <= (1-gamma)/gamma and delta2 <= varsigma2
};

/// Exhaustive check over all deterministic policies.
ValueGapReport verify_value_gap(const HardInstanceBundle& bundle);

/// Monte Carlo estimate of P_i(L_j(D) / L_i(D) >= 1/2) for behavior datasets of K x L.
double likelihood_ratio_probability(const HardInstanceBundle& truth, const HardInstanceBundle& alternative,
                                    Index episodes, Index length, int trials, std::uint64_t seed);

}  // namespace sparserl
