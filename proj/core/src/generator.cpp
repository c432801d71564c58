#include "sparserl/generator.hpp"

#include "sparserl/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sparserl {

namespace {

enum Stream : std::uint64_t { kDynamics = 0, kNoise = 1, kSupport = 2 };

}  // namespace

void GeneratorSpec::validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("generator: need at least one state and action");
    if (s < 1) throw std::invalid_argument("generator: s must be >= 1");
    if (s > d) throw std::invalid_argument("generator: s must not exceed d");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("generator: gamma must lie in (0,1)");
    if (!(anchor_concentration > 0.0) || !(weight_concentration > 0.0)) {
        throw std::invalid_argument("generator: Dirichlet concentrations must be positive");
    }
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("generator: noise must lie in [0,1]");
}

SparseLinearMDP generate_mdp(const GeneratorSpec& spec) {
    spec.validate();
    const Index pairs = spec.n_states * spec.n_actions;

    Rng dyn(spec.seed, kDynamics);
    Eigen::MatrixXd psi(spec.s, spec.n_states);
    for (Index k = 0; k < spec.s; ++k) psi.row(k) = dyn.dirichlet(spec.n_states, spec.anchor_concentration).transpose();
    Eigen::MatrixXd weights(pairs, spec.s);
    for (Index i = 0; i < pairs; ++i) weights.row(i) = dyn.dirichlet(spec.s, spec.weight_concentration).transpose();
    Eigen::MatrixXd reward(spec.n_states, spec.n_actions);
    for (Index x = 0; x < spec.n_states; ++x) {
        for (Index a = 0; a < spec.n_actions; ++a) reward(x, a) = dyn.uniform();
    }

    std::vector<Index> support(static_cast<std::size_t>(spec.d));
    std::iota(support.begin(), support.end(), 0);
    if (!spec.contiguous_support) {
        Rng pick(spec.seed, kSupport);
        // Fisher-Yates by hand: std::shuffle's draw sequence is library specific.
        for (Index i = spec.d - 1; i > 0; --i) {
            auto j = static_cast<Index>(pick.uniform() * static_cast<double>(i + 1));
            std::swap(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(std::min(j, i))]);
        }
    }
    support.resize(static_cast<std::size_t>(spec.s));
    std::sort(support.begin(), support.end());

    Rng noise(spec.seed, kNoise);
    Eigen::MatrixXd features(pairs, spec.d);
    for (Index i = 0; i < pairs; ++i) {
        for (Index j = 0; j < spec.d; ++j) features(i, j) = spec.noise * (2.0 * noise.uniform() - 1.0);
    }
    for (Index k = 0; k < spec.s; ++k) features.col(support[static_cast<std::size_t>(k)]) = weights.col(k);

    return SparseLinearMDP(spec.n_states, spec.n_actions, spec.gamma, std::move(features), std::move(support),
                           std::move(psi), std::move(reward));
}

Policy epsilon_greedy(const std::vector<Index>& actions, Index n_actions, double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon_greedy: epsilon must lie in [0,1]");
    Eigen::MatrixXd probs =
        Eigen::MatrixXd::Constant(static_cast<Index>(actions.size()), n_actions, epsilon / static_cast<double>(n_actions));
    for (std::size_t x = 0; x < actions.size(); ++x) {
        if (actions[x] < 0 || actions[x] >= n_actions) throw std::out_of_range("epsilon_greedy: action index");
        probs(static_cast<Index>(x), actions[x]) += 1.0 - epsilon;
    }
    return Policy(std::move(probs));
}

}  // namespace sparserl
