#pragma once

#include "sparserl/mdp.hpp"

#include <cstdint>

namespace sparserl {

/**
 * Random sparse linear MDP. The relevant features are simplex weights over
 * s anchor distributions psi_k, so every induced row is a mixture of
 * anchors. Irrelevant coordinates are uniform noise in [-noise, noise].
 *
 * Anchors, weights and rewards come from one stream and the support
 * positions and noise from two others, so changing d with the same seed
 * leaves P and r unchanged.
 */
struct GeneratorSpec {
    Index n_states = 5;
    Index n_actions = 2;
    Index d = 32;
    Index s = 3;
    double gamma = 0.9;
    std::uint64_t seed = 0;
    double anchor_concentration = 1.0;  // Dirichlet parameter of each psi_k
    double weight_concentration = 1.0;  // Dirichlet parameter of phi_K(x,a)
    double noise = 1.0;
    bool contiguous_support = false;    // support = {0..s-1} instead of random positions

    void validate() const;
};

SparseLinearMDP generate_mdp(const GeneratorSpec& spec);

/// epsilon-greedy around a deterministic action choice.
Policy epsilon_greedy(const std::vector<Index>& actions, Index n_actions, double epsilon);

}  // namespace sparserl
