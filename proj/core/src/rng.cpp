#include "sparserl/rng.hpp"

namespace sparserl {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Eigen::VectorXd Rng::dirichlet(Eigen::Index n, double concentration) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = gamma_variate(concentration);
    double total = out.sum();
    if (total <= 0.0) {
        out.setConstant(1.0 / static_cast<double>(n));
    } else {
        out /= total;
    }
    return out;
}

}  // namespace sparserl
