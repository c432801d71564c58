#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace sparserl {

/// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/**
 * Seeded generator with named substreams. Stream k of seed s is seeded with
 * mix_seed(s, k), so episode k of a dataset can be regenerated without
 * replaying episodes 0..k-1.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : engine_(mix_seed(seed, stream)) {}

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Index drawn from a nonnegative weight row summing to ~1.
    template <class Row>
    Eigen::Index categorical(const Row& probs) {
        double u = uniform();
        double acc = 0.0;
        const Eigen::Index n = probs.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += probs(i);
            if (u < acc) return i;
        }
        // Round-off left u above the total; return the last index with mass.
        for (Eigen::Index i = n - 1; i > 0; --i) {
            if (probs(i) > 0.0) return i;
        }
        return 0;
    }

    double normal() { return std::normal_distribution<double>{}(engine_); }
    double gamma_variate(double shape) { return std::gamma_distribution<double>{shape, 1.0}(engine_); }
    Eigen::VectorXd dirichlet(Eigen::Index n, double concentration);
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace sparserl
