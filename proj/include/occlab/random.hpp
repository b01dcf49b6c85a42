#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace occlab {

/// splitmix64 finalizer; used to derive independent stream seeds from (seed, tag).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
   public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return unit_(gen_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(gen_); }

    /// Uniform integer in [0, n).
    int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(gen_); }

    /// Sample from unnormalized non-negative weights by linear scan.
    template <typename Derived>
    int categorical(const Eigen::DenseBase<Derived>& weights) {
        const double total = weights.sum();
        double u = unit_(gen_) * total;
        const int n = static_cast<int>(weights.size());
        for (int i = 0; i < n; ++i) {
            u -= weights(i);
            if (u < 0.0) return i;
        }
        // Round-off: return the last index with positive mass.
        for (int i = n - 1; i >= 0; --i) {
            if (weights(i) > 0.0) return i;
        }
        return n - 1;
    }

    /// Offset Δ ≥ 1 with P(Δ = k) = (1 - γ) γ^{k-1}.
    int geometric_offset(double gamma) {
        return 1 + std::geometric_distribution<int>(1.0 - gamma)(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

   private:
    std::mt19937_64 gen_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace occlab
