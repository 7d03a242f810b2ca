#pragma once

#include <cstdint>
#include <vector>

#include "sct/core.hpp"

namespace sct {

// Discretized independent Wiener paths. Increments are generated lazily per
// path index from substreams keyed by (seed, path, noise), so results do not
// depend on scheduling order.
class BrownianPaths {
public:
    BrownianPaths(int n_noise, double horizon, double dt, std::uint64_t seed);

    int n_noise() const { return n_noise_; }
    int n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double horizon() const { return horizon_; }
    std::uint64_t seed() const { return seed_; }

    // increments[i * n_steps + k] = ΔW^i_k ~ N(0, dt), i < n_noise, k < n_steps.
    std::vector<double> increments(int path_index) const;

    // Same underlying paths at a coarser step (sums of `factor` fine increments).
    BrownianPaths coarsened(int factor) const;

private:
    int n_noise_;
    double horizon_;
    double dt_;
    std::uint64_t seed_;
    int n_steps_;
    int coarsen_factor_ = 1;
};

BrownianPaths sample_brownian(int n_noise, double horizon, double dt, std::uint64_t seed);

// Deterministic normal draws used by BrownianPaths (Box-Muller over a
// splitmix-seeded mt19937_64; identical across standard libraries).
void fill_normals(std::uint64_t key, std::size_t count, double stddev, double* out);
std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace sct
