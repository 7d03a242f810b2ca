#include "sct/paths.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sct {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= c + 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(s);
    return h;
}

void fill_normals(std::uint64_t key, std::size_t count, double stddev, double* out) {
    std::mt19937_64 eng(key);
    // Box-Muller on raw uniforms; avoids std::normal_distribution, whose
    // algorithm is implementation-defined.
    const double inv = 1.0 / (double(std::mt19937_64::max()) + 1.0);
    std::size_t i = 0;
    while (i < count) {
        const double u1 = (double(eng()) + 0.5) * inv;  // in (0,1)
        const double u2 = (double(eng()) + 0.5) * inv;
        const double r = std::sqrt(-2.0 * std::log(u1));
        out[i++] = stddev * r * std::cos(kTwoPi * u2);
        if (i < count) out[i++] = stddev * r * std::sin(kTwoPi * u2);
    }
}

BrownianPaths::BrownianPaths(int n_noise, double horizon, double dt, std::uint64_t seed)
    : n_noise_(n_noise), horizon_(horizon), dt_(dt), seed_(seed) {
    if (dt <= 0.0) throw std::domain_error("sample_brownian: dt must be positive");
    if (horizon < dt) throw std::domain_error("sample_brownian: horizon shorter than one step");
    if (n_noise < 0) throw std::domain_error("sample_brownian: negative noise count");
    n_steps_ = int(std::llround(horizon / dt));
    if (std::abs(n_steps_ * dt - horizon) > 1e-9 * horizon)
        n_steps_ = int(std::ceil(horizon / dt - 1e-12));
}

std::vector<double> BrownianPaths::increments(int path_index) const {
    std::vector<double> inc(std::size_t(n_noise_) * n_steps_);
    const int fine_steps = n_steps_ * coarsen_factor_;
    std::vector<double> fine(fine_steps);
    const double fine_std = std::sqrt(dt_ / coarsen_factor_);
    for (int i = 0; i < n_noise_; ++i) {
        fill_normals(mix_keys(seed_, std::uint64_t(path_index), std::uint64_t(i)),
                     fine.size(), fine_std, fine.data());
        for (int k = 0; k < n_steps_; ++k) {
            double s = 0.0;
            for (int m = 0; m < coarsen_factor_; ++m) s += fine[k * coarsen_factor_ + m];
            inc[std::size_t(i) * n_steps_ + k] = s;
        }
    }
    return inc;
}

BrownianPaths BrownianPaths::coarsened(int factor) const {
    if (factor < 1 || n_steps_ % factor != 0)
        throw std::domain_error("coarsened: factor must divide the step count");
    BrownianPaths out = *this;
    out.n_steps_ = n_steps_ / factor;
    out.dt_ = dt_ * factor;
    out.coarsen_factor_ = coarsen_factor_ * factor;
    return out;
}

BrownianPaths sample_brownian(int n_noise, double horizon, double dt, std::uint64_t seed) {
    return BrownianPaths(n_noise, horizon, dt, seed);
}

}  // namespace sct
