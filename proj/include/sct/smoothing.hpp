#pragma once

#include <memory>

#include "sct/geometry.hpp"

namespace sct {

// Standard compactly supported unit-mass bump on [-1, 1].
double mollifier_eta(double s);
// Discrete mollifier weights η_τ((k)·dt), k = -radius..radius, normalized to
// sum exactly one. Sets `warned` when the time grid is coarser than τ.
std::vector<double> mollifier_weights(double tau, double dt, int& radius, bool* warned = nullptr);

// Discrete convolution of a time series with η_τ. With zero_extend the series
// is extended by zero outside its window (the velocity-smoothing convention);
// otherwise by its end values, which keeps constants exactly.
std::vector<double> time_mollify(std::span<const double> values, double dt, double tau,
                                 bool zero_extend = true, bool* warned = nullptr);

// Heat semigroup P_τ on nodal scalar data: exact Fourier multiplier on the
// torus, symmetrized spherical-harmonic projection on the sphere (multiplier
// e^{-λτ} on the band-limited part, identity on the complement).
class HeatSemigroup {
public:
    HeatSemigroup(const AtlasGrid& grid, int lmax = 32);
    ~HeatSemigroup();
    HeatSemigroup(const HeatSemigroup&) = delete;
    HeatSemigroup& operator=(const HeatSemigroup&) = delete;

    std::vector<double> apply(std::span<const double> values, double tau) const;
    // Projection onto the resolved band (identity on the torus).
    std::vector<double> project(std::span<const double> values) const;
    const AtlasGrid& grid() const { return *grid_; }

private:
    const AtlasGrid* grid_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ScalarField heat_smooth_scalar(const HeatSemigroup& P, const ScalarField& w, double tau);

struct GridVec {
    std::vector<double> c1, c2;  // contravariant components at grid nodes
};

GridVec sample_vector(const AtlasGrid& grid, const TimeVectorField& u, double t);

// Component-wise P_τ on the flat torus (the de Rham-Hodge semigroup on 1-forms
// is component-wise there). Curved manifolds are rejected.
GridVec heat_smooth_vector_flat(const HeatSemigroup& P, const GridVec& u, double tau);

// Chart-wise Gaussian mollification of a vector field on the sphere under the
// squared partition of unity (the smoothing device used in place of the
// de Rham-Hodge semigroup on curved manifolds).
GridVec chart_mollify_vector(const AtlasGrid& grid, const TimeVectorField& u, double t,
                             double tau);

// u_τ(t,x) = Σ_k η_τ(t - t'_k) E_τ u(t'_k, x) dt', with u extended by zero
// outside [0, T]. Flat torus only. The returned field interpolates
// precomputed slices; its div_h callback applies the same convolution to the
// divergence slices (Div E_τ u = P_τ Div u on the flat torus).
TimeVectorField smooth_velocity(const HeatSemigroup& P, const TimeVectorField& u, double T,
                                double tau, double slice_dt);

}  // namespace sct
