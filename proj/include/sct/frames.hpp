#pragma once

#include <string>
#include <vector>

#include "sct/geometry.hpp"

namespace sct {

// Local h-orthonormal frame on one partition patch.
struct FramePatch {
    int patch = 0;
    std::vector<VectorField> frame;  // d fields, orthonormal w.r.t. h on supp α_patch
};

// Noise vector fields a_1..a_N with precomputed divergences and
// bar_a_i = (Div_h a_i) a_i.
struct NoiseFrame {
    enum class Kind { partition, embedded_sphere, coordinate_torus };

    Kind kind = Kind::partition;
    const Manifold* M = nullptr;
    std::vector<VectorField> a;
    std::vector<ScalarField> div_a;
    std::vector<VectorField> bar_a;

    int N() const { return int(a.size()); }
};

FramePatch gram_schmidt_frame(const Manifold& M, int chart);

// The bumps α_j with Σ_j α_j² = 1, as scalar fields; verifies there is no
// cover gap on a sample grid.
std::vector<ScalarField> squared_partition(const Manifold& M);

// a_i = √2 α_j E_{p_j,i}, N = d·L, extended by zero outside the supports.
NoiseFrame build_partition_frame(const Manifold& M);
// The three ambient projection fields √2(e_i − (e_i·x)x) on S².
NoiseFrame build_embedded_sphere_frame(const Manifold& M);
// a_i = √2 ∂_i on the flat torus.
NoiseFrame build_coordinate_torus_frame(const Manifold& M);
// kind = "partition" | "embedded" | "coordinate"
NoiseFrame build_frame(const Manifold& M, const std::string& kind);

// Λ_i(ψ) = Div_h( Div_h(ψ a_i) a_i ).
ScalarField lambda_op(const Manifold& M, const NoiseFrame& fr, int i, const ScalarField& psi);
// bar_a_i(ψ) = (Div_h a_i) a_i(ψ).
double bar_a_apply(const Manifold& M, const NoiseFrame& fr, int i, const ScalarField& psi,
                   int chart, const Vec& x);

// |½ Σ_i a_i(a_i(ψ)) − Δ_h ψ + ½ Σ_i bar_a_i(ψ)| at x.
double ellipticity_residual(const Manifold& M, const NoiseFrame& fr, const ScalarField& psi,
                            int chart, const Vec& x);

// |Σ_i (X,a_i)_h² − 2|X|_h²| / |X|_h².
double section_identity_residual(const Manifold& M, const NoiseFrame& fr,
                                 int chart, const Vec& x, const Vec& X);

}  // namespace sct
