#pragma once

#include <functional>
#include <memory>

#include "sct/core.hpp"

namespace sct {

// Point on the manifold, represented in one chart of the atlas.
struct MPoint {
    int chart = 0;
    Vec x{0.0, 0.0};
};

// Scalar field given per chart. Partial-derivative callbacks are optional;
// operators fall back to centered differences when they are absent.
struct ScalarField {
    std::function<double(int chart, const Vec&)> value;
    std::function<Vec(int chart, const Vec&)> partials;        // ∂_i f
    std::function<Mat(int chart, const Vec&)> second_partials; // ∂_i ∂_j f
};

// Vector field with contravariant chart components X^i.
struct VectorField {
    std::function<Vec(int chart, const Vec&)> comp;
    std::function<double(int chart, const Vec&)> div_h; // optional analytic divergence
    std::function<Mat(int chart, const Vec&)> jac;      // optional J[i][j] = ∂_j X^i
};

// Time-dependent velocity field.
struct TimeVectorField {
    std::function<Vec(double t, int chart, const Vec&)> comp;
    std::function<double(double t, int chart, const Vec&)> div_h; // optional
};

struct MetricData {
    Mat h;
    Mat h_inv;
    double sqrt_det;
};

// Chart-based closed manifold. Built-ins: flat torus T^d (d = 1, 2) with a
// single periodic chart, and the round unit sphere S^2 with two stereographic
// charts (chart 0 centered at the north pole, chart 1 at the south pole;
// transition z -> z/|z|^2 on the overlap).
class Manifold {
public:
    virtual ~Manifold() = default;

    int dim() const { return dim_; }
    int n_charts() const { return n_charts_; }
    int n_patches() const { return n_charts_; } // partition patches coincide with charts
    const std::string& name() const { return name_; }
    double volume() const { return volume_; }

    virtual void metric(int chart, const Vec& x, MetricData& out) const = 0;
    virtual void christoffel(int chart, const Vec& x, Gamma& out) const = 0;
    virtual bool in_chart(int chart, const Vec& x) const = 0;
    virtual Vec transition(int from, int to, const Vec& x) const = 0;
    virtual Mat transition_jacobian(int from, int to, const Vec& x) const = 0;

    // Partition-of-unity bump α_j (Σ_j α_j² = 1), evaluated at a point given
    // in an arbitrary chart. Patches are indexed like charts.
    virtual double partition_alpha(int patch, int chart, const Vec& x) const = 0;

    // Canonical storage form (torus: wrap into [0, 2π)^d; sphere: switch to
    // the chart with the smaller stereographic radius when outside the safe
    // region, with 10% hysteresis against thrashing).
    virtual MPoint normalize(const MPoint& p) const = 0;

    // Ricci lower-bound constant ε with Ric ≥ -ε² h (0 on T^d, stored for
    // the smoothing bounds; the unit sphere has Ric = h, so ε = 1 works
    // as a valid constant there as well).
    double ricci_epsilon() const { return ricci_eps_; }

protected:
    int dim_ = 2;
    int n_charts_ = 1;
    double volume_ = 0.0;
    double ricci_eps_ = 0.0;
    std::string name_;
};

std::unique_ptr<Manifold> make_torus(int d);
std::unique_ptr<Manifold> make_sphere2();
std::unique_ptr<Manifold> make_manifold(const std::string& name); // "torus1"|"torus2"|"sphere2"

// ---- differential operators -------------------------------------------------

MetricData metric_data(const Manifold& M, int chart, const Vec& x);
Gamma christoffel(const Manifold& M, int chart, const Vec& x);
// Finite-difference oracle: Christoffel symbols from centered differences of
// the metric plugged into the coordinate formula.
Gamma christoffel_fd(const Manifold& M, int chart, const Vec& x, double step = 1e-5);

// ∂_i f, analytic when the field provides it, centered differences otherwise.
Vec scalar_partials(const Manifold& M, const ScalarField& f, int chart, const Vec& x);
Mat scalar_second_partials(const Manifold& M, const ScalarField& f, int chart, const Vec& x);

VectorField grad(const Manifold& M, const ScalarField& f);
ScalarField div(const Manifold& M, const VectorField& X);
ScalarField laplace(const Manifold& M, const ScalarField& f);

double directional(const Manifold& M, const VectorField& X, const ScalarField& f,
                   int chart, const Vec& x);
// X(X(f)) via the nested directional derivative.
double second_directional_nested(const Manifold& M, const VectorField& X, const ScalarField& f,
                                 int chart, const Vec& x);
// X(X(f)) via the covariant Hessian: (∇²f)(X,X) + (∇_X X)(f).
double second_directional_hessian(const Manifold& M, const VectorField& X, const ScalarField& f,
                                  int chart, const Vec& x);

// ---- quadrature grid ---------------------------------------------------------

// Uniform per-chart grids carrying the quadrature (trapezoid on the periodic
// torus; cell-centered midpoint weighted by the squared partition of unity on
// the sphere). The same nodes serve as the density grid of the solvers.
class AtlasGrid {
public:
    AtlasGrid(const Manifold& M, int n_per_axis);

    const Manifold& manifold() const { return *M_; }
    int n_per_axis() const { return n_; }
    std::size_t size() const { return nodes_.size(); }
    const MPoint& node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }  // pou · √det h · cell
    std::span<const double> weights() const { return weights_; }
    double spacing() const { return h_; }             // grid spacing per axis
    double sphere_extent() const { return extent_; }  // half-width of the sphere chart box

    std::size_t chart_offset(int chart) const { return offsets_[chart]; }
    std::size_t index_of(int chart, int i, int j) const;
    // Node coordinate along one axis.
    double axis_coord(int idx) const;

    // Cubic (Catmull-Rom) interpolation of nodal values at an arbitrary point.
    double interpolate(std::span<const double> values, const MPoint& p) const;

    double integrate(const ScalarField& f) const;
    double integrate_values(std::span<const double> values) const;
    // ∫ f² dV from nodal values.
    double l2_norm_sq(std::span<const double> values) const;

    // Sample a scalar field into nodal values.
    std::vector<double> sample(const ScalarField& f) const;

private:
    const Manifold* M_;
    int n_;
    double h_;
    double extent_ = 0.0;
    std::vector<MPoint> nodes_;
    std::vector<double> weights_;
    std::vector<std::size_t> offsets_;
};

// Helpers for building analytic fields on the built-in manifolds.

// Scalar field on S² from an ambient function F(q), q ∈ R³, with analytic
// gradient and Hessian; chart partials come from the chain rule through the
// stereographic embedding.
ScalarField ambient_scalar(std::function<double(const std::array<double, 3>&)> F,
                           std::function<std::array<double, 3>(const std::array<double, 3>&)> gradF,
                           std::function<std::array<std::array<double, 3>, 3>(const std::array<double, 3>&)> hessF);

// Tangent vector field on S² from an ambient field V(q) (must be tangent).
VectorField ambient_vector(std::function<std::array<double, 3>(const std::array<double, 3>&)> V);

// Stereographic embedding q(z) of chart `chart` and its derivatives.
std::array<double, 3> sphere_embed(int chart, const Vec& z);
void sphere_embed_derivs(int chart, const Vec& z, std::array<Vec, 3>& dq,
                         std::array<Mat, 3>* d2q);

}  // namespace sct
