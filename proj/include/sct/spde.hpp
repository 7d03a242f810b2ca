#pragma once

#include <functional>
#include <optional>

#include "sct/frames.hpp"
#include "sct/geometry.hpp"
#include "sct/paths.hpp"

namespace sct {

// One Heun (midpoint predictor-corrector) step of the backward characteristic
// SDE dξ = −u dt − Σ a_i ∘ dW, read with the increments of [t, t+dt]. The
// result is normalized (torus wrap / sphere chart switch). With `frame`
// null the step is the plain Heun ODE step for dξ = −u dt.
MPoint strat_step(const Manifold& M, const MPoint& p, const TimeVectorField& u,
                  const NoiseFrame* frame, std::span<const double> dW, double dt, double t);

// Forward solution flow dX = +u dt + Σ a_i ∘ dW (the characteristics along
// which the density is transported). `exponent` accumulates the pathwise
// Jacobian exponent −∫Div_h u dt − Σ∫Div_h a_i ∘ dW along the step.
MPoint forward_step(const Manifold& M, const MPoint& p, const TimeVectorField& u,
                    const NoiseFrame* frame, std::span<const double> dW, double dt, double t,
                    double* exponent);

// ---- particle representation ---------------------------------------------------

struct Particle {
    MPoint pos;
    double weight_exponent = 0.0;
    double rho0 = 0.0;
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    std::vector<std::pair<double, std::size_t>> overflow_events;  // (t, particle)
    double density(std::size_t i) const {
        return std::exp(particles[i].weight_exponent) * particles[i].rho0;
    }
};

ParticleEnsemble make_ensemble(const Manifold& M, const std::vector<MPoint>& starts,
                               const ScalarField& rho0);

// Advance every particle along the forward characteristics over one step.
void evolve_step(const Manifold& M, ParticleEnsemble& ens, const TimeVectorField& u,
                 const NoiseFrame* frame, std::span<const double> dW, double dt, double t,
                 double overflow_limit = 700.0);

// Full trajectory over one Brownian path.
ParticleEnsemble evolve_characteristics(const Manifold& M, ParticleEnsemble ens,
                                        const TimeVectorField& u, const NoiseFrame* frame,
                                        const BrownianPaths& paths, int path_index);

// ---- grid solver ----------------------------------------------------------------

struct SolveOptions {
    bool parallel = true;
    double overflow_limit = 700.0;  // |log ρ| cap before an overflow flag
};

// Called with the state at every time level: k = 0 (initial data) .. n_steps.
using StateCallback = std::function<void(int k, double t, std::span<const double> rho)>;

struct PathwiseResult {
    std::vector<double> rho_final;
    std::vector<std::pair<double, std::size_t>> overflow_events;  // (t, node)
};

// Semi-Lagrangian solver: each grid node traces one backward characteristic
// step (strat_step) and applies the flow-Jacobian exponent; cubic
// interpolation at the foot point.
PathwiseResult pathwise_solve(const AtlasGrid& grid, std::vector<double> rho0,
                              const TimeVectorField& u, const NoiseFrame* frame,
                              const BrownianPaths& paths, int path_index,
                              const SolveOptions& opts = {},
                              const StateCallback& on_state = nullptr);

// Serial reference implementation of the node sweep (kept for testing the
// OpenMP kernel and for the benchmark).
void step_density_serial(const AtlasGrid& grid, std::span<const double> rho_old,
                         std::span<double> rho_new, const TimeVectorField& u,
                         const NoiseFrame* frame, std::span<const double> dW, double dt,
                         double t_new);
void step_density_omp(const AtlasGrid& grid, std::span<const double> rho_old,
                      std::span<double> rho_new, const TimeVectorField& u,
                      const NoiseFrame* frame, std::span<const double> dW, double dt,
                      double t_new);

// ---- weak-form residuals ---------------------------------------------------------

struct ResidualReport {
    double residual = 0.0;        // cross-variation-consistent quadrature
    double residual_dt_form = 0.0;  // plain dt-weighted Itô correction terms
};

// Accumulates the discrete weak formulation of the SPDE against a fixed ψ
// while a pathwise solve runs. Feed it as the on_state callback.
class WeakFormAccumulator {
public:
    WeakFormAccumulator(const AtlasGrid& grid, const NoiseFrame* frame,
                        const TimeVectorField& u, const ScalarField& psi,
                        const BrownianPaths& paths, int path_index);

    void operator()(int k, double t, std::span<const double> rho);
    ResidualReport report() const;

private:
    const AtlasGrid* grid_;
    int n_noise_;
    int n_steps_;
    double dt_;
    std::vector<double> dW_;         // all increments of the path
    std::vector<double> w_psi_;      // weight · ψ
    std::vector<double> w_apsi_;     // weight · a_i(ψ), concatenated per i
    std::vector<double> w_corr_;     // weight · (Δψ − ½Σ bar_a_i(ψ))
    std::vector<double> dpsi1_, dpsi2_;  // weight · ∂_i ψ for the u-term
    const TimeVectorField* u_;
    double head_ = 0.0, tail_ = 0.0;
    std::vector<double> u_terms_, corr_terms_;
    std::vector<double> mart_left_, mart_mid_;  // per-noise accumulators
    std::vector<double> prev_Y_;
    int last_k_ = -1;
};

// Time-dependent test function θ(t)·φ(x) for the renormalized form.
struct SpaceTimeTest {
    ScalarField phi;
    std::function<double(double)> theta;      // θ(t)
    std::function<double(double)> theta_dot;  // θ'(t)
};

struct Renormalization {
    std::function<double(double)> F;
    std::function<double(double)> Fp;
    std::function<double(double)> Fpp;
    double G(double x) const { return x * Fp(x) - F(x); }
};

Renormalization identity_renormalization();

// Discrete residual of the renormalized space-time weak formulation
// (all nine right-hand-side terms, time-dependent test function).
class RenormAccumulator {
public:
    RenormAccumulator(const AtlasGrid& grid, const NoiseFrame* frame, const TimeVectorField& u,
                      const Renormalization& F, const SpaceTimeTest& psi,
                      const BrownianPaths& paths, int path_index);

    void operator()(int k, double t, std::span<const double> rho);
    ResidualReport report() const;

private:
    const AtlasGrid* grid_;
    const Manifold* M_;
    int n_noise_;
    int n_steps_;
    double dt_;
    std::vector<double> dW_;
    Renormalization F_;
    SpaceTimeTest psi_;
    const TimeVectorField* u_;
    // node arrays (all premultiplied by quadrature weights)
    std::vector<double> w_phi_, w_uphi_dyn1_, w_uphi_dyn2_;
    std::vector<double> w_aphi_, w_divaphi_;  // per noise, concatenated
    std::vector<double> w_corr4_;             // ½Σ a_i(a_i φ)
    std::vector<double> w_lam1_;              // ½ΣΛ_i(1)·φ
    std::vector<double> w_divsq_;             // ½Σ (div a_i)²·φ
    std::vector<double> w_barphi_;            // Σ bar_a_i(φ)
    std::vector<double> w_divu_phi_static_;   // weight · φ, paired with Div_h u per step
    double head_ = 0.0, tail_ = 0.0;
    std::vector<double> dt_terms_, dt_terms_printed_;
    std::vector<double> mart_left_, mart_mid_;
    std::vector<double> prev_M_;
    int last_k_ = -1;
};

}  // namespace sct
