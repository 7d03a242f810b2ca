#include "sct/spde.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sct {

namespace {

double time_div(const Manifold& M, const TimeVectorField& u, double t, int chart, const Vec& x) {
    if (u.div_h) return u.div_h(t, chart, x);
    // FD fallback through the geometry divergence formula at frozen time.
    VectorField frozen;
    frozen.comp = [&u, t](int c, const Vec& y) { return u.comp(t, c, y); };
    return div(M, frozen).value(chart, x);
}

struct StepEval {
    Vec drift;                  // u at the given point
    std::vector<Vec> noise;     // a_i at the given point
};

void eval_fields(const TimeVectorField& u, const NoiseFrame* frame, double t, int chart,
                 const Vec& x, StepEval& out) {
    out.drift = u.comp(t, chart, x);
    if (frame) {
        out.noise.resize(frame->N());
        for (int i = 0; i < frame->N(); ++i) out.noise[i] = frame->a[i].comp(chart, x);
    }
}

}  // namespace

MPoint strat_step(const Manifold& M, const MPoint& p, const TimeVectorField& u,
                  const NoiseFrame* frame, std::span<const double> dW, double dt, double t) {
    StepEval e0, e1;
    eval_fields(u, frame, t + dt, p.chart, p.x, e0);
    Vec pred = p.x - dt * e0.drift;
    if (frame)
        for (int i = 0; i < frame->N(); ++i) pred = pred - dW[i] * e0.noise[i];
    eval_fields(u, frame, t, p.chart, pred, e1);
    Vec y = p.x - (0.5 * dt) * (e0.drift + e1.drift);
    if (frame)
        for (int i = 0; i < frame->N(); ++i) y = y - (0.5 * dW[i]) * (e0.noise[i] + e1.noise[i]);
    return M.normalize({p.chart, y});
}

MPoint forward_step(const Manifold& M, const MPoint& p, const TimeVectorField& u,
                    const NoiseFrame* frame, std::span<const double> dW, double dt, double t,
                    double* exponent) {
    StepEval e0, e1;
    eval_fields(u, frame, t, p.chart, p.x, e0);
    Vec pred = p.x + dt * e0.drift;
    if (frame)
        for (int i = 0; i < frame->N(); ++i) pred = pred + dW[i] * e0.noise[i];
    eval_fields(u, frame, t + dt, p.chart, pred, e1);
    Vec y = p.x + (0.5 * dt) * (e0.drift + e1.drift);
    if (frame)
        for (int i = 0; i < frame->N(); ++i) y = y + (0.5 * dW[i]) * (e0.noise[i] + e1.noise[i]);
    if (exponent) {
        double E = 0.5 * dt * (time_div(M, u, t, p.chart, p.x) +
                               time_div(M, u, t + dt, p.chart, y));
        if (frame)
            for (int i = 0; i < frame->N(); ++i)
                E += 0.5 * dW[i] *
                     (frame->a[i].div_h(p.chart, p.x) + frame->a[i].div_h(p.chart, y));
        *exponent -= E;
    }
    return M.normalize({p.chart, y});
}

// ---- particles -------------------------------------------------------------------

ParticleEnsemble make_ensemble(const Manifold& M, const std::vector<MPoint>& starts,
                               const ScalarField& rho0) {
    ParticleEnsemble ens;
    ens.particles.reserve(starts.size());
    for (const MPoint& p : starts) {
        const MPoint q = M.normalize(p);
        ens.particles.push_back({q, 0.0, rho0.value(q.chart, q.x)});
    }
    return ens;
}

void evolve_step(const Manifold& M, ParticleEnsemble& ens, const TimeVectorField& u,
                 const NoiseFrame* frame, std::span<const double> dW, double dt, double t,
                 double overflow_limit) {
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
        Particle& p = ens.particles[i];
        p.pos = forward_step(M, p.pos, u, frame, dW, dt, t, &p.weight_exponent);
        if (!std::isfinite(p.weight_exponent) || std::abs(p.weight_exponent) > overflow_limit) {
            ens.overflow_events.push_back({t + dt, i});
            p.weight_exponent = std::clamp(p.weight_exponent, -overflow_limit, overflow_limit);
        }
    }
}

ParticleEnsemble evolve_characteristics(const Manifold& M, ParticleEnsemble ens,
                                        const TimeVectorField& u, const NoiseFrame* frame,
                                        const BrownianPaths& paths, int path_index) {
    const int K = paths.n_steps();
    const int N = frame ? frame->N() : 0;
    const auto inc = paths.increments(path_index);
    std::vector<double> dWk(std::max(N, 1));
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < N; ++i) dWk[i] = inc[std::size_t(i) * K + k];
        evolve_step(M, ens, u, frame, {dWk.data(), std::size_t(N)}, paths.dt(), k * paths.dt());
    }
    return ens;
}

// ---- grid solver -----------------------------------------------------------------

namespace {

// Foot point and Jacobian exponent of one backward step from (t_new, node).
inline void foot_and_exponent(const Manifold& M, const AtlasGrid& grid, const MPoint& node,
                              const TimeVectorField& u, const NoiseFrame* frame,
                              std::span<const double> dWk, double dt, double t_new,
                              MPoint& foot, double& E) {
    (void)grid;
    const double t_old = t_new - dt;
    StepEval e0, e1;
    eval_fields(u, frame, t_new, node.chart, node.x, e0);
    Vec pred = node.x - dt * e0.drift;
    if (frame)
        for (int i = 0; i < frame->N(); ++i) pred = pred - dWk[i] * e0.noise[i];
    eval_fields(u, frame, t_old, node.chart, pred, e1);
    Vec y = node.x - (0.5 * dt) * (e0.drift + e1.drift);
    if (frame)
        for (int i = 0; i < frame->N(); ++i)
            y = y - (0.5 * dWk[i]) * (e0.noise[i] + e1.noise[i]);
    foot = {node.chart, y};
    E = 0.5 * dt * (time_div(M, u, t_new, node.chart, node.x) +
                    time_div(M, u, t_old, node.chart, y));
    if (frame)
        for (int i = 0; i < frame->N(); ++i)
            E += 0.5 * dWk[i] *
                 (frame->a[i].div_h(node.chart, node.x) + frame->a[i].div_h(node.chart, y));
}

}  // namespace

void step_density_serial(const AtlasGrid& grid, std::span<const double> rho_old,
                         std::span<double> rho_new, const TimeVectorField& u,
                         const NoiseFrame* frame, std::span<const double> dW, double dt,
                         double t_new) {
    const Manifold& M = grid.manifold();
    MPoint foot;
    double E;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        foot_and_exponent(M, grid, grid.node(j), u, frame, dW, dt, t_new, foot, E);
        rho_new[j] = std::exp(-E) * grid.interpolate(rho_old, foot);
    }
}

void step_density_omp(const AtlasGrid& grid, std::span<const double> rho_old,
                      std::span<double> rho_new, const TimeVectorField& u,
                      const NoiseFrame* frame, std::span<const double> dW, double dt,
                      double t_new) {
    const Manifold& M = grid.manifold();
    const std::ptrdiff_t n = std::ptrdiff_t(grid.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        MPoint foot;
        double E;
        foot_and_exponent(M, grid, grid.node(std::size_t(j)), u, frame, dW, dt, t_new, foot, E);
        rho_new[std::size_t(j)] = std::exp(-E) * grid.interpolate(rho_old, foot);
    }
}

PathwiseResult pathwiseSolveImpl(const AtlasGrid& grid, std::vector<double> rho,
                                 const TimeVectorField& u, const NoiseFrame* frame,
                                 const BrownianPaths& paths, int path_index,
                                 const SolveOptions& opts, const StateCallback& on_state) {
    const int K = paths.n_steps();
    const int N = frame ? frame->N() : 0;
    const double dt = paths.dt();
    const auto inc = paths.increments(path_index);
    const double cap = std::exp(std::min(700.0, opts.overflow_limit));

    PathwiseResult result;
    if (on_state) on_state(0, 0.0, rho);
    std::vector<double> rho_new(rho.size());
    std::vector<double> dWk(std::max(N, 1));
    for (int k = 0; k < K; ++k) {
        const double t_new = (k + 1) * dt;
        for (int i = 0; i < N; ++i) dWk[i] = inc[std::size_t(i) * K + k];
        const std::span<const double> dw{dWk.data(), std::size_t(N)};
        if (opts.parallel)
            step_density_omp(grid, rho, rho_new, u, frame, dw, dt, t_new);
        else
            step_density_serial(grid, rho, rho_new, u, frame, dw, dt, t_new);
        for (std::size_t j = 0; j < rho_new.size(); ++j) {
            if (!std::isfinite(rho_new[j]) || std::abs(rho_new[j]) > cap) {
                result.overflow_events.push_back({t_new, j});
                rho_new[j] = std::isfinite(rho_new[j]) ? std::clamp(rho_new[j], -cap, cap) : 0.0;
            }
        }
        rho.swap(rho_new);
        if (on_state) on_state(k + 1, t_new, rho);
    }
    result.rho_final = std::move(rho);
    return result;
}

PathwiseResult pathwise_solve(const AtlasGrid& grid, std::vector<double> rho0,
                              const TimeVectorField& u, const NoiseFrame* frame,
                              const BrownianPaths& paths, int path_index,
                              const SolveOptions& opts, const StateCallback& on_state) {
    return pathwiseSolveImpl(grid, std::move(rho0), u, frame, paths, path_index, opts, on_state);
}

// ---- weak-form residual ------------------------------------------------------------

WeakFormAccumulator::WeakFormAccumulator(const AtlasGrid& grid, const NoiseFrame* frame,
                                         const TimeVectorField& u, const ScalarField& psi,
                                         const BrownianPaths& paths, int path_index)
    : grid_(&grid),
      n_noise_(frame ? frame->N() : 0),
      n_steps_(paths.n_steps()),
      dt_(paths.dt()),
      dW_(paths.increments(path_index)),
      u_(&u) {
    const Manifold& M = grid.manifold();
    const std::size_t n = grid.size();
    w_psi_.resize(n);
    dpsi1_.resize(n);
    dpsi2_.resize(n);
    w_corr_.assign(n, 0.0);
    w_apsi_.assign(std::size_t(n_noise_) * n, 0.0);
    ScalarField lap = laplace(M, psi);
    for (std::size_t j = 0; j < n; ++j) {
        const MPoint& p = grid.node(j);
        const double w = grid.weight(j);
        w_psi_[j] = w * psi.value(p.chart, p.x);
        const Vec dp = scalar_partials(M, psi, p.chart, p.x);
        dpsi1_[j] = w * dp[0];
        dpsi2_[j] = w * dp[1];
        if (w == 0.0) continue;
        double corr = lap.value(p.chart, p.x);
        if (frame)
            for (int i = 0; i < n_noise_; ++i) {
                const Vec ai = frame->a[i].comp(p.chart, p.x);
                const double apsi = dot(ai, dp);
                w_apsi_[std::size_t(i) * n + j] = w * apsi;
                corr -= 0.5 * frame->a[i].div_h(p.chart, p.x) * apsi;
            }
        w_corr_[j] = w * corr;
    }
    mart_left_.assign(std::max(n_noise_, 1), 0.0);
    mart_mid_.assign(std::max(n_noise_, 1), 0.0);
    prev_Y_.assign(std::max(n_noise_, 1), 0.0);
}

void WeakFormAccumulator::operator()(int k, double t, std::span<const double> rho) {
    const std::size_t n = grid_->size();
    const int K = n_steps_;
    double I = 0.0, U = 0.0, C = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        I += w_psi_[j] * rho[j];
        C += w_corr_[j] * rho[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
        const MPoint& p = grid_->node(j);
        const Vec uv = u_->comp(t, p.chart, p.x);
        U += rho[j] * (uv[0] * dpsi1_[j] + uv[1] * dpsi2_[j]);
    }
    std::vector<double> Y(std::max(n_noise_, 1), 0.0);
    for (int i = 0; i < n_noise_; ++i) {
        double s = 0.0;
        const double* col = w_apsi_.data() + std::size_t(i) * n;
        for (std::size_t j = 0; j < n; ++j) s += col[j] * rho[j];
        Y[i] = s;
    }
    if (k == 0) head_ = I;
    tail_ = I;
    if (k > 0 && n_noise_ > 0) {
        for (int i = 0; i < n_noise_; ++i) {
            const double dwi = dW_[std::size_t(i) * K + (k - 1)];
            mart_left_[i] += prev_Y_[i] * dwi;
            mart_mid_[i] += 0.5 * (prev_Y_[i] + Y[i]) * dwi;
        }
    }
    if (k < K) {
        u_terms_.push_back(U * dt_);
        corr_terms_.push_back(C * dt_);
    }
    prev_Y_ = Y;
    last_k_ = k;
}

ResidualReport WeakFormAccumulator::report() const {
    const double udt = pairwise_sum(u_terms_);
    const double cdt = pairwise_sum(corr_terms_);
    double mleft = 0.0, mmid = 0.0;
    for (int i = 0; i < n_noise_; ++i) {
        mleft += mart_left_[i];
        mmid += mart_mid_[i];
    }
    ResidualReport r;
    r.residual = std::abs(tail_ - head_ - udt - mmid);
    r.residual_dt_form = std::abs(tail_ - head_ - udt - mleft - cdt);
    return r;
}

// ---- renormalized residual ----------------------------------------------------------

Renormalization identity_renormalization() {
    Renormalization r;
    r.F = [](double x) { return x; };
    r.Fp = [](double) { return 1.0; };
    r.Fpp = [](double) { return 0.0; };
    return r;
}

RenormAccumulator::RenormAccumulator(const AtlasGrid& grid, const NoiseFrame* frame,
                                     const TimeVectorField& u, const Renormalization& F,
                                     const SpaceTimeTest& psi, const BrownianPaths& paths,
                                     int path_index)
    : grid_(&grid),
      M_(&grid.manifold()),
      n_noise_(frame ? frame->N() : 0),
      n_steps_(paths.n_steps()),
      dt_(paths.dt()),
      dW_(paths.increments(path_index)),
      F_(F),
      psi_(psi),
      u_(&u) {
    const Manifold& M = grid.manifold();
    const std::size_t n = grid.size();
    w_phi_.resize(n);
    w_uphi_dyn1_.resize(n);
    w_uphi_dyn2_.resize(n);
    w_corr4_.assign(n, 0.0);
    w_lam1_.assign(n, 0.0);
    w_divsq_.assign(n, 0.0);
    w_barphi_.assign(n, 0.0);
    w_divu_phi_static_.assign(n, 0.0);
    w_aphi_.assign(std::size_t(n_noise_) * n, 0.0);
    w_divaphi_.assign(std::size_t(n_noise_) * n, 0.0);
    if (!u.div_h)
        throw std::runtime_error("renormalized residual needs an analytic Div_h u");
    ScalarField lap = laplace(M, psi.phi);
    std::vector<ScalarField> divbar;
    if (frame)
        for (int i = 0; i < n_noise_; ++i) divbar.push_back(div(M, frame->bar_a[i]));
    for (std::size_t j = 0; j < n; ++j) {
        const MPoint& p = grid.node(j);
        const double w = grid.weight(j);
        const double phi = psi_.phi.value(p.chart, p.x);
        w_phi_[j] = w * phi;
        const Vec dp = scalar_partials(M, psi_.phi, p.chart, p.x);
        w_uphi_dyn1_[j] = w * dp[0];
        w_uphi_dyn2_[j] = w * dp[1];
        w_divu_phi_static_[j] = w * phi;  // Div_h u applied per step (u may be t-dependent)
        if (w == 0.0) continue;
        double corr4 = lap.value(p.chart, p.x);
        if (frame) {
            for (int i = 0; i < n_noise_; ++i) {
                const Vec ai = frame->a[i].comp(p.chart, p.x);
                const double diva = frame->a[i].div_h(p.chart, p.x);
                const double aphi = dot(ai, dp);
                w_aphi_[std::size_t(i) * n + j] = w * aphi;
                w_divaphi_[std::size_t(i) * n + j] = w * diva * phi;
                corr4 -= 0.5 * diva * aphi;
                w_lam1_[j] += w * 0.5 * divbar[i].value(p.chart, p.x) * phi;
                w_divsq_[j] += w * 0.5 * diva * diva * phi;
                w_barphi_[j] += w * diva * aphi;
            }
        }
        w_corr4_[j] = w * corr4;
    }
    mart_left_.assign(std::max(n_noise_, 1), 0.0);
    mart_mid_.assign(std::max(n_noise_, 1), 0.0);
    prev_M_.assign(std::max(n_noise_, 1), 0.0);
}

void RenormAccumulator::operator()(int k, double t, std::span<const double> rho) {
    const std::size_t n = grid_->size();
    const int K = n_steps_;
    const double th = psi_.theta(t);
    const double thd = psi_.theta_dot(t);

    double A = 0.0, U = 0.0, G5 = 0.0, C4 = 0.0, C7 = 0.0, C8 = 0.0, C9 = 0.0;
    std::vector<double> Mi(std::max(n_noise_, 1), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double r = rho[j];
        const double Fr = F_.F(r);
        const double Gr = r * F_.Fp(r) - Fr;
        A += w_phi_[j] * Fr;
        const MPoint& p = grid_->node(j);
        const Vec uv = u_->comp(t, p.chart, p.x);
        U += Fr * (uv[0] * w_uphi_dyn1_[j] + uv[1] * w_uphi_dyn2_[j]);
        G5 += Gr * w_divu_phi_static_[j] * u_->div_h(t, p.chart, p.x);
        C4 += w_corr4_[j] * Fr;
        C7 += w_lam1_[j] * Gr;
        C8 += w_divsq_[j] * F_.Fpp(r) * r * r;
        C9 += w_barphi_[j] * Gr;
        for (int i = 0; i < n_noise_; ++i)
            Mi[i] += w_aphi_[std::size_t(i) * n + j] * Fr - w_divaphi_[std::size_t(i) * n + j] * Gr;
    }
    const double B = A * thd;  // ∫ F(ρ) ∂_t ψ with ψ = θ(t)φ(x)
    A *= th;
    U *= th;
    G5 *= th;
    C4 *= th;
    C7 *= th;
    C8 *= th;
    C9 *= th;
    for (auto& m : Mi) m *= th;

    if (k == 0) head_ = A;
    tail_ = A;
    if (k > 0 && n_noise_ > 0) {
        for (int i = 0; i < n_noise_; ++i) {
            const double dwi = dW_[std::size_t(i) * K + (k - 1)];
            mart_left_[i] += prev_M_[i] * dwi;
            mart_mid_[i] += 0.5 * (prev_M_[i] + Mi[i]) * dwi;
        }
    }
    if (k < K) {
        dt_terms_.push_back((B + U - G5) * dt_);
        dt_terms_printed_.push_back((B + U - G5 + C4 - C7 + C8 - C9) * dt_);
    }
    prev_M_ = Mi;
    last_k_ = k;
}

ResidualReport RenormAccumulator::report() const {
    double mleft = 0.0, mmid = 0.0;
    for (int i = 0; i < n_noise_; ++i) {
        mleft += mart_left_[i];
        mmid += mart_mid_[i];
    }
    ResidualReport r;
    r.residual = std::abs(tail_ - head_ - pairwise_sum(dt_terms_) - mmid);
    r.residual_dt_form =
        std::abs(tail_ - head_ - pairwise_sum(dt_terms_printed_) - mleft);
    return r;
}

}  // namespace sct
