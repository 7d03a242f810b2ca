#include "sct/geometry.hpp"

#include <algorithm>
#include <cassert>

namespace sct {

namespace {

double fd_step(double coord) { return 1e-5 * std::max(1.0, std::abs(coord)); }

// Quintic smoothstep, C² with vanishing first and second derivatives at both
// ends: 1 on t<=0, 0 on t>=1.
double smoothstep_down(double t) {
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    const double t3 = t * t * t;
    return 1.0 - t3 * (10.0 - 15.0 * t + 6.0 * t * t);
}

constexpr double kThetaLo = 75.0 * kPi / 180.0;   // bump band on S², 30° overlap
constexpr double kThetaHi = 105.0 * kPi / 180.0;
constexpr double kSafeRadius = 2.0;               // chart-switch radius
constexpr double kSwitchHysteresis = 1.1;

class Torus final : public Manifold {
public:
    explicit Torus(int d) {
        if (d < 1 || d > 2) throw std::domain_error("torus dimension must be 1 or 2");
        dim_ = d;
        n_charts_ = 1;
        volume_ = (d == 1) ? kTwoPi : kTwoPi * kTwoPi;
        ricci_eps_ = 0.0;
        name_ = (d == 1) ? "torus1" : "torus2";
    }

    void metric(int chart, const Vec&, MetricData& out) const override {
        check_chart(chart);
        out.h = mat_identity();
        out.h_inv = mat_identity();
        out.sqrt_det = 1.0;
    }

    void christoffel(int chart, const Vec&, Gamma& out) const override {
        check_chart(chart);
        out = Gamma{};
    }

    bool in_chart(int chart, const Vec&) const override { return chart == 0; }

    Vec transition(int from, int to, const Vec& x) const override {
        check_chart(from);
        check_chart(to);
        return x;
    }

    Mat transition_jacobian(int from, int to, const Vec&) const override {
        check_chart(from);
        check_chart(to);
        return mat_identity();
    }

    double partition_alpha(int patch, int chart, const Vec&) const override {
        check_chart(chart);
        return patch == 0 ? 1.0 : 0.0;
    }

    MPoint normalize(const MPoint& p) const override {
        MPoint q = p;
        for (int i = 0; i < dim_; ++i) {
            q.x[i] = std::fmod(q.x[i], kTwoPi);
            if (q.x[i] < 0.0) q.x[i] += kTwoPi;
        }
        return q;
    }

private:
    void check_chart(int chart) const {
        if (chart != 0) throw std::domain_error("torus has a single chart");
    }
};

class Sphere2 final : public Manifold {
public:
    Sphere2() {
        dim_ = 2;
        n_charts_ = 2;
        volume_ = 4.0 * kPi;
        ricci_eps_ = 1.0;  // Ric = h on the unit sphere
        name_ = "sphere2";
    }

    void metric(int chart, const Vec& x, MetricData& out) const override {
        check_chart(chart);
        const double lam = 2.0 / (1.0 + dot(x, x));
        const double l2 = lam * lam;
        out.h = {{{l2, 0.0}, {0.0, l2}}};
        out.h_inv = {{{1.0 / l2, 0.0}, {0.0, 1.0 / l2}}};
        out.sqrt_det = l2;
    }

    void christoffel(int chart, const Vec& x, Gamma& out) const override {
        check_chart(chart);
        // Conformal metric h = λ²I with ∂_i ln λ = -2 x_i / (1+|x|²).
        const double denom = 1.0 + dot(x, x);
        const Vec p{-2.0 * x[0] / denom, -2.0 * x[1] / denom};
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    double g = 0.0;
                    if (k == i) g += p[j];
                    if (k == j) g += p[i];
                    if (i == j) g -= p[k];
                    out[k][i][j] = g;
                }
    }

    bool in_chart(int chart, const Vec&) const override {
        // Each stereographic chart covers the whole plane (sphere minus the
        // opposite pole, which has no finite coordinates).
        return chart == 0 || chart == 1;
    }

    Vec transition(int from, int to, const Vec& x) const override {
        check_chart(from);
        check_chart(to);
        if (from == to) return x;
        const double s = dot(x, x);
        if (s < 1e-28) throw std::domain_error("sphere transition undefined at the chart center");
        return {x[0] / s, x[1] / s};
    }

    Mat transition_jacobian(int from, int to, const Vec& x) const override {
        check_chart(from);
        check_chart(to);
        if (from == to) return mat_identity();
        const double s = dot(x, x);
        if (s < 1e-28) throw std::domain_error("sphere transition undefined at the chart center");
        Mat J;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                J[i][j] = (i == j ? 1.0 / s : 0.0) - 2.0 * x[i] * x[j] / (s * s);
        return J;
    }

    double partition_alpha(int patch, int chart, const Vec& x) const override {
        check_chart(chart);
        check_chart(patch);
        const double theta = colatitude(chart, x);
        const double bn = smoothstep_down((theta - kThetaLo) / (kThetaHi - kThetaLo));
        const double bs = smoothstep_down(((kPi - theta) - kThetaLo) / (kThetaHi - kThetaLo));
        const double norm = std::sqrt(bn * bn + bs * bs);
        const double b = (patch == 0) ? bn : bs;
        return b / norm;
    }

    MPoint normalize(const MPoint& p) const override {
        const double r = std::sqrt(dot(p.x, p.x));
        if (r > kSafeRadius && r > kSwitchHysteresis / r) {
            return {1 - p.chart, transition(p.chart, 1 - p.chart, p.x)};
        }
        return p;
    }

private:
    void check_chart(int chart) const {
        if (chart != 0 && chart != 1) throw std::domain_error("sphere chart must be 0 or 1");
    }

    // Angle from the north pole; chart 0 is centered at the north pole.
    static double colatitude(int chart, const Vec& x) {
        const double t = 2.0 * std::atan(std::sqrt(dot(x, x)));
        return chart == 0 ? t : kPi - t;
    }
};

}  // namespace

std::unique_ptr<Manifold> make_torus(int d) { return std::make_unique<Torus>(d); }
std::unique_ptr<Manifold> make_sphere2() { return std::make_unique<Sphere2>(); }

std::unique_ptr<Manifold> make_manifold(const std::string& name) {
    if (name == "torus1") return make_torus(1);
    if (name == "torus2") return make_torus(2);
    if (name == "sphere2") return make_sphere2();
    throw std::domain_error("unknown manifold: " + name);
}

// ---- operators ---------------------------------------------------------------

MetricData metric_data(const Manifold& M, int chart, const Vec& x) {
    if (!M.in_chart(chart, x)) throw std::domain_error("point outside chart domain");
    MetricData md;
    M.metric(chart, x, md);
    return md;
}

Gamma christoffel(const Manifold& M, int chart, const Vec& x) {
    if (!M.in_chart(chart, x)) throw std::domain_error("point outside chart domain");
    Gamma G;
    M.christoffel(chart, x, G);
    return G;
}

Gamma christoffel_fd(const Manifold& M, int chart, const Vec& x, double step) {
    const int d = M.dim();
    // ∂_k h_ij by centered differences.
    std::array<Mat, 2> dh{};
    MetricData mp, mm;
    for (int k = 0; k < d; ++k) {
        Vec xp = x, xm = x;
        xp[k] += step;
        xm[k] -= step;
        M.metric(chart, xp, mp);
        M.metric(chart, xm, mm);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) dh[k][i][j] = (mp.h[i][j] - mm.h[i][j]) / (2.0 * step);
    }
    MetricData md;
    M.metric(chart, x, md);
    Gamma G{};
    for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < d; ++l)
                    s += md.h_inv[k][l] * (dh[i][j][l] + dh[j][i][l] - dh[l][i][j]);
                G[k][i][j] = 0.5 * s;
            }
    return G;
}

Vec scalar_partials(const Manifold& M, const ScalarField& f, int chart, const Vec& x) {
    if (f.partials) return f.partials(chart, x);
    Vec g{0.0, 0.0};
    for (int i = 0; i < M.dim(); ++i) {
        const double h = fd_step(x[i]);
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f.value(chart, xp) - f.value(chart, xm)) / (2.0 * h);
    }
    return g;
}

Mat scalar_second_partials(const Manifold& M, const ScalarField& f, int chart, const Vec& x) {
    if (f.second_partials) return f.second_partials(chart, x);
    const int d = M.dim();
    Mat H{};
    // Larger step than first differences: second differences lose more digits.
    for (int i = 0; i < d; ++i) {
        const double hi = 1e-4 * std::max(1.0, std::abs(x[i]));
        Vec xp = x, xm = x;
        xp[i] += hi;
        xm[i] -= hi;
        H[i][i] = (f.value(chart, xp) - 2.0 * f.value(chart, x) + f.value(chart, xm)) / (hi * hi);
        for (int j = i + 1; j < d; ++j) {
            const double hj = 1e-4 * std::max(1.0, std::abs(x[j]));
            Vec xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[i] += hi; xpp[j] += hj;
            xpm[i] += hi; xpm[j] -= hj;
            xmp[i] -= hi; xmp[j] += hj;
            xmm[i] -= hi; xmm[j] -= hj;
            H[i][j] = (f.value(chart, xpp) - f.value(chart, xpm) - f.value(chart, xmp) +
                       f.value(chart, xmm)) /
                      (4.0 * hi * hj);
            H[j][i] = H[i][j];
        }
    }
    return H;
}

VectorField grad(const Manifold& M, const ScalarField& f) {
    const Manifold* Mp = &M;
    VectorField X;
    X.comp = [Mp, f](int chart, const Vec& x) {
        const MetricData md = metric_data(*Mp, chart, x);
        return matvec(md.h_inv, scalar_partials(*Mp, f, chart, x));
    };
    return X;
}

namespace {

Mat vector_jacobian(const Manifold& M, const VectorField& X, int chart, const Vec& x) {
    if (X.jac) return X.jac(chart, x);
    Mat J{};
    for (int j = 0; j < M.dim(); ++j) {
        const double h = fd_step(x[j]);
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vec vp = X.comp(chart, xp);
        const Vec vm = X.comp(chart, xm);
        for (int i = 0; i < M.dim(); ++i) J[i][j] = (vp[i] - vm[i]) / (2.0 * h);
    }
    return J;
}

}  // namespace

ScalarField div(const Manifold& M, const VectorField& X) {
    const Manifold* Mp = &M;
    ScalarField f;
    f.value = [Mp, X](int chart, const Vec& x) {
        if (X.div_h) return X.div_h(chart, x);
        const int d = Mp->dim();
        const Mat J = vector_jacobian(*Mp, X, chart, x);
        const Gamma G = christoffel(*Mp, chart, x);
        const Vec v = X.comp(chart, x);
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            s += J[j][j];
            for (int k = 0; k < d; ++k) s += G[j][k][j] * v[k];
        }
        return s;
    };
    return f;
}

ScalarField laplace(const Manifold& M, const ScalarField& f) {
    const Manifold* Mp = &M;
    ScalarField g;
    g.value = [Mp, f](int chart, const Vec& x) {
        const int d = Mp->dim();
        const MetricData md = metric_data(*Mp, chart, x);
        const Gamma G = christoffel(*Mp, chart, x);
        const Vec p = scalar_partials(*Mp, f, chart, x);
        const Mat H = scalar_second_partials(*Mp, f, chart, x);
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double hess = H[i][j];
                for (int k = 0; k < d; ++k) hess -= G[k][i][j] * p[k];
                s += md.h_inv[i][j] * hess;
            }
        return s;
    };
    return g;
}

double directional(const Manifold& M, const VectorField& X, const ScalarField& f,
                   int chart, const Vec& x) {
    return dot(X.comp(chart, x), scalar_partials(M, f, chart, x));
}

double second_directional_nested(const Manifold& M, const VectorField& X, const ScalarField& f,
                                 int chart, const Vec& x) {
    const Manifold* Mp = &M;
    ScalarField g;
    g.value = [Mp, X, f](int c, const Vec& y) { return directional(*Mp, X, f, c, y); };
    return directional(M, X, g, chart, x);
}

double second_directional_hessian(const Manifold& M, const VectorField& X, const ScalarField& f,
                                  int chart, const Vec& x) {
    const int d = M.dim();
    const Gamma G = christoffel(M, chart, x);
    const Vec p = scalar_partials(M, f, chart, x);
    const Mat H = scalar_second_partials(M, f, chart, x);
    const Vec v = X.comp(chart, x);
    const Mat J = vector_jacobian(M, X, chart, x);
    double hess_part = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double hij = H[i][j];
            for (int k = 0; k < d; ++k) hij -= G[k][i][j] * p[k];
            hess_part += v[i] * v[j] * hij;
        }
    double conn_part = 0.0;
    for (int k = 0; k < d; ++k) {
        double nk = 0.0;
        for (int j = 0; j < d; ++j) {
            nk += v[j] * J[k][j];
            for (int i = 0; i < d; ++i) nk += G[k][i][j] * v[i] * v[j];
        }
        conn_part += nk * p[k];
    }
    return hess_part + conn_part;
}

// ---- grid --------------------------------------------------------------------

namespace {
constexpr double kSphereExtent = 1.6;  // chart grid box half-width; covers the
                                       // pou support tan(52.5°) ≈ 1.30 with halo
}

AtlasGrid::AtlasGrid(const Manifold& M, int n_per_axis) : M_(&M), n_(n_per_axis) {
    if (n_ < 16) throw std::domain_error("grid.n_per_axis must be at least 16");
    const int d = M.dim();
    offsets_.assign(M.n_charts() + 1, 0);
    if (M.name() == "sphere2") {
        extent_ = kSphereExtent;
        h_ = 2.0 * extent_ / n_;
        nodes_.reserve(2 * std::size_t(n_) * n_);
        for (int c = 0; c < 2; ++c) {
            offsets_[c] = nodes_.size();
            for (int j = 0; j < n_; ++j)
                for (int i = 0; i < n_; ++i) {
                    const Vec z{-extent_ + (i + 0.5) * h_, -extent_ + (j + 0.5) * h_};
                    MetricData md;
                    M.metric(c, z, md);
                    const double a = M.partition_alpha(c, c, z);
                    nodes_.push_back({c, z});
                    weights_.push_back(h_ * h_ * a * a * md.sqrt_det);
                }
        }
        offsets_[2] = nodes_.size();
    } else {
        h_ = kTwoPi / n_;
        const int ny = (d == 2) ? n_ : 1;
        nodes_.reserve(std::size_t(n_) * ny);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < n_; ++i) {
                const Vec x{i * h_, (d == 2) ? j * h_ : 0.0};
                nodes_.push_back({0, x});
                weights_.push_back((d == 2) ? h_ * h_ : h_);
            }
        offsets_[1] = nodes_.size();
    }
}

std::size_t AtlasGrid::index_of(int chart, int i, int j) const {
    return offsets_[chart] + std::size_t(j) * n_ + i;
}

double AtlasGrid::axis_coord(int idx) const {
    if (M_->name() == "sphere2") return -extent_ + (idx + 0.5) * h_;
    return idx * h_;
}

namespace {

inline void cr_weights(double f, double w[4]) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = -0.5 * f + f2 - 0.5 * f3;
    w[1] = 1.0 - 2.5 * f2 + 1.5 * f3;
    w[2] = 0.5 * f + 2.0 * f2 - 1.5 * f3;
    w[3] = -0.5 * f2 + 0.5 * f3;
}

}  // namespace

double AtlasGrid::interpolate(std::span<const double> values, const MPoint& p) const {
    const int d = M_->dim();
    if (M_->name() == "sphere2") {
        MPoint q = p;
        if (dot(q.x, q.x) > 1.0) {
            const int other = 1 - q.chart;
            q = {other, M_->transition(q.chart, other, q.x)};
        }
        const double gx = (q.x[0] + extent_) / h_ - 0.5;
        const double gy = (q.x[1] + extent_) / h_ - 0.5;
        const int i0 = int(std::floor(gx));
        const int j0 = int(std::floor(gy));
        if (i0 < 1 || j0 < 1 || i0 + 2 >= n_ || j0 + 2 >= n_)
            throw std::runtime_error("sphere interpolation stencil out of range (grid too coarse)");
        double wx[4], wy[4];
        cr_weights(gx - i0, wx);
        cr_weights(gy - j0, wy);
        double s = 0.0;
        for (int b = 0; b < 4; ++b) {
            double row = 0.0;
            const std::size_t base = offsets_[q.chart] + std::size_t(j0 - 1 + b) * n_;
            for (int a = 0; a < 4; ++a) row += wx[a] * values[base + (i0 - 1 + a)];
            s += wy[b] * row;
        }
        return s;
    }
    // periodic torus
    const double gx = p.x[0] / h_;
    int i0 = int(std::floor(gx));
    double wx[4];
    cr_weights(gx - i0, wx);
    auto wrap = [this](int k) {
        k %= n_;
        return k < 0 ? k + n_ : k;
    };
    if (d == 1) {
        double s = 0.0;
        for (int a = 0; a < 4; ++a) s += wx[a] * values[wrap(i0 - 1 + a)];
        return s;
    }
    const double gy = p.x[1] / h_;
    int j0 = int(std::floor(gy));
    double wy[4];
    cr_weights(gy - j0, wy);
    double s = 0.0;
    for (int b = 0; b < 4; ++b) {
        double row = 0.0;
        const std::size_t base = std::size_t(wrap(j0 - 1 + b)) * n_;
        for (int a = 0; a < 4; ++a) row += wx[a] * values[base + wrap(i0 - 1 + a)];
        s += wy[b] * row;
    }
    return s;
}

double AtlasGrid::integrate(const ScalarField& f) const {
    std::vector<double> terms(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (weights_[i] == 0.0) {
            terms[i] = 0.0;
            continue;
        }
        const double v = f.value(nodes_[i].chart, nodes_[i].x);
        if (!std::isfinite(v))
            throw std::runtime_error("integrate: non-finite value at chart " +
                                     std::to_string(nodes_[i].chart) + " node " + std::to_string(i));
        terms[i] = weights_[i] * v;
    }
    return pairwise_sum(terms);
}

double AtlasGrid::integrate_values(std::span<const double> values) const {
    std::vector<double> terms(size());
    for (std::size_t i = 0; i < size(); ++i) terms[i] = weights_[i] * values[i];
    return pairwise_sum(terms);
}

double AtlasGrid::l2_norm_sq(std::span<const double> values) const {
    std::vector<double> terms(size());
    for (std::size_t i = 0; i < size(); ++i) terms[i] = weights_[i] * values[i] * values[i];
    return pairwise_sum(terms);
}

std::vector<double> AtlasGrid::sample(const ScalarField& f) const {
    std::vector<double> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = f.value(nodes_[i].chart, nodes_[i].x);
    return v;
}

// ---- sphere ambient helpers ----------------------------------------------------

std::array<double, 3> sphere_embed(int chart, const Vec& z) {
    const double s = dot(z, z);
    const double D = 1.0 + s;
    const double z3 = (chart == 0) ? (1.0 - s) / D : (s - 1.0) / D;
    return {2.0 * z[0] / D, 2.0 * z[1] / D, z3};
}

void sphere_embed_derivs(int chart, const Vec& z, std::array<Vec, 3>& dq,
                         std::array<Mat, 3>* d2q) {
    const double s = dot(z, z);
    const double D = 1.0 + s;
    const double D2 = D * D;
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            dq[a][i] = (a == i ? 2.0 / D : 0.0) - 4.0 * z[a] * z[i] / D2;
    const double sgn = (chart == 0) ? -1.0 : 1.0;
    for (int i = 0; i < 2; ++i) dq[2][i] = sgn * 4.0 * z[i] / D2;
    if (!d2q) return;
    const double D3 = D2 * D;
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double t = 16.0 * z[a] * z[i] * z[j] / D3;
                if (a == i) t -= 4.0 * z[j] / D2;
                if (a == j) t -= 4.0 * z[i] / D2;
                if (i == j) t -= 4.0 * z[a] / D2;
                (*d2q)[a][i][j] = t;
            }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            (*d2q)[2][i][j] = sgn * ((i == j ? 4.0 / D2 : 0.0) - 16.0 * z[i] * z[j] / D3);
}

ScalarField ambient_scalar(
    std::function<double(const std::array<double, 3>&)> F,
    std::function<std::array<double, 3>(const std::array<double, 3>&)> gradF,
    std::function<std::array<std::array<double, 3>, 3>(const std::array<double, 3>&)> hessF) {
    ScalarField f;
    f.value = [F](int chart, const Vec& z) { return F(sphere_embed(chart, z)); };
    if (gradF) {
        f.partials = [gradF](int chart, const Vec& z) {
            const auto q = sphere_embed(chart, z);
            const auto g = gradF(q);
            std::array<Vec, 3> dq;
            sphere_embed_derivs(chart, z, dq, nullptr);
            Vec out{0.0, 0.0};
            for (int a = 0; a < 3; ++a) out += g[a] * dq[a];
            return out;
        };
    }
    if (gradF && hessF) {
        f.second_partials = [gradF, hessF](int chart, const Vec& z) {
            const auto q = sphere_embed(chart, z);
            const auto g = gradF(q);
            const auto H = hessF(q);
            std::array<Vec, 3> dq;
            std::array<Mat, 3> d2q;
            sphere_embed_derivs(chart, z, dq, &d2q);
            Mat out{};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    double t = 0.0;
                    for (int a = 0; a < 3; ++a) {
                        t += g[a] * d2q[a][i][j];
                        for (int b = 0; b < 3; ++b) t += dq[a][i] * H[a][b] * dq[b][j];
                    }
                    out[i][j] = t;
                }
            return out;
        };
    }
    return f;
}

VectorField ambient_vector(std::function<std::array<double, 3>(const std::array<double, 3>&)> V) {
    VectorField X;
    X.comp = [V](int chart, const Vec& z) {
        const auto q = sphere_embed(chart, z);
        const auto v = V(q);
        // z_i = q_i / (1 ± q_3); push the ambient tangent vector through.
        const double denom = (chart == 0) ? 1.0 + q[2] : 1.0 - q[2];
        const double sgn = (chart == 0) ? -1.0 : 1.0;
        return Vec{(v[0] + sgn * z[0] * v[2]) / denom, (v[1] + sgn * z[1] * v[2]) / denom};
    };
    return X;
}

}  // namespace sct
