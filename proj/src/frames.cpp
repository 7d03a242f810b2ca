#include "sct/frames.hpp"

#include <cmath>

namespace sct {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

// Pointwise Gram-Schmidt of the coordinate basis against h.
void gs_columns(const MetricData& md, int d, Mat& E) {
    // E[i] is the i-th frame field's component vector.
    const double n1 = std::sqrt(md.h[0][0]);
    if (n1 < 1e-14) throw std::runtime_error("gram_schmidt_frame: degenerate metric");
    E[0] = {1.0 / n1, 0.0};
    if (d == 1) return;
    // v = ∂_2 − (∂_2, e_1)_h e_1
    const double proj = (md.h[1][0] * E[0][0] + md.h[1][1] * E[0][1]);
    Vec v{-proj * E[0][0], 1.0 - proj * E[0][1]};
    const Vec hv = matvec(md.h, v);
    const double n2 = std::sqrt(dot(v, hv));
    if (n2 < 1e-14) throw std::runtime_error("gram_schmidt_frame: rank loss");
    E[1] = {v[0] / n2, v[1] / n2};
}

}  // namespace

FramePatch gram_schmidt_frame(const Manifold& M, int chart) {
    FramePatch fp;
    fp.patch = chart;
    const Manifold* Mp = &M;
    for (int i = 0; i < M.dim(); ++i) {
        VectorField Ei;
        Ei.comp = [Mp, chart, i](int c, const Vec& x) {
            // Components are defined in the patch chart and pushed forward.
            const Vec y = (c == chart) ? x : Mp->transition(c, chart, x);
            MetricData md;
            Mp->metric(chart, y, md);
            Mat E;
            gs_columns(md, Mp->dim(), E);
            Vec v{E[i][0], E[i][1]};
            if (c != chart) v = matvec(Mp->transition_jacobian(chart, c, y), v);
            return v;
        };
        fp.frame.push_back(std::move(Ei));
    }
    return fp;
}

std::vector<ScalarField> squared_partition(const Manifold& M) {
    const Manifold* Mp = &M;
    std::vector<ScalarField> alphas;
    for (int j = 0; j < M.n_patches(); ++j) {
        ScalarField a;
        a.value = [Mp, j](int c, const Vec& x) { return Mp->partition_alpha(j, c, x); };
        alphas.push_back(std::move(a));
    }
    // Cover-gap check on a coarse sample of every chart.
    const int ns = 24;
    for (int c = 0; c < M.n_charts(); ++c) {
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < ns; ++j) {
                Vec x;
                if (M.name() == "sphere2")
                    x = {-1.6 + (i + 0.5) * 3.2 / ns, -1.6 + (j + 0.5) * 3.2 / ns};
                else
                    x = {i * kTwoPi / ns, (M.dim() == 2) ? j * kTwoPi / ns : 0.0};
                double best = 0.0;
                for (int p = 0; p < M.n_patches(); ++p)
                    best = std::max(best, alphas[p].value(c, x));
                if (best < 1e-8)
                    throw std::runtime_error("squared_partition: cover gap at a sample node");
            }
        if (M.dim() == 1) break;
    }
    return alphas;
}

namespace {

// Assemble one partition-frame field √2 α_j E_{p_j,i}, extended by zero.
VectorField partition_field(const Manifold& M, int patch, int i) {
    const Manifold* Mp = &M;
    VectorField a;
    a.comp = [Mp, patch, i](int c, const Vec& x) -> Vec {
        const double alpha = Mp->partition_alpha(patch, c, x);
        if (alpha == 0.0) return {0.0, 0.0};
        const Vec y = (c == patch) ? x : Mp->transition(c, patch, x);
        MetricData md;
        Mp->metric(patch, y, md);
        Mat E;
        gs_columns(md, Mp->dim(), E);
        Vec v{kSqrt2 * alpha * E[i][0], kSqrt2 * alpha * E[i][1]};
        if (c != patch) v = matvec(Mp->transition_jacobian(patch, c, y), v);
        return v;
    };
    return a;
}

ScalarField numeric_divergence(const Manifold& M, const VectorField& X) {
    ScalarField d = div(M, X);
    return d;
}

}  // namespace

NoiseFrame build_partition_frame(const Manifold& M) {
    NoiseFrame fr;
    fr.kind = NoiseFrame::Kind::partition;
    fr.M = &M;
    (void)squared_partition(M);  // cover check
    for (int j = 0; j < M.n_patches(); ++j)
        for (int i = 0; i < M.dim(); ++i) {
            VectorField a = partition_field(M, j, i);
            if (M.name() != "sphere2") {
                // single flat chart: constant fields
                a.div_h = [](int, const Vec&) { return 0.0; };
                a.jac = [](int, const Vec&) { return Mat{}; };
            } else {
                const Manifold* Mp = &M;
                // exact zero outside the support, finite differences inside
                VectorField plain = partition_field(M, j, i);
                a.div_h = [Mp, j, plain](int c, const Vec& x) -> double {
                    if (Mp->partition_alpha(j, c, x) == 0.0) return 0.0;
                    ScalarField d = div(*Mp, plain);
                    return d.value(c, x);
                };
            }
            fr.a.push_back(std::move(a));
        }
    for (int i = 0; i < fr.N(); ++i) {
        const VectorField& ai = fr.a[i];
        ScalarField dv;
        dv.value = ai.div_h;
        fr.div_a.push_back(dv);
        VectorField bar;
        bar.comp = [ai](int c, const Vec& x) {
            const double d = ai.div_h(c, x);
            const Vec v = ai.comp(c, x);
            return Vec{d * v[0], d * v[1]};
        };
        fr.bar_a.push_back(std::move(bar));
    }
    return fr;
}

NoiseFrame build_embedded_sphere_frame(const Manifold& M) {
    if (M.name() != "sphere2")
        throw std::domain_error("embedded frame is defined on the unit sphere only");
    NoiseFrame fr;
    fr.kind = NoiseFrame::Kind::embedded_sphere;
    fr.M = &M;
    for (int i = 0; i < 3; ++i) {
        VectorField a = ambient_vector([i](const std::array<double, 3>& q) {
            std::array<double, 3> e{0.0, 0.0, 0.0};
            e[i] = 1.0;
            return std::array<double, 3>{kSqrt2 * (e[0] - q[i] * q[0]),
                                         kSqrt2 * (e[1] - q[i] * q[1]),
                                         kSqrt2 * (e[2] - q[i] * q[2])};
        });
        // Div of the tangential projection of e_i on S² is −2 (e_i·q).
        a.div_h = [i](int chart, const Vec& z) {
            return -2.0 * kSqrt2 * sphere_embed(chart, z)[i];
        };
        fr.a.push_back(std::move(a));
    }
    for (int i = 0; i < fr.N(); ++i) {
        const VectorField& ai = fr.a[i];
        ScalarField dv;
        dv.value = ai.div_h;
        fr.div_a.push_back(dv);
        VectorField bar;
        bar.comp = [ai](int c, const Vec& x) {
            const double d = ai.div_h(c, x);
            const Vec v = ai.comp(c, x);
            return Vec{d * v[0], d * v[1]};
        };
        fr.bar_a.push_back(std::move(bar));
    }
    return fr;
}

NoiseFrame build_coordinate_torus_frame(const Manifold& M) {
    if (M.name() == "sphere2")
        throw std::domain_error("coordinate frame is defined on the torus only");
    NoiseFrame fr;
    fr.kind = NoiseFrame::Kind::coordinate_torus;
    fr.M = &M;
    for (int i = 0; i < M.dim(); ++i) {
        VectorField a;
        const Vec v = (i == 0) ? Vec{kSqrt2, 0.0} : Vec{0.0, kSqrt2};
        a.comp = [v](int, const Vec&) { return v; };
        a.div_h = [](int, const Vec&) { return 0.0; };
        a.jac = [](int, const Vec&) { return Mat{}; };
        fr.a.push_back(std::move(a));
        ScalarField dv;
        dv.value = [](int, const Vec&) { return 0.0; };
        fr.div_a.push_back(dv);
        VectorField bar;
        bar.comp = [](int, const Vec&) { return Vec{0.0, 0.0}; };
        fr.bar_a.push_back(std::move(bar));
    }
    return fr;
}

NoiseFrame build_frame(const Manifold& M, const std::string& kind) {
    if (kind == "partition") return build_partition_frame(M);
    if (kind == "embedded") return build_embedded_sphere_frame(M);
    if (kind == "coordinate") return build_coordinate_torus_frame(M);
    throw std::domain_error("unknown frame kind: " + kind);
}

ScalarField lambda_op(const Manifold& M, const NoiseFrame& fr, int i, const ScalarField& psi) {
    const Manifold* Mp = &M;
    const VectorField ai = fr.a[i];
    // g = Div_h(ψ a_i) = a_i(ψ) + ψ Div_h a_i
    ScalarField g;
    g.value = [Mp, ai, psi](int c, const Vec& x) {
        return directional(*Mp, ai, psi, c, x) + psi.value(c, x) * ai.div_h(c, x);
    };
    ScalarField out;
    out.value = [Mp, ai, g](int c, const Vec& x) {
        return directional(*Mp, ai, g, c, x) + g.value(c, x) * ai.div_h(c, x);
    };
    return out;
}

double bar_a_apply(const Manifold& M, const NoiseFrame& fr, int i, const ScalarField& psi,
                   int chart, const Vec& x) {
    return fr.a[i].div_h(chart, x) * directional(M, fr.a[i], psi, chart, x);
}

double ellipticity_residual(const Manifold& M, const NoiseFrame& fr, const ScalarField& psi,
                            int chart, const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < fr.N(); ++i) {
        s += 0.5 * second_directional_hessian(M, fr.a[i], psi, chart, x);
        s += 0.5 * bar_a_apply(M, fr, i, psi, chart, x);
    }
    const double lap = laplace(M, psi).value(chart, x);
    return std::abs(s - lap);
}

double section_identity_residual(const Manifold& M, const NoiseFrame& fr,
                                 int chart, const Vec& x, const Vec& X) {
    MetricData md;
    M.metric(chart, x, md);
    const Vec hX = matvec(md.h, X);
    const double norm2 = dot(X, hX);
    if (norm2 <= 0.0) throw std::domain_error("section identity needs X != 0");
    double s = 0.0;
    for (int i = 0; i < fr.N(); ++i) {
        const Vec ai = fr.a[i].comp(chart, x);
        s += sqr(dot(hX, ai));
    }
    return std::abs(s - 2.0 * norm2) / norm2;
}

}  // namespace sct
