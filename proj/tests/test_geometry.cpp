#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sct/geometry.hpp"

using namespace sct;

namespace {

ScalarField torus_sin1() {
    ScalarField f;
    f.value = [](int, const Vec& x) { return std::sin(x[0]); };
    f.partials = [](int, const Vec& x) { return Vec{std::cos(x[0]), 0.0}; };
    f.second_partials = [](int, const Vec& x) { return Mat{{{-std::sin(x[0]), 0.0}, {0.0, 0.0}}}; };
    return f;
}

ScalarField torus_smooth() {
    ScalarField f;
    f.value = [](int, const Vec& x) { return std::sin(x[0]) * std::cos(2.0 * x[1]) + 0.3 * std::cos(x[0] + x[1]); };
    return f;
}

VectorField torus_field() {
    VectorField X;
    X.comp = [](int, const Vec& x) { return Vec{std::cos(x[1]), std::sin(x[0] + x[1])}; };
    return X;
}

// z-coordinate restricted to S²: the ℓ = 1 spherical harmonic.
ScalarField sphere_z() {
    return ambient_scalar(
        [](const std::array<double, 3>& q) { return q[2]; },
        [](const std::array<double, 3>&) { return std::array<double, 3>{0.0, 0.0, 1.0}; },
        [](const std::array<double, 3>&) { return std::array<std::array<double, 3>, 3>{}; });
}

ScalarField sphere_smooth() {
    return ambient_scalar(
        [](const std::array<double, 3>& q) { return std::exp(q[2]) * (1.0 + 0.5 * q[0]); },
        [](const std::array<double, 3>& q) {
            return std::array<double, 3>{0.5 * std::exp(q[2]), 0.0, std::exp(q[2]) * (1.0 + 0.5 * q[0])};
        },
        [](const std::array<double, 3>& q) {
            std::array<std::array<double, 3>, 3> H{};
            H[0][2] = H[2][0] = 0.5 * std::exp(q[2]);
            H[2][2] = std::exp(q[2]) * (1.0 + 0.5 * q[0]);
            return H;
        });
}

VectorField sphere_killing() {
    // Rotation about e3: V(q) = e3 × q.
    return ambient_vector([](const std::array<double, 3>& q) {
        return std::array<double, 3>{-q[1], q[0], 0.0};
    });
}

VectorField sphere_generic_field() {
    // Tangential projection of a constant ambient vector plus a rotation.
    return ambient_vector([](const std::array<double, 3>& q) {
        const std::array<double, 3> e{0.4, -0.3, 0.7};
        const double en = e[0] * q[0] + e[1] * q[1] + e[2] * q[2];
        return std::array<double, 3>{e[0] - en * q[0] - 0.5 * q[1],
                                     e[1] - en * q[1] + 0.5 * q[0],
                                     e[2] - en * q[2]};
    });
}

}  // namespace

TEST_CASE("metric data on built-ins") {
    auto T2 = make_torus(2);
    auto md = metric_data(*T2, 0, {1.0, 2.0});
    CHECK(md.h[0][0] == 1.0);
    CHECK(md.h[1][1] == 1.0);
    CHECK(md.h[0][1] == 0.0);
    CHECK(md.sqrt_det == 1.0);

    auto S2 = make_sphere2();
    auto ms = metric_data(*S2, 0, {0.0, 0.0});
    CHECK(ms.h[0][0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(ms.h[1][1] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(ms.sqrt_det == doctest::Approx(4.0).epsilon(1e-14));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        const Vec z{u(rng), u(rng)};
        auto m = metric_data(*S2, k % 2, z);
        const Mat id = matmul(m.h, m.h_inv);
        CHECK(std::abs(id[0][0] - 1.0) <= 1e-12);
        CHECK(std::abs(id[1][1] - 1.0) <= 1e-12);
        CHECK(std::abs(id[0][1]) <= 1e-12);
        CHECK(m.sqrt_det > 0.0);
    }

    CHECK_THROWS_AS((void)metric_data(*T2, 1, {0.0, 0.0}), std::domain_error);
}

TEST_CASE("christoffel symbols: torus flat, sphere matches FD oracle, symmetric") {
    auto T2 = make_torus(2);
    auto G = christoffel(*T2, 0, {0.3, 0.4});
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) CHECK(G[k][i][j] == 0.0);

    auto S2 = make_sphere2();
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.8, 1.8);
    for (int k = 0; k < 40; ++k) {
        const Vec z{u(rng), u(rng)};
        const int c = k % 2;
        auto Ga = christoffel(*S2, c, z);
        auto Gf = christoffel_fd(*S2, c, z);
        for (int a = 0; a < 2; ++a)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    CHECK(Ga[a][i][j] == Ga[a][j][i]);
                    const double scale = std::max(1.0, std::abs(Ga[a][i][j]));
                    CHECK(std::abs(Ga[a][i][j] - Gf[a][i][j]) / scale <= 1e-6);
                }
    }
}

TEST_CASE("sphere transitions are mutual inverses with nonsingular Jacobian") {
    auto S2 = make_sphere2();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int tested = 0;
    while (tested < 100) {
        const Vec z{u(rng), u(rng)};
        if (dot(z, z) < 0.04) continue;
        ++tested;
        const Vec w = S2->transition(0, 1, z);
        const Vec back = S2->transition(1, 0, w);
        CHECK(std::hypot(back[0] - z[0], back[1] - z[1]) <= 1e-12);
        const Mat J = S2->transition_jacobian(0, 1, z);
        CHECK(std::abs(det2(J)) > 1e-10);
    }
}

TEST_CASE("vector components transform by the transition Jacobian") {
    auto S2 = make_sphere2();
    auto X = sphere_generic_field();
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.3, 2.5);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    for (int k = 0; k < 60; ++k) {
        const double r = u(rng), a = ang(rng);
        const Vec z{r * std::cos(a), r * std::sin(a)};
        const Vec w = S2->transition(0, 1, z);
        const Vec v0 = X.comp(0, z);
        const Vec v1 = X.comp(1, w);
        const Vec pushed = matvec(S2->transition_jacobian(0, 1, z), v0);
        const double scale = std::max({1e-14, std::abs(v1[0]), std::abs(v1[1])});
        CHECK(std::abs(pushed[0] - v1[0]) / scale <= 1e-10);
        CHECK(std::abs(pushed[1] - v1[1]) / scale <= 1e-10);
    }
}

TEST_CASE("grad: constants, flat closed form, metric pairing identity on the sphere") {
    auto T2 = make_torus(2);
    ScalarField c;
    c.value = [](int, const Vec&) { return 3.7; };
    auto gc = grad(*T2, c);
    const Vec v = gc.comp(0, {1.0, 2.0});
    CHECK(std::abs(v[0]) <= 1e-9);
    CHECK(std::abs(v[1]) <= 1e-9);

    auto g1 = grad(*T2, torus_sin1());
    const Vec w = g1.comp(0, {0.7, 1.1});
    CHECK(w[0] == doctest::Approx(std::cos(0.7)).epsilon(1e-12));
    CHECK(std::abs(w[1]) <= 1e-12);

    auto S2 = make_sphere2();
    auto f = sphere_smooth();
    auto gf = grad(*S2, f);
    auto X = sphere_generic_field();
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 40; ++k) {
        const Vec z{u(rng), u(rng)};
        const int ch = k % 2;
        const auto md = metric_data(*S2, ch, z);
        const Vec gv = gf.comp(ch, z);
        const Vec xv = X.comp(ch, z);
        const double pair = dot(matvec(md.h, gv), xv);
        const double dir = directional(*S2, X, f, ch, z);
        CHECK(std::abs(pair - dir) / std::max(1.0, std::abs(dir)) <= 1e-8);
    }
}

TEST_CASE("div: constants, Killing field, integration by parts") {
    auto T2 = make_torus(2);
    VectorField cv;
    cv.comp = [](int, const Vec&) { return Vec{0.4, -1.2}; };
    auto dc = div(*T2, cv);
    CHECK(std::abs(dc.value(0, {0.5, 0.6})) <= 1e-10);

    auto S2 = make_sphere2();
    auto K = sphere_killing();
    auto dK = div(*S2, K);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 30; ++k) {
        const Vec z{u(rng), u(rng)};
        CHECK(std::abs(dK.value(k % 2, z)) <= 1e-8);
    }

    // ∫ X(f) dV = -∫ f div X dV on closed M (quadrature oracle).
    for (const bool sphere : {false, true}) {
        std::unique_ptr<Manifold> M = sphere ? make_sphere2() : make_torus(2);
        AtlasGrid grid(*M, 48);
        ScalarField f = sphere ? sphere_smooth() : torus_smooth();
        VectorField X = sphere ? sphere_generic_field() : torus_field();
        auto divX = div(*M, X);
        ScalarField xf;
        const Manifold* Mp = M.get();
        xf.value = [Mp, &X, &f](int c, const Vec& x) { return directional(*Mp, X, f, c, x); };
        ScalarField fdiv;
        fdiv.value = [&divX, &f](int c, const Vec& x) { return f.value(c, x) * divX.value(c, x); };
        const double lhs = grid.integrate(xf);
        const double rhs = grid.integrate(fdiv);
        CHECK(std::abs(lhs + rhs) <= (sphere ? 5e-5 : 5e-8));
    }
}

TEST_CASE("laplace: flat eigenfunction and the l=1 spherical harmonic") {
    auto T2 = make_torus(2);
    auto lf = laplace(*T2, torus_sin1());
    CHECK(lf.value(0, {0.9, 0.2}) == doctest::Approx(-std::sin(0.9)).epsilon(1e-10));

    ScalarField c;
    c.value = [](int, const Vec&) { return 2.0; };
    c.partials = [](int, const Vec&) { return Vec{0.0, 0.0}; };
    c.second_partials = [](int, const Vec&) { return Mat{}; };
    CHECK(std::abs(laplace(*T2, c).value(0, {0.1, 0.1})) <= 1e-14);

    auto S2 = make_sphere2();
    auto z3 = sphere_z();
    auto lz = laplace(*S2, z3);
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> u(-1.6, 1.6);
    for (int k = 0; k < 40; ++k) {
        const Vec z{u(rng), u(rng)};
        const int ch = k % 2;
        const double expect = -2.0 * z3.value(ch, z);
        CHECK(std::abs(lz.value(ch, z) - expect) <= 1e-6);
    }
}

TEST_CASE("second directional derivative: two routes agree") {
    auto T2 = make_torus(2);
    VectorField d1;
    d1.comp = [](int, const Vec&) { return Vec{1.0, 0.0}; };
    auto f = torus_sin1();
    const double nested = second_directional_nested(*T2, d1, f, 0, {0.8, 0.0});
    const double viahess = second_directional_hessian(*T2, d1, f, 0, {0.8, 0.0});
    CHECK(nested == doctest::Approx(-std::sin(0.8)).epsilon(1e-6));
    CHECK(viahess == doctest::Approx(-std::sin(0.8)).epsilon(1e-10));

    auto S2 = make_sphere2();
    auto g = sphere_smooth();
    auto X = sphere_generic_field();
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < 25; ++k) {
        const Vec z{u(rng), u(rng)};
        const double a = second_directional_nested(*S2, X, g, k % 2, z);
        const double b = second_directional_hessian(*S2, X, g, k % 2, z);
        CHECK(std::abs(a - b) / std::max(1.0, std::abs(b)) <= 1e-6);
    }
}

TEST_CASE("integrate: volumes, odd symmetry, divergence theorem") {
    auto S2 = make_sphere2();
    AtlasGrid coarse(*S2, 32), fine(*S2, 64);
    ScalarField one;
    one.value = [](int, const Vec&) { return 1.0; };
    const double exact = 4.0 * kPi;
    const double e32 = std::abs(coarse.integrate(one) - exact);
    const double e64 = std::abs(fine.integrate(one) - exact);
    CHECK(e64 <= 1e-4);
    CHECK(e32 / std::max(e64, 1e-15) >= 4.0);  // at least second order under doubling

    auto T2 = make_torus(2);
    AtlasGrid tg(*T2, 48);
    CHECK(tg.integrate(one) == doctest::Approx(kTwoPi * kTwoPi).epsilon(1e-13));

    ScalarField odd;
    odd.value = [](int, const Vec& x) { return std::sin(x[0]); };
    CHECK(std::abs(tg.integrate(odd)) <= 1e-12);

    // ∫ Δf dV = 0 on closed manifolds.
    auto lap_t = laplace(*T2, torus_smooth());
    CHECK(std::abs(tg.integrate(lap_t)) <= 1e-7);
    auto lap_s = laplace(*S2, sphere_smooth());
    CHECK(std::abs(fine.integrate(lap_s)) <= 5e-5);
}

TEST_CASE("laplacian self-adjointness under quadrature") {
    for (const bool sphere : {false, true}) {
        std::unique_ptr<Manifold> M = sphere ? make_sphere2() : make_torus(2);
        AtlasGrid grid(*M, 48);
        ScalarField f = sphere ? sphere_smooth() : torus_smooth();
        ScalarField g = sphere ? sphere_z() : torus_sin1();
        auto Lf = laplace(*M, f);
        auto Lg = laplace(*M, g);
        ScalarField fLg, gLf;
        fLg.value = [&](int c, const Vec& x) { return f.value(c, x) * Lg.value(c, x); };
        gLf.value = [&](int c, const Vec& x) { return g.value(c, x) * Lf.value(c, x); };
        const double a = grid.integrate(fLg);
        const double b = grid.integrate(gLf);
        CHECK(std::abs(a - b) <= (sphere ? 5e-5 : 1e-7));
    }
}

TEST_CASE("partition of unity sums to one at random points") {
    auto S2 = make_sphere2();
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    for (int k = 0; k < 10000; ++k) {
        const Vec z{u(rng), u(rng)};
        const int c = k % 2;
        const double a0 = S2->partition_alpha(0, c, z);
        const double a1 = S2->partition_alpha(1, c, z);
        CHECK(std::abs(a0 * a0 + a1 * a1 - 1.0) <= 1e-12);
    }
    // Equator: both bumps equal 1/sqrt(2) by symmetry.
    const double ae = S2->partition_alpha(0, 0, {1.0, 0.0});
    CHECK(ae == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("scalar fields are chart-consistent on the overlap") {
    auto S2 = make_sphere2();
    auto f = sphere_smooth();
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.4, 2.2);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    for (int k = 0; k < 50; ++k) {
        const double r = u(rng), a = ang(rng);
        const Vec z{r * std::cos(a), r * std::sin(a)};
        const Vec w = S2->transition(0, 1, z);
        const double v0 = f.value(0, z);
        const double v1 = f.value(1, w);
        CHECK(std::abs(v0 - v1) / std::max(1.0, std::abs(v0)) <= 1e-10);
    }
}

TEST_CASE("div values are chart-independent on the overlap") {
    auto S2 = make_sphere2();
    auto X = sphere_generic_field();
    auto dX = div(*S2, X);
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi);
    for (int k = 0; k < 40; ++k) {
        const double r = u(rng), a = ang(rng);
        const Vec z{r * std::cos(a), r * std::sin(a)};
        const Vec w = S2->transition(0, 1, z);
        const double d0 = dX.value(0, z);
        const double d1 = dX.value(1, w);
        CHECK(std::abs(d0 - d1) / std::max(1.0, std::abs(d0)) <= 1e-8);
    }
}

TEST_CASE("torus normalization wraps, sphere normalization switches charts") {
    auto T2 = make_torus(2);
    auto p = T2->normalize({0, {7.0, -1.0}});
    CHECK(p.x[0] == doctest::Approx(7.0 - kTwoPi).epsilon(1e-14));
    CHECK(p.x[1] == doctest::Approx(kTwoPi - 1.0).epsilon(1e-14));

    auto S2 = make_sphere2();
    auto q = S2->normalize({0, {3.0, 0.0}});
    CHECK(q.chart == 1);
    CHECK(q.x[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    auto keep = S2->normalize({0, {1.5, 0.0}});
    CHECK(keep.chart == 0);
}
