#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sct {

// Coordinates and small tensors for d <= 2. For d == 1 the second
// component is carried along as zero.
using Vec = std::array<double, 2>;
using Mat = std::array<std::array<double, 2>, 2>;   // M[i][j]
using Gamma = std::array<Mat, 2>;                   // G[k][i][j] = Γ^k_{ij}

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1]}; }
inline Vec& operator+=(Vec& a, const Vec& b) { a[0] += b[0]; a[1] += b[1]; return a; }

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1]; }

inline Vec matvec(const Mat& m, const Vec& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return c;
}

inline Mat mat_identity() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }

inline double det2(const Mat& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

inline Mat inv2(const Mat& m) {
    const double d = det2(m);
    if (std::abs(d) < 1e-300) throw std::runtime_error("inv2: singular matrix");
    return {{{m[1][1] / d, -m[0][1] / d}, {-m[1][0] / d, m[0][0] / d}}};
}

// Order-independent reduction: fixed pairwise tree over the input layout,
// so sums do not depend on which thread produced which entry.
double pairwise_sum(std::span<const double> v);

inline double sqr(double x) { return x * x; }

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.1415926535897932384626433832795;

}  // namespace sct
