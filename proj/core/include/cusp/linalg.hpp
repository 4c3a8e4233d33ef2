#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>

namespace cusp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double angle_of(const Vec2& v) { return std::atan2(v.y(), v.x()); }

inline Vec2 unit_at_angle(double phi) { return {std::cos(phi), std::sin(phi)}; }

/// Counter-clockwise rotation by `phi`.
inline Vec2 rotate(const Vec2& v, double phi)
{
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {v.x() * c - v.y() * s, v.x() * s + v.y() * c};
}

/// Spectral (operator 2-) norm of a 2x2 matrix, closed form.
inline double op_norm(const Mat2& m)
{
    const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
    const double s = a * a + b * b + c * c + d * d;
    const double det = a * d - b * c;
    const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det * det));
    return std::sqrt(0.5 * (s + disc));
}

/// Principal square root of a symmetric positive definite 2x2 matrix:
/// sqrt(A) = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)).
inline Mat2 spd_sqrt(const Mat2& a)
{
    const double s = std::sqrt(a.determinant());
    const double t = std::sqrt(a.trace() + 2.0 * s);
    return (a + s * Mat2::Identity()) / t;
}

inline bool is_spd(const Mat2& a, double tol = 0.0)
{
    const bool symmetric = std::abs(a(0, 1) - a(1, 0)) <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff());
    return symmetric && a(0, 0) > tol && a.determinant() > tol;
}

}  // namespace cusp
