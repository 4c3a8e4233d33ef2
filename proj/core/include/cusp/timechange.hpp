#pragma once

// Stretched clock u = t + Lambda(t) and its inverse h0, on piecewise-linear
// discrete paths.

#include <vector>

#include "cusp/dynamics.hpp"

namespace cusp {

/// Breakpoint k: u[k] = fl(h0[k] + h1[k]) with h0[k] = t_k, h1[k] = Lambda_k,
/// so the identity h0 + h1 = u holds exactly in floating point at every
/// breakpoint. Between breakpoints all three are linear in u.
struct TimeChangedPath {
    std::vector<double> u;
    std::vector<double> h0;
    std::vector<double> h1;
    std::vector<Vec2> y_states;  ///< Y(u_k) = X(h0(u_k))
    std::vector<std::optional<Vec2>> directions;

    [[nodiscard]] double h0_at(double u_value) const;
    [[nodiscard]] double h1_at(double u_value) const;
    /// Smallest u with h0(u) = t; exact at original grid times.
    [[nodiscard]] double h0_inverse(double t) const;
    [[nodiscard]] Vec2 y_at(double u_value) const;
};

TimeChangedPath stretch(const PathRecord& p);

struct ClockPath {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<double> local_time;
};

/// X(t) = Y(h0^-1(t)) evaluated at the original grid times. Throws
/// not_invertible when h0 is constant over a stretched segment of positive
/// length.
ClockPath unstretch(const TimeChangedPath& tc);

/// Longest u-interval on which h0 is exactly constant; 0 when strictly
/// increasing.
double max_flat_length(const TimeChangedPath& tc);

}  // namespace cusp
