#pragma once

// V(x) = |A x|^-p cos(angle(A x) + xi) with A = (sigma sigma^T)(0)^-1/2, its
// generator, and the sign conditions that keep paths away from the tip.

#include <cstdint>
#include <functional>
#include <vector>

#include "cusp/dynamics.hpp"
#include "cusp/stats.hpp"

namespace cusp {

struct LyapunovSpec {
    double p = 0.9;
    double xi = 0.0;
    double theta0 = 0.0;
    Mat2 root_cov0 = Mat2::Identity();      ///< (sigma sigma^T)(0)^{1/2}
    Mat2 inv_root_cov0 = Mat2::Identity();  ///< (sigma sigma^T)(0)^{-1/2}
};

/// theta0 = angle(A (1,0)), xi = angle(A^-1 e_star) - 2 theta0. p in (0, 1];
/// p = 1 is admitted for the harmonic model case.
LyapunovSpec make_lyapunov(const Mat2& cov0, const Vec2& e_star, double p);

/// Angle of A x measured from theta0, in (-pi, pi]. The cut therefore sits
/// opposite the tip; throws branch_cut within 1e-9 rad of it or at x = 0.
double relative_angle(const LyapunovSpec& spec, const Vec2& x);

double v_value(const LyapunovSpec& spec, const Vec2& x);
Vec2 v_grad(const LyapunovSpec& spec, const Vec2& x);
Mat2 v_hess(const LyapunovSpec& spec, const Vec2& x);

/// b . grad V + tr(sigma sigma^T hess V) / 2.
double apply_generator(const Coefficients& c, const LyapunovSpec& spec, const Vec2& x);

struct SignRow {
    double p = 0.0;
    double delta = 0.0;
    double inf_v = 0.0;
    double sup_av = 0.0;
    double sup_dv_gamma = 0.0;
    bool pass = false;
};

struct SignScan {
    std::vector<SignRow> rows;
    /// Per p, the largest passing delta (nullopt when none passes).
    std::vector<std::pair<double, std::optional<double>>> best;
    [[nodiscard]] bool any_pass() const;
};

/// Evaluates inf V, sup AV and sup DV.gamma over {x in closed D, x1 <= delta}
/// on a fixed geometric x1 grid with fiber fractions
/// {0, .05, .25, .5, .75, .95, 1}; boundary fractions feed DV.gamma. The grid
/// is the same for every delta, so the sets are nested.
SignScan sign_scan(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& e_star,
                   const std::vector<double>& p_ladder, const std::vector<double>& delta_grid, int x1_points = 240);

struct RuinReport {
    double delta = 0.0;
    double low_level = 0.0;        ///< 1/n
    std::size_t n_paths = 0;
    std::size_t hit_low = 0;       ///< reached 1/n before delta
    std::size_t hit_high = 0;      ///< reached delta before 1/n
    double v_low = 0.0;            ///< inf of V over the fiber at 1/n
    double v_high = 0.0;           ///< inf of V over the fiber at delta
    double v_start = 0.0;
    double lhs = 0.0;              ///< point estimate
    double lhs_lower = 0.0;        ///< with Wilson lower bounds of both frequencies
    double mean_v_stop = 0.0;      ///< Monte Carlo E V(X at stop)
    double mean_v_stop_se = 0.0;
    bool holds = false;            ///< lhs_lower <= v_start
};

/// Paths from (delta/2, centreline) stopped at x1 = delta or x1 = 1/n.
RuinReport ruin_check(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                      const std::function<double(const Vec2&)>& V, double delta, int n, std::size_t n_paths,
                      std::uint64_t seed, double confidence = 0.99, const BatchOptions& opt = {});
RuinReport ruin_check(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const LyapunovSpec& spec,
                      double delta, int n, std::size_t n_paths, std::uint64_t seed, double confidence = 0.99,
                      const BatchOptions& opt = {});

}  // namespace cusp
