#pragma once

// Cusp domain {0 < x1 <= delta_top, psi1(x1) < x2 < psi2(x1)}, the oblique
// direction field on its two boundary arcs, and the admissibility checks at
// the tip.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cusp/error.hpp"
#include "cusp/linalg.hpp"

namespace cusp {

using Profile = std::function<double(double)>;

struct CuspDomain {
    Profile psi1;
    Profile psi2;
    Profile dpsi1;
    Profile dpsi2;
    double delta_top = 0.0;
    double L_limit = 0.0;

    // Profiles are evaluated at max(x1, 0); the tip constraint x1 >= 0 is
    // handled separately by the membership predicate.
    [[nodiscard]] double lower(double x1) const { return psi1(x1 > 0.0 ? x1 : 0.0); }
    [[nodiscard]] double upper(double x1) const { return psi2(x1 > 0.0 ? x1 : 0.0); }
    [[nodiscard]] double width(double x1) const { return upper(x1) - lower(x1); }
    [[nodiscard]] double center(double x1) const { return 0.5 * (lower(x1) + upper(x1)); }

    /// Boundary membership tolerance.
    [[nodiscard]] double tolerance() const { return 1e-12 * delta_top; }

    /// Exact closed-domain membership (no tolerance).
    [[nodiscard]] bool contains(const Vec2& x) const
    {
        return x.x() >= 0.0 && x.y() >= lower(x.x()) && x.y() <= upper(x.x());
    }

    /// Membership up to the boundary tolerance.
    [[nodiscard]] bool contains_tol(const Vec2& x) const;

    /// True when x lies within tolerance of either arc (or of the tip).
    [[nodiscard]] bool on_boundary(const Vec2& x) const;
};

/// psi1 = -x1^beta1, psi2 = x1^beta2 with the analytic ratio limit L.
CuspDomain make_power_cusp(double beta1, double beta2, double delta_top);

/// Arbitrary profiles. When `L_limit` is absent it is estimated from the
/// profile ratio by extrapolation on a geometric grid toward the tip.
CuspDomain make_profile_domain(Profile psi1, Profile psi2, Profile dpsi1, Profile dpsi2, double delta_top,
                               std::optional<double> L_limit = std::nullopt);

/// Profiles tabulated on increasing positive nodes, interpolated as piecewise
/// power laws (linear in log|x1|-log|psi|). Values must be strictly signed
/// (psi1 < 0 < psi2 pattern is not required, but each profile keeps one sign).
CuspDomain make_tabulated_domain(std::vector<double> x1, std::vector<double> psi1, std::vector<double> psi2,
                                 double delta_top);

/// Limit of psi1 / (psi2 - psi1) as x1 -> 0+, by Richardson extrapolation with
/// an order estimated from three successive geometric grid values.
double estimate_ratio_limit(const Profile& psi1, const Profile& psi2, double delta_top);

struct CheckEntry {
    std::string name;
    bool pass = false;
    double margin = 0.0;      ///< positive when satisfied
    double worst_x1 = 0.0;    ///< location of the smallest margin
};

struct CheckReport {
    std::vector<CheckEntry> entries;
    [[nodiscard]] bool all_pass() const;
    [[nodiscard]] const CheckEntry* find(const std::string& name) const;
};

/// Evaluates every domain invariant on a geometric grid from
/// 1e-8 * delta_top to delta_top.
CheckReport check_domain(const CuspDomain& d, int grid_size);

std::vector<double> geometric_grid(double lo, double hi, int n);

// ---------------------------------------------------------------------------

struct DirectionField {
    std::function<Vec2(double)> gamma_lower;
    std::function<Vec2(double)> gamma_upper;
    Vec2 gamma1_0 = Vec2::Zero();
    Vec2 gamma2_0 = Vec2::Zero();

    /// Normalized midpoint of the tip hull [gamma1_0, gamma2_0]. Falls back to
    /// (1, 0) when the two limits are antipodal.
    [[nodiscard]] Vec2 tip_direction() const;
};

Vec2 inward_normal_lower(const CuspDomain& d, double x1);
Vec2 inward_normal_upper(const CuspDomain& d, double x1);

/// gamma = inward normal rotated counter-clockwise by theta on each arc.
DirectionField constant_angle_field(const CuspDomain& d, double theta_lower, double theta_upper);

/// Constant (normalized) directions on each arc.
DirectionField constant_direction_field(const Vec2& lower, const Vec2& upper);

/// Unit length, positive normal component and convergence to the tip limits.
CheckReport check_field(const CuspDomain& d, const DirectionField& f, int grid_size);

struct ConeCertificate {
    Vec2 e_star;
    double margin = 0.0;
};

struct ConeSearch {
    std::optional<ConeCertificate> certificate;
    Vec2 best_direction;
    double best_margin = 0.0;
};

/// Maximizes min(<e, axis>, <e, g1>, <e, g2>) over unit e: coarse scan
/// relative to the axis angle, then golden-section refinement to 1e-10 rad.
ConeSearch find_cone_certificate(const Vec2& g1, const Vec2& g2, const Vec2& axis = Vec2(1.0, 0.0));
ConeSearch find_cone_certificate(const DirectionField& f);

/// Coefficients (a, b) with a*g1 + b*g2 = target; least-norm split when g1
/// and g2 are parallel.
std::pair<double, double> positive_combination(const Vec2& g1, const Vec2& g2, const Vec2& target = Vec2(1.0, 0.0));

// ---------------------------------------------------------------------------
// Oblique projection

struct Projection {
    Vec2 point;
    double lambda = 0.0;
    std::optional<Vec2> direction;
    int rounds = 0;
};

inline constexpr int kMaxCorrectionRounds = 50;

namespace detail {

// Smallest lambda (to tolerance `tol`) with pred(x + lambda * dir), given
// pred(x) is false. Doubling bracket, then bisection; returns the feasible end.
template <class Pred>
std::optional<double> solve_ray(const Vec2& x, const Vec2& dir, double guess, double tol, Pred&& pred)
{
    double lo = 0.0;
    double hi = guess > tol ? guess : tol;
    int doublings = 0;
    while (!pred(Vec2(x + hi * dir))) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) {
            return std::nullopt;
        }
    }
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (pred(Vec2(x + mid * dir))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

}  // namespace detail

/// Generic oblique correction for any two-arc region exposing lower/upper
/// boundary graphs, arc directions, a tip direction and a tolerance. Shared by
/// the cusp and the strip so both use identical discretization.
template <class Region>
Projection project_oblique(const Region& region, Vec2 x)
{
    Projection out{x, 0.0, std::nullopt, 0};
    // bisect finer than the membership tolerance so corrected points sit
    // within tolerance of the arc they were pushed onto
    const double tol = 0.25 * region.tolerance();
    int last_arc = 0;  // -1 lower, +1 upper, 2 tip
    for (int round = 0; round < kMaxCorrectionRounds; ++round) {
        const double lo = region.lower(x.x());
        const double up = region.upper(x.x());
        const bool tip = region.has_tip() && x.x() < 0.0;
        const bool below = x.y() < lo;
        const bool above = x.y() > up;
        if (!tip && !below && !above) {
            out.point = x;
            return out;
        }
        ++out.rounds;

        // A push along one arc that overshoots the opposite arc means the
        // fiber is thinner than the step; fall back to the tip direction.
        const bool ping_pong = (below && last_arc == 1) || (above && last_arc == -1);
        Vec2 dir;
        std::optional<double> lam;
        if (tip || (below && above) || ping_pong) {
            dir = region.tip_direction();
            const double guess = std::max({std::abs(x.x()), std::abs(x.y()), tol});
            lam = detail::solve_ray(x, dir, guess, tol, [&](const Vec2& p) { return region.contains(p); });
            last_arc = 2;
        } else if (below) {
            dir = region.gamma_lower(x.x());
            const double guess = (lo - x.y()) / std::max(dir.y(), 1e-3);
            lam = detail::solve_ray(x, dir, guess, tol,
                                    [&](const Vec2& p) { return p.y() >= region.lower(p.x()); });
            last_arc = -1;
        } else {
            dir = region.gamma_upper(x.x());
            const double guess = (x.y() - up) / std::max(-dir.y(), 1e-3);
            lam = detail::solve_ray(x, dir, guess, tol,
                                    [&](const Vec2& p) { return p.y() <= region.upper(p.x()); });
            last_arc = 1;
        }
        if (!lam) {
            throw Error(ErrorKind::no_feasible_correction, "correction ray never re-enters the domain");
        }
        x += *lam * dir;
        out.lambda += *lam;
        out.direction = dir;
    }
    throw Error(ErrorKind::no_feasible_correction,
                "no admissible point after " + std::to_string(kMaxCorrectionRounds) + " correction rounds");
}

/// View of a cusp domain plus its direction field as a projection region.
class CuspRegion
{
  public:
    CuspRegion(const CuspDomain& d, const DirectionField& f) : d_(&d), f_(&f), tip_(f.tip_direction()) {}

    [[nodiscard]] double lower(double x1) const { return d_->lower(x1); }
    [[nodiscard]] double upper(double x1) const { return d_->upper(x1); }
    [[nodiscard]] double width(double x1) const { return d_->width(x1); }
    [[nodiscard]] bool has_tip() const { return true; }
    [[nodiscard]] bool contains(const Vec2& x) const { return d_->contains(x); }
    [[nodiscard]] double tolerance() const { return d_->tolerance(); }
    [[nodiscard]] Vec2 gamma_lower(double x1) const { return f_->gamma_lower(clamp(x1)); }
    [[nodiscard]] Vec2 gamma_upper(double x1) const { return f_->gamma_upper(clamp(x1)); }
    [[nodiscard]] Vec2 tip_direction() const { return tip_; }
    [[nodiscard]] double cap() const { return d_->delta_top; }

    [[nodiscard]] const CuspDomain& domain() const { return *d_; }
    [[nodiscard]] const DirectionField& field() const { return *f_; }

  private:
    [[nodiscard]] double clamp(double x1) const
    {
        return x1 <= 0.0 ? std::numeric_limits<double>::min() : x1;
    }

    const CuspDomain* d_;
    const DirectionField* f_;
    Vec2 tip_;
};

inline Projection project_oblique(const CuspDomain& d, const DirectionField& f, const Vec2& x)
{
    return project_oblique(CuspRegion(d, f), x);
}

}  // namespace cusp
