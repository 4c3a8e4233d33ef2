#include "cusp/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cusp {

LyapunovSpec make_lyapunov(const Mat2& cov0, const Vec2& e_star, double p)
{
    require(is_spd(cov0), "covariance at the tip must be symmetric positive definite");
    require(p > 0.0 && p <= 1.0, "exponent p must lie in (0, 1]");
    require(e_star.norm() > 0.0, "e_star must be nonzero");
    LyapunovSpec s;
    s.p = p;
    s.root_cov0 = spd_sqrt(cov0);
    s.inv_root_cov0 = s.root_cov0.inverse();
    s.theta0 = angle_of(s.inv_root_cov0 * Vec2(1.0, 0.0));
    s.xi = angle_of(s.root_cov0 * e_star) - 2.0 * s.theta0;
    return s;
}

double relative_angle(const LyapunovSpec& spec, const Vec2& x)
{
    const Vec2 z = spec.inv_root_cov0 * x;
    if (z.norm() == 0.0) {
        throw Error(ErrorKind::branch_cut, "V is singular at the origin");
    }
    const double phi = angle_of(rotate(z, -spec.theta0));
    if (std::abs(phi) > std::numbers::pi - 1e-9) {
        throw Error(ErrorKind::branch_cut, "point lies on the angular cut opposite the tip");
    }
    return phi;
}

namespace {

struct Polar {
    double r;
    double phase;  ///< absolute angle + xi
    Vec2 er;
    Vec2 et;
};

Polar polar(const LyapunovSpec& spec, const Vec2& x)
{
    const double rel = relative_angle(spec, x);
    const Vec2 z = spec.inv_root_cov0 * x;
    const double theta = spec.theta0 + rel;
    const Vec2 er = unit_at_angle(theta);
    return {z.norm(), theta + spec.xi, er, Vec2(-er.y(), er.x())};
}

}  // namespace

double v_value(const LyapunovSpec& spec, const Vec2& x)
{
    const Polar P = polar(spec, x);
    return std::pow(P.r, -spec.p) * std::cos(P.phase);
}

Vec2 v_grad(const LyapunovSpec& spec, const Vec2& x)
{
    const Polar P = polar(spec, x);
    const double a = -spec.p;
    const double ra1 = std::pow(P.r, a - 1.0);
    // W_r = a r^(a-1) cos, W_theta / r = -r^(a-1) sin
    const Vec2 gz = ra1 * (a * std::cos(P.phase) * P.er - std::sin(P.phase) * P.et);
    return spec.inv_root_cov0 * gz;
}

Mat2 v_hess(const LyapunovSpec& spec, const Vec2& x)
{
    const Polar P = polar(spec, x);
    const double a = -spec.p;
    const double c = std::cos(P.phase), s = std::sin(P.phase);
    const double ra2 = std::pow(P.r, a - 2.0);
    // second derivatives of r^a cos(theta + xi), all scaled by r^(a-2)
    const double w_rr = a * (a - 1.0) * c;
    const double w_tt = a * c - c;       // W_r / r + W_thetatheta / r^2
    const double w_rt = -a * s + s;      // W_rtheta / r - W_theta / r^2
    const Mat2 hz = ra2 * (w_rr * P.er * P.er.transpose() + w_tt * P.et * P.et.transpose()
                           + w_rt * (P.er * P.et.transpose() + P.et * P.er.transpose()));
    return spec.inv_root_cov0 * hz * spec.inv_root_cov0;
}

double apply_generator(const Coefficients& c, const LyapunovSpec& spec, const Vec2& x)
{
    const Mat2 sigma = c.sigma(x);
    const Mat2 cov = sigma * sigma.transpose();
    return v_grad(spec, x).dot(c.b(x)) + 0.5 * (cov * v_hess(spec, x)).trace();
}

// ---------------------------------------------------------------------------

bool SignScan::any_pass() const
{
    return std::any_of(best.begin(), best.end(), [](const auto& b) { return b.second.has_value(); });
}

SignScan sign_scan(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& e_star,
                   const std::vector<double>& p_ladder, const std::vector<double>& delta_grid, int x1_points)
{
    require(!p_ladder.empty() && !delta_grid.empty(), "sign scan needs a p ladder and a delta grid");
    for (double delta : delta_grid) {
        require(delta > 0.0 && delta <= d.delta_top, "scan levels must lie in (0, delta_top]");
    }
    std::vector<double> deltas = delta_grid;
    std::sort(deltas.begin(), deltas.end());

    const auto xs = geometric_grid(1e-8 * d.delta_top, d.delta_top, x1_points);
    constexpr double kFractions[] = {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};
    const Mat2 cov0 = c.sigma0 * c.sigma0.transpose();

    SignScan scan;
    for (double p : p_ladder) {
        const LyapunovSpec spec = make_lyapunov(cov0, e_star, p);
        // running extrema over x1 grid points, evaluated in increasing x1
        double inf_v = std::numeric_limits<double>::infinity();
        double sup_av = -std::numeric_limits<double>::infinity();
        double sup_dg = -std::numeric_limits<double>::infinity();
        std::size_t next = 0;
        std::optional<double> best;
        for (double delta : deltas) {
            for (; next < xs.size() && xs[next] <= delta; ++next) {
                const double x1 = xs[next];
                for (double frac : kFractions) {
                    const double x2 = frac == 1.0 ? d.upper(x1) : d.lower(x1) + frac * d.width(x1);
                    const Vec2 x(x1, x2);
                    inf_v = std::min(inf_v, v_value(spec, x));
                    sup_av = std::max(sup_av, apply_generator(c, spec, x));
                    if (frac == 0.0) {
                        sup_dg = std::max(sup_dg, v_grad(spec, x).dot(f.gamma_lower(x1)));
                    } else if (frac == 1.0) {
                        sup_dg = std::max(sup_dg, v_grad(spec, x).dot(f.gamma_upper(x1)));
                    }
                }
            }
            SignRow row{p, delta, inf_v, sup_av, sup_dg, false};
            row.pass = next > 0 && inf_v > 0.0 && sup_av < 0.0 && sup_dg < 0.0;
            if (row.pass) {
                best = delta;
            }
            scan.rows.push_back(row);
        }
        scan.best.emplace_back(p, best);
    }
    return scan;
}

// ---------------------------------------------------------------------------

RuinReport ruin_check(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                      const std::function<double(const Vec2&)>& V, double delta, int n, std::size_t n_paths,
                      std::uint64_t seed, double confidence, const BatchOptions& opt)
{
    require(n > 0 && 1.0 / n < 0.5 * delta, "need 1/n < delta/2");
    require(delta <= d.delta_top, "delta must not exceed delta_top");
    RuinReport r;
    r.delta = delta;
    r.low_level = 1.0 / n;
    r.n_paths = n_paths;

    auto fiber_inf = [&](double x1) {
        double m = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 64; ++k) {
            const double x2 = k == 64 ? d.upper(x1) : d.lower(x1) + (k / 64.0) * d.width(x1);
            m = std::min(m, V(Vec2(x1, x2)));
        }
        return m;
    };
    r.v_low = fiber_inf(r.low_level);
    r.v_high = fiber_inf(delta);
    const Vec2 start(0.5 * delta, d.center(0.5 * delta));
    r.v_start = V(start);

    StoppingRule rule = StoppingRule::exit_at(delta);
    rule.lower_level = r.low_level;
    const auto samples = batch_run(d, f, c, start, rule, n_paths, rng::StreamKey(seed), opt);
    std::vector<double> stop_values;
    stop_values.reserve(samples.size());
    for (const auto& s : samples) {
        const bool low = s.flag == ExitFlag::lower_level;
        r.hit_low += low;
        r.hit_high += !low;
        stop_values.push_back(V(Vec2(low ? r.low_level : delta, s.exit_x2)));
    }
    const auto nn = static_cast<double>(n_paths);
    r.lhs = (r.v_low * static_cast<double>(r.hit_low) + r.v_high * static_cast<double>(r.hit_high)) / nn;
    const Interval p_low = wilson_interval(r.hit_low, n_paths, confidence);
    const Interval p_high = wilson_interval(r.hit_high, n_paths, confidence);
    r.lhs_lower = r.v_low * p_low.lo + r.v_high * p_high.lo;
    const EmpiricalDistribution ev(std::move(stop_values));
    r.mean_v_stop = ev.mean();
    r.mean_v_stop_se = ev.standard_error();
    r.holds = r.lhs_lower <= r.v_start;
    return r;
}

RuinReport ruin_check(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const LyapunovSpec& spec,
                      double delta, int n, std::size_t n_paths, std::uint64_t seed, double confidence,
                      const BatchOptions& opt)
{
    return ruin_check(
        d, f, c, [&spec](const Vec2& x) { return v_value(spec, x); }, delta, n, n_paths, seed, confidence, opt);
}

}  // namespace cusp
