#include "cusp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace cusp {

namespace {

Profile power_profile(double beta, double sign)
{
    if (beta == 2.0) {
        return [sign](double x) { return sign * (x * x); };
    }
    if (beta == 3.0) {
        return [sign](double x) { return sign * (x * x * x); };
    }
    return [beta, sign](double x) { return sign * std::pow(x, beta); };
}

Profile power_derivative(double beta, double sign)
{
    if (beta == 2.0) {
        return [sign](double x) { return sign * (2.0 * x); };
    }
    if (beta == 3.0) {
        return [sign](double x) { return sign * (3.0 * x * x); };
    }
    return [beta, sign](double x) { return sign * beta * std::pow(x, beta - 1.0); };
}

// Piecewise power law through (x_k, v_k); v_k must share one sign and be nonzero.
struct PowerTable {
    std::vector<double> logx;
    std::vector<double> logv;
    std::vector<double> slope;
    double sign = 1.0;

    PowerTable(const std::vector<double>& x, const std::vector<double>& v)
    {
        require(x.size() == v.size() && x.size() >= 2, "tabulated profile needs >= 2 matching nodes");
        sign = v.front() < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            require(x[k] > 0.0 && (k == 0 || x[k] > x[k - 1]), "tabulated nodes must be positive and increasing");
            require(v[k] * sign > 0.0, "tabulated profile values must be nonzero and keep one sign");
            logx.push_back(std::log(x[k]));
            logv.push_back(std::log(std::abs(v[k])));
        }
        for (std::size_t k = 0; k + 1 < x.size(); ++k) {
            slope.push_back((logv[k + 1] - logv[k]) / (logx[k + 1] - logx[k]));
        }
    }

    [[nodiscard]] std::size_t segment(double lx) const
    {
        const auto it = std::upper_bound(logx.begin(), logx.end(), lx);
        const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - logx.begin() - 1));
        return std::min(k, slope.size() - 1);
    }

    [[nodiscard]] double value(double x) const
    {
        if (x <= 0.0) {
            return 0.0;
        }
        const double lx = std::log(x);
        const std::size_t k = segment(lx);
        return sign * std::exp(logv[k] + slope[k] * (lx - logx[k]));
    }

    [[nodiscard]] double derivative(double x) const
    {
        if (x <= 0.0) {
            return 0.0;
        }
        const std::size_t k = segment(std::log(x));
        return value(x) * slope[k] / x;
    }
};

CheckEntry entry(std::string name, double margin, double where)
{
    return CheckEntry{std::move(name), margin > 0.0, margin, where};
}

}  // namespace

bool CuspDomain::contains_tol(const Vec2& x) const
{
    const double tol = tolerance();
    return x.x() >= -tol && x.y() >= lower(x.x()) - tol && x.y() <= upper(x.x()) + tol;
}

bool CuspDomain::on_boundary(const Vec2& x) const
{
    const double tol = tolerance();
    if (!contains_tol(x)) {
        return false;
    }
    return std::abs(x.y() - lower(x.x())) <= tol || std::abs(upper(x.x()) - x.y()) <= tol || x.x() <= tol;
}

std::vector<double> geometric_grid(double lo, double hi, int n)
{
    require(lo > 0.0 && hi > lo && n >= 2, "geometric grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double ratio = std::log(hi / lo) / (n - 1);
    for (int k = 0; k < n; ++k) {
        g[static_cast<std::size_t>(k)] = lo * std::exp(ratio * k);
    }
    g.back() = hi;
    return g;
}

CuspDomain make_power_cusp(double beta1, double beta2, double delta_top)
{
    require(beta1 > 1.0 && beta2 > 1.0, "power cusp needs beta1, beta2 > 1");
    require(delta_top > 0.0, "delta_top must be positive");
    const double slope1 = beta1 * std::pow(delta_top, beta1 - 1.0);
    const double slope2 = beta2 * std::pow(delta_top, beta2 - 1.0);
    require(slope1 < 0.5 && slope2 < 0.5, "delta_top violates the derivative cap |psi'| < 1/2");

    CuspDomain d;
    d.psi1 = power_profile(beta1, -1.0);
    d.psi2 = power_profile(beta2, 1.0);
    d.dpsi1 = power_derivative(beta1, -1.0);
    d.dpsi2 = power_derivative(beta2, 1.0);
    d.delta_top = delta_top;
    if (beta1 < beta2) {
        d.L_limit = -1.0;
    } else if (beta1 > beta2) {
        d.L_limit = 0.0;
    } else {
        d.L_limit = -0.5;
    }
    return d;
}

double estimate_ratio_limit(const Profile& psi1, const Profile& psi2, double delta_top)
{
    auto ratio = [&](double x) { return psi1(x) / (psi2(x) - psi1(x)); };
    const double x0 = 1e-6 * delta_top;
    const double r0 = ratio(x0);
    const double r1 = ratio(0.5 * x0);
    const double r2 = ratio(0.25 * x0);
    const double d1 = r1 - r0;
    const double d2 = r2 - r1;
    if (!std::isfinite(r2)) {
        return r2;
    }
    if (std::abs(d1) <= 1e-15 * (1.0 + std::abs(r2))) {
        return r2;
    }
    const double rho = d2 / d1;
    if (!(std::abs(rho) < 1.0)) {
        return r2;
    }
    return r2 + d2 * rho / (1.0 - rho);
}

CuspDomain make_profile_domain(Profile psi1, Profile psi2, Profile dpsi1, Profile dpsi2, double delta_top,
                               std::optional<double> L_limit)
{
    require(delta_top > 0.0, "delta_top must be positive");
    require(psi1 && psi2 && dpsi1 && dpsi2, "all four profile functions are required");
    CuspDomain d;
    d.psi1 = std::move(psi1);
    d.psi2 = std::move(psi2);
    d.dpsi1 = std::move(dpsi1);
    d.dpsi2 = std::move(dpsi2);
    d.delta_top = delta_top;
    d.L_limit = L_limit ? *L_limit : estimate_ratio_limit(d.psi1, d.psi2, delta_top);
    return d;
}

CuspDomain make_tabulated_domain(std::vector<double> x1, std::vector<double> psi1, std::vector<double> psi2,
                                 double delta_top)
{
    auto lower = std::make_shared<const PowerTable>(x1, psi1);
    auto upper = std::make_shared<const PowerTable>(x1, psi2);
    return make_profile_domain([lower](double x) { return lower->value(x); },
                               [upper](double x) { return upper->value(x); },
                               [lower](double x) { return lower->derivative(x); },
                               [upper](double x) { return upper->derivative(x); }, delta_top);
}

bool CheckReport::all_pass() const
{
    return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.pass; });
}

const CheckEntry* CheckReport::find(const std::string& name) const
{
    for (const auto& e : entries) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

CheckReport check_domain(const CuspDomain& d, int grid_size)
{
    require(grid_size >= 10, "check_domain needs grid_size >= 10");
    const double x_min = 1e-8 * d.delta_top;
    const auto grid = geometric_grid(x_min, d.delta_top, grid_size);

    CheckReport report;

    // strict ordering, relative to the profile magnitudes
    {
        double worst = std::numeric_limits<double>::infinity();
        double where = grid.front();
        for (double x : grid) {
            const double lo = d.psi1(x), up = d.psi2(x);
            const double scale = std::max(std::abs(lo) + std::abs(up), std::numeric_limits<double>::min());
            const double m = (up - lo) / scale;
            if (!(m >= worst)) {
                worst = std::isnan(m) ? -1.0 : m;
                where = x;
            }
        }
        report.entries.push_back(entry("strict ordering", worst, where));
    }

    // profiles vanish at the tip
    {
        const double value = std::max(std::abs(d.psi1(x_min)), std::abs(d.psi2(x_min)));
        report.entries.push_back(entry("profiles -> 0", 1e-6 * d.delta_top - value, x_min));
    }

    // derivatives vanish at the tip: either already negligible, or decaying
    // like a positive power over the last decade of the grid
    {
        const double value = std::max(std::abs(d.dpsi1(x_min)), std::abs(d.dpsi2(x_min)));
        const double value10 = std::max(std::abs(d.dpsi1(10.0 * x_min)), std::abs(d.dpsi2(10.0 * x_min)));
        double margin = 1e-6 - value;
        if (margin <= 0.0 && value10 > 0.0) {
            const double decay = std::log10(value10 / value);
            margin = decay - 0.05;
        }
        report.entries.push_back(entry("derivative -> 0", margin, x_min));
    }

    // derivative cap |psi'| < 1/2 on the whole cap region
    {
        double sup = 0.0;
        double where = grid.front();
        for (double x : grid) {
            const double v = std::max(std::abs(d.dpsi1(x)), std::abs(d.dpsi2(x)));
            if (!(v <= sup)) {
                sup = std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
                where = x;
            }
        }
        report.entries.push_back(entry("derivative cap", 0.5 - sup, where));
    }

    // psi1 / (psi2 - psi1) -> L
    {
        const double r = d.psi1(x_min) / (d.psi2(x_min) - d.psi1(x_min));
        const double err = std::abs(r - d.L_limit);
        const double tol = 1e-3 * std::max(1.0, std::abs(d.L_limit));
        report.entries.push_back(entry("ratio -> L", std::isfinite(err) ? tol - err : -1.0, x_min));
    }
    return report;
}

// ---------------------------------------------------------------------------

Vec2 DirectionField::tip_direction() const
{
    const Vec2 mid = 0.5 * (gamma1_0 + gamma2_0);
    const double n = mid.norm();
    if (n <= 1e-12) {
        return {1.0, 0.0};
    }
    return mid / n;
}

Vec2 inward_normal_lower(const CuspDomain& d, double x1)
{
    const double s = d.dpsi1(x1);
    return Vec2(-s, 1.0) / std::sqrt(1.0 + s * s);
}

Vec2 inward_normal_upper(const CuspDomain& d, double x1)
{
    const double s = d.dpsi2(x1);
    return Vec2(s, -1.0) / std::sqrt(1.0 + s * s);
}

DirectionField constant_angle_field(const CuspDomain& d, double theta_lower, double theta_upper)
{
    const double half_pi = 0.5 * std::numbers::pi;
    require(std::abs(theta_lower) < half_pi && std::abs(theta_upper) < half_pi,
            "reflection angle must satisfy |theta| < pi/2");
    const double cl = std::cos(theta_lower), sl = std::sin(theta_lower);
    const double cu = std::cos(theta_upper), su = std::sin(theta_upper);
    auto rot = [](const Vec2& v, double c, double s) { return Vec2(v.x() * c - v.y() * s, v.x() * s + v.y() * c); };

    DirectionField f;
    // copies of the derivative functors keep the field independent of `d`'s lifetime
    f.gamma_lower = [dpsi = d.dpsi1, cl, sl, rot](double x1) {
        const double s = dpsi(x1);
        return rot(Vec2(-s, 1.0) / std::sqrt(1.0 + s * s), cl, sl);
    };
    f.gamma_upper = [dpsi = d.dpsi2, cu, su, rot](double x1) {
        const double s = dpsi(x1);
        return rot(Vec2(s, -1.0) / std::sqrt(1.0 + s * s), cu, su);
    };
    f.gamma1_0 = rot(Vec2(0.0, 1.0), cl, sl);
    f.gamma2_0 = rot(Vec2(0.0, -1.0), cu, su);
    return f;
}

DirectionField constant_direction_field(const Vec2& lower, const Vec2& upper)
{
    require(lower.norm() > 0.0 && upper.norm() > 0.0, "reflection directions must be nonzero");
    const Vec2 gl = lower.normalized();
    const Vec2 gu = upper.normalized();
    DirectionField f;
    f.gamma_lower = [gl](double) { return gl; };
    f.gamma_upper = [gu](double) { return gu; };
    f.gamma1_0 = gl;
    f.gamma2_0 = gu;
    return f;
}

CheckReport check_field(const CuspDomain& d, const DirectionField& f, int grid_size)
{
    require(grid_size >= 10, "check_field needs grid_size >= 10");
    const double x_min = 1e-8 * d.delta_top;
    const auto grid = geometric_grid(x_min, d.delta_top, grid_size);

    double unit_err = 0.0, unit_where = grid.front();
    double normal_min = std::numeric_limits<double>::infinity(), normal_where = grid.front();
    for (double x : grid) {
        const Vec2 gl = f.gamma_lower(x), gu = f.gamma_upper(x);
        const double err = std::max(std::abs(gl.norm() - 1.0), std::abs(gu.norm() - 1.0));
        if (err > unit_err) {
            unit_err = err;
            unit_where = x;
        }
        const double dot = std::min(gl.dot(inward_normal_lower(d, x)), gu.dot(inward_normal_upper(d, x)));
        if (dot < normal_min) {
            normal_min = dot;
            normal_where = x;
        }
    }
    const double tip_err = std::max((f.gamma_lower(x_min) - f.gamma1_0).norm(),
                                    (f.gamma_upper(x_min) - f.gamma2_0).norm());

    CheckReport report;
    report.entries.push_back(entry("unit length", 1e-12 - unit_err, unit_where));
    report.entries.push_back(entry("positive normal component", normal_min, normal_where));
    report.entries.push_back(entry("tip limits", 1e-3 - tip_err, x_min));
    return report;
}

// ---------------------------------------------------------------------------

ConeSearch find_cone_certificate(const Vec2& g1, const Vec2& g2, const Vec2& axis)
{
    const Vec2 a = axis.normalized();
    auto objective = [&](double phi) {
        const Vec2 e = unit_at_angle(phi);
        return std::min({e.dot(a), e.dot(g1), e.dot(g2)});
    };

    constexpr int kScan = 720;
    const double base = angle_of(a);
    const double step = 2.0 * std::numbers::pi / kScan;
    double best_phi = base;
    double best = objective(base);
    for (int k = 1; k < kScan; ++k) {
        // scan outward from the axis so the order is rotation independent
        const int j = (k + 1) / 2 * (k % 2 == 1 ? 1 : -1);
        const double phi = base + j * step;
        const double v = objective(phi);
        if (v > best) {
            best = v;
            best_phi = phi;
        }
    }

    // golden-section refinement on the bracket around the best scan point
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = best_phi - step, hi = best_phi + step;
    double c = hi - inv_phi * (hi - lo), dd = lo + inv_phi * (hi - lo);
    double fc = objective(c), fd = objective(dd);
    while (hi - lo > 1e-10) {
        if (fc > fd) {
            hi = dd;
            dd = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = dd;
            fc = fd;
            dd = lo + inv_phi * (hi - lo);
            fd = objective(dd);
        }
    }
    double phi_star = 0.5 * (lo + hi);
    double m_star = objective(phi_star);
    if (best > m_star) {
        phi_star = best_phi;
        m_star = best;
    }

    ConeSearch out;
    out.best_direction = unit_at_angle(phi_star);
    out.best_margin = m_star;
    if (m_star > 1e-12) {
        out.certificate = ConeCertificate{out.best_direction, m_star};
    }
    return out;
}

ConeSearch find_cone_certificate(const DirectionField& f)
{
    return find_cone_certificate(f.gamma1_0, f.gamma2_0);
}

std::pair<double, double> positive_combination(const Vec2& g1, const Vec2& g2, const Vec2& target)
{
    const double det = cross(g1, g2);
    const double scale = g1.norm() * g2.norm();
    if (std::abs(det) > 1e-14 * scale) {
        return {cross(target, g2) / det, cross(g1, target) / det};
    }
    // rank one: minimum-norm least-squares solution
    const Vec2 u = g1.normalized();
    const double n1 = g1.norm();
    const double n2 = (g2.dot(u) >= 0.0 ? 1.0 : -1.0) * g2.norm();
    const double c = target.dot(u);
    const double denom = n1 * n1 + n2 * n2;
    return {c * n1 / denom, c * n2 / denom};
}

}  // namespace cusp
