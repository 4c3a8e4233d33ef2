#include "cusp/dynamics.hpp"

#include <algorithm>
#include <memory>

#include "cusp/parallel.hpp"

namespace cusp {

Coefficients constant_coefficients(const Vec2& b, const Mat2& sigma)
{
    Coefficients c;
    c.b = [b](const Vec2&) { return b; };
    c.sigma = [sigma](const Vec2&) { return sigma; };
    c.sigma0 = sigma;
    c.lipschitz_bound = 0.0;
    return c;
}

Coefficients affine_coefficients(const Vec2& b0, const Mat2& B, const Mat2& S0, const Mat2& S1, const Mat2& S2)
{
    Coefficients c;
    c.b = [b0, B](const Vec2& x) -> Vec2 { return b0 + B * x; };
    c.sigma = [S0, S1, S2](const Vec2& x) -> Mat2 { return S0 + x.x() * S1 + x.y() * S2; };
    c.sigma0 = S0;
    const double s_lip = std::sqrt(S1.squaredNorm() + S2.squaredNorm());
    c.lipschitz_bound = std::max(op_norm(B), s_lip);
    return c;
}

namespace {

struct CoefficientTable {
    std::vector<double> x1;
    std::vector<Vec2> b;
    std::vector<Mat2> sigma;

    // index k and weight w with x = (1-w) x1[k] + w x1[k+1], clamped
    [[nodiscard]] std::pair<std::size_t, double> locate(double x) const
    {
        if (x <= x1.front()) {
            return {0, 0.0};
        }
        if (x >= x1.back()) {
            return {x1.size() - 2, 1.0};
        }
        const auto it = std::upper_bound(x1.begin(), x1.end(), x);
        const auto k = static_cast<std::size_t>(it - x1.begin() - 1);
        return {k, (x - x1[k]) / (x1[k + 1] - x1[k])};
    }
};

}  // namespace

Coefficients tabulated_coefficients(std::vector<double> x1, std::vector<Vec2> b, std::vector<Mat2> sigma)
{
    require(x1.size() >= 2 && b.size() == x1.size() && sigma.size() == x1.size(),
            "tabulated coefficients need >= 2 nodes with matching b and sigma");
    for (std::size_t k = 1; k < x1.size(); ++k) {
        require(x1[k] > x1[k - 1], "tabulated coefficient nodes must be increasing");
    }
    auto t = std::make_shared<const CoefficientTable>(CoefficientTable{std::move(x1), std::move(b), std::move(sigma)});

    Coefficients c;
    c.b = [t](const Vec2& x) -> Vec2 {
        const auto [k, w] = t->locate(x.x());
        return (1.0 - w) * t->b[k] + w * t->b[k + 1];
    };
    c.sigma = [t](const Vec2& x) -> Mat2 {
        const auto [k, w] = t->locate(x.x());
        return (1.0 - w) * t->sigma[k] + w * t->sigma[k + 1];
    };
    c.sigma0 = c.sigma(Vec2::Zero());
    double lip = 0.0;
    for (std::size_t k = 0; k + 1 < t->x1.size(); ++k) {
        const double h = t->x1[k + 1] - t->x1[k];
        lip = std::max({lip, (t->b[k + 1] - t->b[k]).norm() / h, op_norm(t->sigma[k + 1] - t->sigma[k]) / h});
    }
    c.lipschitz_bound = lip;
    return c;
}

CheckReport check_coefficients(const CuspDomain& d, const Coefficients& c, int grid_size)
{
    require(grid_size >= 10, "check_coefficients needs grid_size >= 10");
    CheckReport report;

    const Mat2 cov0 = c.sigma0 * c.sigma0.transpose();
    const double min_eig = 0.5 * (cov0.trace() - std::sqrt(std::pow(cov0(0, 0) - cov0(1, 1), 2) + 4 * cov0(0, 1) * cov0(1, 0)));
    report.entries.push_back({"cov0 positive definite", min_eig > 0.0, min_eig, 0.0});
    if (!(min_eig > 0.0)) {
        return report;
    }

    const double inv0 = op_norm(c.sigma0.inverse());
    const double inv_cap = 2.0 * inv0;
    const double dev_cap = 0.5 / inv0;
    double inv_margin = std::numeric_limits<double>::infinity(), inv_where = 0.0;
    double dev_margin = std::numeric_limits<double>::infinity(), dev_where = 0.0;

    const auto xs = geometric_grid(1e-8 * d.delta_top, d.delta_top, grid_size);
    constexpr double kFractions[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double x1 : xs) {
        for (double frac : kFractions) {
            const Vec2 x(x1, d.lower(x1) + frac * d.width(x1));
            const Mat2 s = c.sigma(x);
            const double det = s.determinant();
            const double inv = det != 0.0 ? op_norm(s.inverse()) : std::numeric_limits<double>::infinity();
            if (inv_cap - inv < inv_margin) {
                inv_margin = inv_cap - inv;
                inv_where = x1;
            }
            const double dev = op_norm(s - c.sigma0);
            if (dev_cap - dev < dev_margin) {
                dev_margin = dev_cap - dev;
                dev_where = x1;
            }
        }
    }
    report.entries.push_back({"inverse bound", inv_margin > 0.0, inv_margin, inv_where});
    report.entries.push_back({"deviation bound", dev_margin > 0.0, dev_margin, dev_where});
    return report;
}

double adaptive_dt(const CuspDomain& d, const Vec2& x, double dt_max, double c_dt, double dt_min)
{
    const double w = d.width(x.x());
    return std::clamp(c_dt * w * w, dt_min, dt_max);
}

StepResult reflected_euler_step(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x,
                                double dt, const Vec2& noise)
{
    require(dt > 0.0, "dt must be positive");
    return reflected_step(CuspRegion(d, f), x, c.b(x), c.sigma(x), dt, noise);
}

const char* to_string(ExitFlag flag)
{
    switch (flag) {
    case ExitFlag::none: return "none";
    case ExitFlag::exit_level: return "exit_level";
    case ExitFlag::lower_level: return "lower_level";
    case ExitFlag::horizon: return "horizon";
    case ExitFlag::enter_ball: return "enter_ball";
    case ExitFlag::cap: return "cap";
    }
    return "unknown";
}

StoppingRule StoppingRule::exit_at(double level)
{
    StoppingRule r;
    r.exit_level = level;
    return r;
}

StoppingRule StoppingRule::below(double level)
{
    StoppingRule r;
    r.lower_level = level;
    return r;
}

StoppingRule StoppingRule::until(double horizon)
{
    StoppingRule r;
    r.horizon = horizon;
    return r;
}

StoppingRule StoppingRule::enter(const Vec2& center, double radius)
{
    StoppingRule r;
    r.ball = StoppingRule::Ball{center, radius};
    return r;
}

namespace {

void validate_rule(const CuspDomain& d, const StoppingRule& rule)
{
    for (const auto& level : {rule.exit_level, rule.lower_level}) {
        if (level) {
            require(*level > 0.0 && *level <= d.delta_top, "level rules need a parameter in (0, delta_top]");
        }
    }
    if (rule.horizon) {
        require(*rule.horizon > 0.0, "time horizon must be positive");
    }
    if (rule.ball) {
        require(rule.ball->radius > 0.0, "ball radius must be positive");
    }
}

}  // namespace

PathRecord simulate(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                    const StoppingRule& rule, const rng::Stream& stream, const SimOptions& opt)
{
    validate_rule(d, rule);
    return run_reflected(CuspModel(d, f, c, opt.step), x0, rule, stream, opt);
}

PathRecord simulate(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                    const StoppingRule& rule, std::uint64_t seed, const SimOptions& opt)
{
    return simulate(d, f, c, x0, rule, rng::Stream(rng::StreamKey(seed), 0), opt);
}

std::vector<ExitSample> batch_run(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                  const Vec2& x0, const StoppingRule& rule, std::size_t n_paths,
                                  rng::StreamKey key, const BatchOptions& opt)
{
    require(n_paths >= 1, "n_paths must be >= 1");
    validate_rule(d, rule);
    const CuspModel model(d, f, c, opt.step);
    SimOptions sim;
    sim.record_full = false;
    sim.mirror_noise_x2 = opt.mirror_noise_x2;
    sim.step = opt.step;

    std::vector<ExitSample> out(n_paths);
    parallel_for(n_paths, opt.threads, [&](std::size_t i) {
        const auto rec = run_reflected(model, x0, rule, rng::Stream(key, i), sim);
        const auto& s = rec.summary;
        out[i] = ExitSample{i, s.exit_time, s.exit_state.y(), s.min_x1, s.total_local_time, s.exit_flag};
    });
    return out;
}

BatchExit batch_exit(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                     double level, std::size_t n_paths, std::uint64_t seed, const BatchOptions& opt)
{
    auto samples = batch_run(d, f, c, x0, StoppingRule::exit_at(level), n_paths, rng::StreamKey(seed), opt);
    std::vector<double> x2, tau;
    x2.reserve(samples.size());
    tau.reserve(samples.size());
    MinX1Stats m{std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& s : samples) {
        x2.push_back(s.exit_x2);
        tau.push_back(s.exit_time);
        m.min = std::min(m.min, s.min_x1);
        m.mean += s.min_x1;
    }
    m.mean /= static_cast<double>(samples.size());
    return BatchExit{EmpiricalDistribution(std::move(x2)), EmpiricalDistribution(std::move(tau)), m,
                     std::move(samples)};
}

}  // namespace cusp
