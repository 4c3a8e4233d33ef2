#pragma once

// Reflected Euler scheme: Euler predictor, oblique projection corrector, the
// projection length accumulated as local time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cusp/geometry.hpp"
#include "cusp/rng.hpp"
#include "cusp/stats.hpp"

namespace cusp {

using DriftFn = std::function<Vec2(const Vec2&)>;
using DiffusionFn = std::function<Mat2(const Vec2&)>;

struct Coefficients {
    DriftFn b;
    DiffusionFn sigma;
    Mat2 sigma0 = Mat2::Identity();
    double lipschitz_bound = 0.0;  ///< diagnostic only
};

Coefficients constant_coefficients(const Vec2& b, const Mat2& sigma);

/// b(x) = b0 + B x, sigma(x) = S0 + x1 S1 + x2 S2.
Coefficients affine_coefficients(const Vec2& b0, const Mat2& B, const Mat2& S0, const Mat2& S1, const Mat2& S2);

/// b and sigma piecewise linear in x1 between nodes, constant beyond them.
Coefficients tabulated_coefficients(std::vector<double> x1, std::vector<Vec2> b, std::vector<Mat2> sigma);

/// (sigma sigma^T)(0) positive definite, and on a grid over the closed cusp:
/// |sigma^-1| < 2 |sigma(0)^-1| and |sigma - sigma(0)| < |sigma(0)^-1|^-1 / 2.
CheckReport check_coefficients(const CuspDomain& d, const Coefficients& c, int grid_size);

struct StepControl {
    double c_dt = 0.1;
    double dt_max = 1e-4;
    double dt_min = 1e-14;
    std::uint64_t step_budget = 100'000'000;
};

/// clamp(c_dt * width(x1)^2, dt_min, dt_max).
double adaptive_dt(const CuspDomain& d, const Vec2& x, double dt_max, double c_dt, double dt_min);

struct StepResult {
    Vec2 point;
    double lambda = 0.0;
    std::optional<Vec2> direction;
};

/// One predictor-corrector step in any projection region. `noise` is the
/// already scaled N(0, dt I) increment.
template <class Region>
StepResult reflected_step(const Region& region, const Vec2& x, const Vec2& drift, const Mat2& sigma, double dt,
                          const Vec2& noise)
{
    const Vec2 proposal = x + drift * dt + sigma * noise;
    if (region.contains(proposal)) {
        return {proposal, 0.0, std::nullopt};
    }
    const Projection p = project_oblique(region, proposal);
    return {p.point, p.lambda, p.direction};
}

StepResult reflected_euler_step(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x,
                                double dt, const Vec2& noise);

// ---------------------------------------------------------------------------

enum class ExitFlag { none, exit_level, lower_level, horizon, enter_ball, cap };

const char* to_string(ExitFlag flag);

/// Any combination of rules; the first to fire stops the path. The cap of
/// the simulated region is always absorbing.
struct StoppingRule {
    struct Ball {
        Vec2 center;
        double radius = 0.0;
    };
    std::optional<double> exit_level;   ///< stop when x1 >= level
    std::optional<double> lower_level;  ///< stop when x1 <= level
    std::optional<double> horizon;      ///< stop at time T
    std::optional<Ball> ball;           ///< stop on entering the closed ball

    static StoppingRule exit_at(double level);
    static StoppingRule below(double level);
    static StoppingRule until(double horizon);
    static StoppingRule enter(const Vec2& center, double radius);
};

struct SimOptions {
    bool record_full = true;
    bool mirror_noise_x2 = false;  ///< flip the sign of every x2 noise draw
    StepControl step;
};

struct PathSummary {
    ExitFlag exit_flag = ExitFlag::none;
    double exit_time = 0.0;
    Vec2 exit_state = Vec2::Zero();
    double total_local_time = 0.0;
    double min_x1 = 0.0;
    std::uint64_t steps = 0;
};

/// Row k holds (t_k, X_k, Lambda_k, direction of the push that produced X_k).
/// Without full recording only the first and last rows are kept. The last row
/// is interpolated to the crossing when a level rule fired.
struct PathRecord {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<double> local_time;
    std::vector<std::optional<Vec2>> push_directions;
    bool terminal_interpolated = false;
    PathSummary summary;
};

namespace detail {

inline void append(PathRecord& r, double t, const Vec2& x, double lam, const std::optional<Vec2>& dir)
{
    r.times.push_back(t);
    r.states.push_back(x);
    r.local_time.push_back(lam);
    r.push_directions.push_back(dir);
}

}  // namespace detail

/// Generic driver. `Model` supplies region(), drift(x), sigma(x), dt(x) and
/// cap() (x1 level that is absorbing; +inf for none).
template <class Model>
PathRecord run_reflected(const Model& model, const Vec2& x0, const StoppingRule& rule, const rng::Stream& stream,
                         const SimOptions& opt)
{
    const auto& region = model.region();
    require(region.contains(x0), "start point must lie in the closed domain");

    const double cap = model.cap();
    double hi_level = cap;
    ExitFlag hi_flag = ExitFlag::cap;
    if (rule.exit_level && *rule.exit_level <= cap) {
        hi_level = *rule.exit_level;
        hi_flag = ExitFlag::exit_level;
    }
    const double lo_level = rule.lower_level ? *rule.lower_level : -std::numeric_limits<double>::infinity();
    const double horizon = rule.horizon ? *rule.horizon : std::numeric_limits<double>::infinity();
    auto in_ball = [&](const Vec2& x) { return rule.ball && (x - rule.ball->center).norm() <= rule.ball->radius; };

    PathRecord rec;
    detail::append(rec, 0.0, x0, 0.0, std::nullopt);
    PathSummary& s = rec.summary;
    s.min_x1 = x0.x();

    auto finish = [&](ExitFlag flag) {
        s.exit_flag = flag;
        s.exit_time = rec.times.back();
        s.exit_state = rec.states.back();
        s.total_local_time = rec.local_time.back();
        s.min_x1 = std::min(s.min_x1, s.exit_state.x());
        return rec;
    };

    if (x0.x() >= hi_level) {
        return finish(hi_flag);
    }
    if (x0.x() <= lo_level) {
        return finish(ExitFlag::lower_level);
    }
    if (in_ball(x0)) {
        return finish(ExitFlag::enter_ball);
    }
    if (horizon <= 0.0) {
        return finish(ExitFlag::horizon);
    }

    double t = 0.0;
    double lam = 0.0;
    Vec2 x = x0;
    for (std::uint64_t k = 0;; ++k) {
        if (k >= opt.step.step_budget) {
            throw Error(ErrorKind::step_budget_exhausted,
                        "no stopping rule fired within " + std::to_string(opt.step.step_budget) + " steps");
        }
        double dt = model.dt(x);
        bool last = false;
        if (t + dt >= horizon) {
            dt = horizon - t;
            last = true;
        }
        Vec2 noise = stream.normal2(k) * std::sqrt(dt);
        if (opt.mirror_noise_x2) {
            noise.y() = -noise.y();
        }
        const StepResult step = reflected_step(region, x, model.drift(x), model.sigma(x), dt, noise);
        const double t_new = last ? horizon : t + dt;
        const double lam_new = lam + step.lambda;
        s.steps = k + 1;

        if (!opt.record_full && rec.times.size() > 1) {
            rec.times.pop_back();
            rec.states.pop_back();
            rec.local_time.pop_back();
            rec.push_directions.pop_back();
        }

        const bool up = step.point.x() >= hi_level;
        const bool down = step.point.x() <= lo_level;
        if (up || down) {
            const double level = up ? hi_level : lo_level;
            const double frac = (level - x.x()) / (step.point.x() - x.x());
            Vec2 xe = x + frac * (step.point - x);
            xe.x() = level;
            // the chord can leave a non-convex fiber; clamp back into it
            xe.y() = std::clamp(xe.y(), region.lower(level), region.upper(level));
            detail::append(rec, t + frac * dt, xe, lam + frac * step.lambda, step.direction);
            rec.terminal_interpolated = true;
            s.min_x1 = std::min(s.min_x1, x.x());
            return finish(up ? hi_flag : ExitFlag::lower_level);
        }

        detail::append(rec, t_new, step.point, lam_new, step.direction);
        s.min_x1 = std::min(s.min_x1, step.point.x());
        t = t_new;
        lam = lam_new;
        x = step.point;
        if (in_ball(x)) {
            return finish(ExitFlag::enter_ball);
        }
        if (last) {
            return finish(ExitFlag::horizon);
        }
    }
}

/// Cusp dynamics: adaptive dt, absorbing cap at delta_top.
class CuspModel
{
  public:
    CuspModel(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const StepControl& ctl)
        : region_(d, f), c_(&c), ctl_(ctl)
    {
    }

    [[nodiscard]] const CuspRegion& region() const { return region_; }
    [[nodiscard]] Vec2 drift(const Vec2& x) const { return c_->b(x); }
    [[nodiscard]] Mat2 sigma(const Vec2& x) const { return c_->sigma(x); }
    [[nodiscard]] double dt(const Vec2& x) const
    {
        return adaptive_dt(region_.domain(), x, ctl_.dt_max, ctl_.c_dt, ctl_.dt_min);
    }
    [[nodiscard]] double cap() const { return region_.cap(); }

  private:
    CuspRegion region_;
    const Coefficients* c_;
    StepControl ctl_;
};

PathRecord simulate(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                    const StoppingRule& rule, std::uint64_t seed, const SimOptions& opt = {});

PathRecord simulate(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                    const StoppingRule& rule, const rng::Stream& stream, const SimOptions& opt = {});

/// One delimited-text row per replica.
struct ExitSample {
    std::uint64_t index = 0;
    double exit_time = 0.0;
    double exit_x2 = 0.0;
    double min_x1 = 0.0;
    double total_local_time = 0.0;
    ExitFlag flag = ExitFlag::none;
};

struct MinX1Stats {
    double min = 0.0;
    double mean = 0.0;
};

struct BatchExit {
    EmpiricalDistribution exit_x2;
    EmpiricalDistribution exit_time;
    MinX1Stats min_x1;
    std::vector<ExitSample> samples;  ///< ordered by replica index
};

struct BatchOptions {
    unsigned threads = 1;
    StepControl step;
    bool mirror_noise_x2 = false;
};

/// Replica i uses stream (seed, i); replica 0 therefore reproduces simulate()
/// with the same seed.
BatchExit batch_exit(const CuspDomain& d, const DirectionField& f, const Coefficients& c, const Vec2& x0,
                     double level, std::size_t n_paths, std::uint64_t seed, const BatchOptions& opt = {});

/// Per-replica exit summaries for an arbitrary stopping rule.
std::vector<ExitSample> batch_run(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                  const Vec2& x0, const StoppingRule& rule, std::size_t n_paths,
                                  rng::StreamKey key, const BatchOptions& opt = {});

}  // namespace cusp
