#include "cusp/scaling.hpp"

#include <algorithm>
#include <cmath>

#include "cusp/parallel.hpp"

namespace cusp {

namespace {

// Stream tags; fixed so every study draws the same numbers for a given seed.
constexpr std::uint64_t kTagCusp = 1;
constexpr std::uint64_t kTagStrip = 2;
constexpr std::uint64_t kTagFloorA = 3;
constexpr std::uint64_t kTagFloorB = 4;

}  // namespace

ScaleSequence scale_sequence(const CuspDomain& d, double delta0, int n_levels)
{
    require(delta0 > 0.0 && delta0 <= d.delta_top, "delta0 must lie in (0, delta_top]");
    require(n_levels >= 0, "n_levels must be nonnegative");
    ScaleSequence s;
    s.deltas.push_back(delta0);
    for (int k = 0; k < n_levels; ++k) {
        const double delta = s.deltas.back();
        const double w = d.width(delta);
        const double next = delta - w;
        if (!(w > 0.0) || !(next > 0.0) || !(next < delta) || !std::isfinite(w)) {
            throw Error(ErrorKind::sequence_exit, "level " + std::to_string(k + 1) + " leaves (0, delta0]");
        }
        s.deltas.push_back(next);
        s.widths.push_back(delta - next);
        s.profile_widths.push_back(w);
    }
    return s;
}

RescaledPath rescale_segment(const PathRecord& p, const ScaleSequence& s, std::size_t n)
{
    require(n + 1 < s.deltas.size(), "level index beyond the computed sequence");
    require(!p.states.empty(), "empty path");
    const double base = s.deltas[n + 1];
    const double q = s.widths[n];
    if (std::abs(p.states.front().x() - base) > 1e-12 * base) {
        throw Error(ErrorKind::start_mismatch, "path does not start at level " + std::to_string(n + 1));
    }
    RescaledPath r;
    const double q2 = q * q;
    for (std::size_t k = 0; k < p.states.size(); ++k) {
        r.times.push_back(p.times[k] / q2);
        r.states.emplace_back((p.states[k].x() - base) / q, p.states[k].y() / q);
        r.local_time.push_back(p.local_time[k] / q);
    }
    return r;
}

// ---------------------------------------------------------------------------

StripSpec strip_from(const CuspDomain& d, const DirectionField& f, const Coefficients& c)
{
    StripSpec spec;
    spec.L = d.L_limit;
    spec.sigma0 = c.sigma0;
    spec.dir_lower = f.gamma1_0;
    spec.dir_upper = f.gamma2_0;
    return spec;
}

StripRegion::StripRegion(const StripSpec& spec)
    : L_(spec.L), lower_(spec.dir_lower.normalized()), upper_(spec.dir_upper.normalized())
{
    require(lower_.y() > 0.0 && upper_.y() < 0.0, "strip directions must point into the band");
    const Vec2 mid = 0.5 * (lower_ + upper_);
    tip_ = mid.norm() > 1e-12 ? Vec2(mid.normalized()) : Vec2(1.0, 0.0);
}

StepControl strip_step_control(const StepControl& cusp_control)
{
    StepControl ctl = cusp_control;
    ctl.dt_max = std::numeric_limits<double>::infinity();
    return ctl;
}

PathRecord simulate_strip(const StripSpec& spec, const Vec2& x0, double stop_at_x1, const rng::Stream& stream,
                          const SimOptions& opt)
{
    return run_reflected(StripModel(spec, opt.step), x0, StoppingRule::exit_at(stop_at_x1), stream, opt);
}

PathRecord simulate_strip(const StripSpec& spec, const Vec2& x0, double stop_at_x1, std::uint64_t seed,
                          const SimOptions& opt)
{
    return simulate_strip(spec, x0, stop_at_x1, rng::Stream(rng::StreamKey(seed), 0), opt);
}

std::vector<ExitSample> strip_batch(const StripSpec& spec, const Vec2& x0, double stop_at_x1, std::size_t n_paths,
                                    rng::StreamKey key, const BatchOptions& opt)
{
    require(n_paths >= 1, "n_paths must be >= 1");
    const StripModel model(spec, opt.step);
    const StoppingRule rule = StoppingRule::exit_at(stop_at_x1);
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

// ---------------------------------------------------------------------------

Interval hitting_interval(const CuspDomain& d, const ScaleSequence& s, std::size_t n, double epsilon)
{
    require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1]");
    require(n < s.levels(), "level index beyond the computed sequence");
    const double delta = s.deltas[n];
    const double centre = 0.5 * (d.lower(delta) + d.upper(delta));
    const double half = 0.5 * epsilon * s.widths[n];
    return {centre - half, centre + half};
}

HittingEstimate estimate_hitting(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                 const ScaleSequence& s, std::size_t n, double epsilon, std::size_t n_paths,
                                 std::uint64_t seed, int grid_points, double confidence, const BatchOptions& opt)
{
    require(n + 1 < s.deltas.size(), "level index beyond the computed sequence");
    require(grid_points >= 2, "need at least two start points");
    HittingEstimate est;
    est.interval = hitting_interval(d, s, n, epsilon);
    est.eta_hat = 1.0;
    est.eta_lower = 1.0;
    const double start_level = s.deltas[n + 1];
    const rng::StreamKey key = rng::StreamKey(seed).split(n);
    for (int g = 0; g < grid_points; ++g) {
        HittingStart hs;
        hs.fiber_fraction = static_cast<double>(g) / (grid_points - 1);
        hs.x2 = d.lower(start_level) + hs.fiber_fraction * d.width(start_level);
        hs.x2 = std::clamp(hs.x2, d.lower(start_level), d.upper(start_level));
        const auto samples = batch_run(d, f, c, Vec2(start_level, hs.x2), StoppingRule::exit_at(s.deltas[n]),
                                       n_paths, key.split(static_cast<std::uint64_t>(g)), opt);
        for (const auto& smp : samples) {
            if (smp.exit_x2 > est.interval.lo && smp.exit_x2 < est.interval.hi) {
                ++hs.hits;
            }
        }
        hs.trials = samples.size();
        hs.estimate = static_cast<double>(hs.hits) / static_cast<double>(hs.trials);
        hs.wilson = wilson_interval(hs.hits, hs.trials, confidence);
        est.eta_hat = std::min(est.eta_hat, hs.estimate);
        est.eta_lower = std::min(est.eta_lower, hs.wilson.lo);
        est.starts.push_back(hs);
    }
    return est;
}

ScalingStudy scaling_convergence_study(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                       const ScaleSequence& s, const std::vector<std::size_t>& levels,
                                       std::size_t n_paths, std::uint64_t seed, const BatchOptions& opt)
{
    require(!levels.empty(), "no levels requested");
    require(n_paths >= 2, "n_paths must be >= 2");
    for (auto n : levels) {
        require(n + 1 < s.deltas.size(), "level index beyond the computed sequence");
    }
    const rng::StreamKey root(seed);

    ScalingStudy study;
    study.strip = strip_from(d, f, c);
    BatchOptions strip_opt = opt;
    strip_opt.step = strip_step_control(opt.step);
    const Vec2 strip_start(0.0, study.strip.L + 0.5);

    auto fractions_of_strip = [&](const std::vector<ExitSample>& samples) {
        std::vector<double> v;
        for (const auto& smp : samples) {
            v.push_back(smp.exit_x2 - study.strip.L);
        }
        return v;
    };
    auto mean_time = [](const std::vector<ExitSample>& samples, double scale) {
        double m = 0.0;
        for (const auto& smp : samples) {
            m += smp.exit_time * scale;
        }
        return m / static_cast<double>(samples.size());
    };

    const auto strip_ref = strip_batch(study.strip, strip_start, 1.0, n_paths, root.split(kTagStrip), strip_opt);
    const EmpiricalDistribution strip_law(fractions_of_strip(strip_ref));
    const double strip_time = mean_time(strip_ref, 1.0);

    {
        const auto a = strip_batch(study.strip, strip_start, 1.0, n_paths, root.split(kTagFloorA), strip_opt);
        const auto b = strip_batch(study.strip, strip_start, 1.0, n_paths, root.split(kTagFloorB), strip_opt);
        const EmpiricalDistribution la(fractions_of_strip(a)), lb(fractions_of_strip(b));
        study.noise_floor_ks = ks_distance(la, lb);
        study.noise_floor_tv = tv_binned(la, lb);
    }

    for (auto n : levels) {
        const double start = s.deltas[n + 1];
        const double exit = s.deltas[n];
        const double q = s.widths[n];
        const auto samples = batch_run(d, f, c, Vec2(start, d.center(start)), StoppingRule::exit_at(exit), n_paths,
                                       root.split(kTagCusp), opt);
        std::vector<double> frac;
        const double lo = d.lower(exit);
        const double w = d.width(exit);
        for (const auto& smp : samples) {
            frac.push_back((smp.exit_x2 - lo) / w);
        }
        const EmpiricalDistribution law(std::move(frac));
        LevelReport r;
        r.level = n;
        r.delta = exit;
        r.q = q;
        r.n_paths = n_paths;
        r.ks = ks_distance(law, strip_law);
        r.ks_critical = ks_critical_value(n_paths, n_paths, 0.05);
        r.tv = tv_binned(law, strip_law);
        r.mean_exit_time = mean_time(samples, 1.0 / (q * q));
        r.mean_exit_time_strip = strip_time;
        study.levels.push_back(r);
    }
    return study;
}

}  // namespace cusp
