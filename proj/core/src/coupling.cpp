#include "cusp/coupling.hpp"

#include <algorithm>
#include <cmath>

#include "cusp/parallel.hpp"

namespace cusp {

Mat2 mirror_matrix(const Mat2& sigma_tilde, const Vec2& x, const Vec2& x_tilde, double threshold)
{
    const Vec2 diff = x - x_tilde;
    if (diff.norm() < threshold) {
        throw Error(ErrorKind::degenerate_pair, "copies are within the coupling threshold");
    }
    const double det = sigma_tilde.determinant();
    require(det != 0.0 && std::isfinite(det), "diffusion matrix must be invertible");
    const Vec2 w = sigma_tilde.inverse() * diff;
    return Mat2::Identity() - (2.0 / w.squaredNorm()) * (w * w.transpose());
}

Mat2 mirror_matrix(const Coefficients& c, const Vec2& x, const Vec2& x_tilde, double threshold)
{
    return mirror_matrix(c.sigma(x_tilde), x, x_tilde, threshold);
}

CoupledPair coupled_step(const Coefficients& c, const Vec2& z, const Vec2& z_tilde, double dt, const Vec2& noise,
                         double threshold)
{
    const Mat2 s_tilde = c.sigma(z_tilde);
    const Mat2 K = mirror_matrix(s_tilde, z, z_tilde, threshold);
    return {z + c.b(z) * dt + c.sigma(z) * noise, z_tilde + c.b(z_tilde) * dt + s_tilde * (K * noise)};
}

QConstReport check_q_const(const Coefficients& c, const std::vector<Vec2>& grid)
{
    require(!grid.empty(), "q-const check needs a nonempty grid");
    std::vector<Mat2> values;
    values.reserve(grid.size());
    QConstReport r;
    for (const auto& x : grid) {
        const Mat2 s = c.sigma(x);
        values.push_back(s);
        const double det = s.determinant();
        r.sup_inverse = std::max(r.sup_inverse,
                                 det != 0.0 ? op_norm(s.inverse()) : std::numeric_limits<double>::infinity());
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            r.sup_difference = std::max(r.sup_difference, op_norm(values[i] - values[j]));
        }
    }
    r.margin = 2.0 / r.sup_inverse - r.sup_difference;
    r.pass = r.margin > 0.0;
    return r;
}

std::vector<Vec2> box_grid(double lo1, double hi1, double lo2, double hi2, int n)
{
    require(n >= 1, "grid size must be positive");
    std::vector<Vec2> g;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double a = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
            const double b = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
            g.emplace_back(lo1 + a * (hi1 - lo1), lo2 + b * (hi2 - lo2));
        }
    }
    return g;
}

CoupledRun run_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde, const CouplingOptions& opt,
                        const rng::Stream& stream)
{
    require(opt.dt > 0.0 && opt.threshold > 0.0, "dt and threshold must be positive");
    CoupledRun run;
    Vec2 z = x0, zt = x0_tilde;
    double t = 0.0;
    // without full recording the path holds the start and the latest state
    auto record = [&] {
        if (opt.record_full || run.times.size() < 2) {
            run.times.push_back(t);
            run.z_path.push_back(z);
            run.z_tilde_path.push_back(zt);
        } else {
            run.times.back() = t;
            run.z_path.back() = z;
            run.z_tilde_path.back() = zt;
        }
    };
    record();
    const double sq = std::sqrt(opt.dt);
    std::uint64_t k = 0;

    if ((z - zt).norm() < opt.threshold) {
        zt = z;
        run.coupled = true;
        run.zeta = 0.0;
    }
    while (!run.coupled) {
        if (k >= opt.step_budget) {
            throw Error(ErrorKind::step_budget_exhausted, "coupled run exceeded its step budget");
        }
        const Vec2 noise = stream.normal2(k++) * sq;
        const Vec2 d = z - zt;
        const CoupledPair next = coupled_step(c, z, zt, opt.dt, noise, opt.threshold);
        const Vec2 d_new = next.z - next.z_tilde;
        t += opt.dt;
        z = next.z;
        zt = next.z_tilde;
        run.steps = k;

        if (opt.rho) {
            run.exit_z = (z - x0).norm() >= *opt.rho;
            run.exit_z_tilde = (zt - x0_tilde).norm() >= *opt.rho;
        }
        run.separated = opt.separation_cap && d_new.norm() >= *opt.separation_cap;
        run.left_region = opt.region && (!opt.region->contains(z) || !opt.region->contains(zt));
        const bool stopped = run.exit_z || run.exit_z_tilde || run.separated || run.left_region;
        if (stopped) {
            record();
            return run;
        }
        if (d_new.norm() < opt.threshold || d_new.dot(d) <= 0.0) {
            zt = z;
            run.coupled = true;
            run.zeta = t;
        }
        record();
    }

    for (std::uint64_t m = 0; m < opt.post_coupling_steps; ++m) {
        const Vec2 noise = stream.normal2(k++) * sq;
        z = z + c.b(z) * opt.dt + c.sigma(z) * noise;
        zt = z;
        t += opt.dt;
        record();
    }
    return run;
}

CoupledRun run_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde, const CouplingOptions& opt,
                        std::uint64_t seed)
{
    return run_coupling(c, x0, x0_tilde, opt, rng::Stream(rng::StreamKey(seed), 0));
}

CouplingEstimate estimate_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde,
                                   const CouplingOptions& opt, std::size_t n_runs, rng::StreamKey key,
                                   unsigned threads)
{
    require(n_runs >= 1, "n_runs must be >= 1");
    CouplingOptions o = opt;
    o.record_full = false;
    o.post_coupling_steps = 0;
    std::vector<char> ok(n_runs, 0);
    parallel_for(n_runs, threads,
                 [&](std::size_t i) { ok[i] = run_coupling(c, x0, x0_tilde, o, rng::Stream(key, i)).coupled; });
    CouplingEstimate e;
    e.trials = n_runs;
    e.successes = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    e.rate = static_cast<double>(e.successes) / static_cast<double>(n_runs);
    e.wilson95 = wilson_interval(e.successes, n_runs, 0.95);
    return e;
}

// ---------------------------------------------------------------------------

namespace {

enum StageTag : std::uint64_t { kStage1 = 1, kStage1Tilde, kStage2, kStage3, kStage3Tilde };

struct BlockOutcome {
    Vec2 exit_z;
    Vec2 exit_z_tilde;
    bool merged = false;        ///< copies identical at the end of the block
    bool attempted = false;     ///< pair was not merged on entry
    bool coupled = false;       ///< coupled inside Q during this block
    bool z_in_I = false;
    bool z_tilde_in_I = false;
};

Vec2 clamp_to_fiber(const CuspDomain& d, Vec2 x)
{
    x.y() = std::clamp(x.y(), d.lower(x.x()), d.upper(x.x()));
    return x;
}

}  // namespace

TipCouplingReport tip_coupling_experiment(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                          const ScaleSequence& s, std::size_t n, double x2, double x2_tilde,
                                          std::size_t n_paths, std::uint64_t seed, const TipCouplingOptions& opt)
{
    require(opt.epsilon0 > 0.0 && opt.epsilon0 <= 0.25, "epsilon0 must lie in (0, 1/4]");
    require(opt.blocks == 1 || opt.blocks == 2, "blocks must be 1 or 2");
    require(n + 2 < s.deltas.size(), "level n + 2 beyond the computed sequence");
    require(opt.blocks == 1 || n >= 2, "a second block needs n >= 2");
    require(n_paths >= 1, "n_paths must be >= 1");

    const CuspModel model(d, f, c, opt.batch.step);
    SimOptions sim;
    sim.record_full = false;
    sim.step = opt.batch.step;
    const rng::StreamKey root(seed);

    // one block over levels m+2 -> m+1 -> m, for replica i
    auto run_block = [&](std::size_t m, int block, std::size_t i, const Vec2& start, const Vec2& start_tilde,
                         bool merged) {
        const rng::StreamKey key = root.split(100 + static_cast<std::uint64_t>(block));
        const double arrive = s.deltas[m + 1];
        const double leave = s.deltas[m];
        const double q = s.widths[m + 1];
        auto run_to = [&](const Vec2& x, double level, std::uint64_t tag) {
            return run_reflected(model, x, StoppingRule::exit_at(level), rng::Stream(key.split(tag), i), sim)
                .summary.exit_state;
        };

        BlockOutcome out;
        if (merged) {
            out.exit_z = out.exit_z_tilde = run_to(start, leave, kStage3);
            out.merged = true;
            return out;
        }
        out.attempted = true;
        const Vec2 a = run_to(start, arrive, kStage1);
        const Vec2 a_tilde = run_to(start_tilde, arrive, kStage1Tilde);
        const Interval I = hitting_interval(d, s, m + 1, opt.epsilon0);
        const Interval I_wide = hitting_interval(d, s, m + 1, opt.epsilon0 + 0.5);
        out.z_in_I = a.y() > I.lo && a.y() < I.hi;
        out.z_tilde_in_I = a_tilde.y() > I.lo && a_tilde.y() < I.hi;
        const Rect Q{arrive - 0.25 * q, arrive + 0.25 * q, I_wide.lo, I_wide.hi};

        Vec2 z = a, zt = a_tilde;
        if (Q.contains(a) && Q.contains(a_tilde)) {
            CouplingOptions co;
            co.dt = opt.batch.step.c_dt * q * q;
            co.threshold = opt.threshold_factor * q;
            co.region = Q;
            co.step_budget = opt.batch.step.step_budget;
            const CoupledRun run = run_coupling(c, a, a_tilde, co, rng::Stream(key.split(kStage2), i));
            z = run.z_path.back();
            zt = run.z_tilde_path.back();
            out.coupled = run.coupled;
        }
        if (out.coupled) {
            out.exit_z = out.exit_z_tilde = run_to(z, leave, kStage3);
            out.merged = true;
            return out;
        }
        // the free-space step that left Q may also have left the closed domain
        if (!d.contains(z)) {
            z = project_oblique(d, f, z).point;
        }
        if (!d.contains(zt)) {
            zt = project_oblique(d, f, zt).point;
        }
        out.exit_z = run_to(z, leave, kStage3);
        out.exit_z_tilde = run_to(zt, leave, kStage3Tilde);
        return out;
    };

    const double start_level = s.deltas[n + 2];
    const Vec2 start = clamp_to_fiber(d, Vec2(start_level, x2));
    const Vec2 start_tilde = clamp_to_fiber(d, Vec2(start_level, x2_tilde));

    TipCouplingReport report;
    std::vector<BlockOutcome> prev(n_paths);
    for (int block = 0; block < opt.blocks; ++block) {
        const std::size_t m = n - 2 * static_cast<std::size_t>(block);
        std::vector<BlockOutcome> cur(n_paths);
        parallel_for(n_paths, opt.batch.threads, [&](std::size_t i) {
            if (block == 0) {
                cur[i] = run_block(m, block, i, start, start_tilde, false);
            } else {
                cur[i] = run_block(m, block, i, prev[i].exit_z, prev[i].exit_z_tilde, prev[i].merged);
            }
        });

        BlockReport br;
        br.n = m;
        const double leave = s.deltas[m];
        for (const auto& o : cur) {
            if (o.attempted) {
                ++br.attempts;
                br.coupled += o.coupled;
                br.z_in_I += o.z_in_I;
                br.z_tilde_in_I += o.z_tilde_in_I;
                if (o.z_in_I && o.z_tilde_in_I) {
                    ++br.both_in_I;
                    br.coupled_given_both += o.coupled;
                }
            }
            br.exit_z.push_back((o.exit_z.y() - d.lower(leave)) / d.width(leave));
            br.exit_z_tilde.push_back((o.exit_z_tilde.y() - d.lower(leave)) / d.width(leave));
        }
        if (br.attempts > 0) {
            const auto na = static_cast<double>(br.attempts);
            br.success_rate = static_cast<double>(br.coupled) / na;
            br.success_wilson = wilson_interval(br.coupled, br.attempts, 0.95);
            br.eta_hat = std::min(static_cast<double>(br.z_in_I), static_cast<double>(br.z_tilde_in_I)) / na;
        }
        br.p0_hat = br.both_in_I > 0
                        ? static_cast<double>(br.coupled_given_both) / static_cast<double>(br.both_in_I)
                        : 0.0;
        br.tv = tv_binned(EmpiricalDistribution(br.exit_z), EmpiricalDistribution(br.exit_z_tilde));
        report.blocks.push_back(std::move(br));
        prev = std::move(cur);
    }
    return report;
}

}  // namespace cusp
