#include "cusp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cusp/coupling.hpp"
#include "cusp/lyapunov.hpp"
#include "cusp/scaling.hpp"
#include "cusp/stats.hpp"
#include "cusp/timechange.hpp"

#ifndef CUSP_VERSION_STRING
#define CUSP_VERSION_STRING "unknown"
#endif

namespace cusp {

using nlohmann::json;
namespace fs = std::filesystem;

const char* version() { return CUSP_VERSION_STRING; }

const char* to_string(RunStatus s)
{
    switch (s) {
        case RunStatus::ok: return "ok";
        case RunStatus::validation_failure: return "validation failure";
        case RunStatus::runtime_failure: return "runtime failure";
        case RunStatus::acceptance_failure: return "acceptance-check failure";
    }
    return "?";
}

// ---------------------------------------------------------------------------

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {}

fs::path OutputDir::file(const std::string& name) const
{
    const fs::path p(name);
    if (name.empty() || p.is_absolute() || p.has_parent_path() || name == "." || name == ".."
        || name.find('/') != std::string::npos || name.find('\\') != std::string::npos) {
        throw Error(ErrorKind::invalid_argument, "output name '" + name + "' must be a plain file name");
    }
    return root_ / p;
}

void OutputDir::write(const std::string& name, const std::string& content)
{
    const fs::path target = file(name);
    fs::create_directories(root_);
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + target.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write to '" + target.string() + "' failed");
    }
    if (std::find(written_.begin(), written_.end(), name) == written_.end()) {
        written_.push_back(name);
    }
}

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

Table::Table(std::vector<std::string> header) : columns_(header.size())
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        out_ += (i ? "," : "") + header[i];
    }
    out_ += '\n';
}

Table& Table::row()
{
    if (open_) {
        require(filled_ == columns_, "table row has the wrong number of cells");
        out_ += '\n';
    }
    open_ = true;
    filled_ = 0;
    return *this;
}

Table& Table::add(const std::string& v)
{
    require(open_ && filled_ < columns_, "table cell outside a row");
    if (filled_++) {
        out_ += ',';
    }
    out_ += v;
    return *this;
}

Table& Table::add(double v) { return add(format_number(v)); }

Table& Table::add(std::uint64_t v) { return add(std::to_string(v)); }

std::string Table::str() const
{
    std::string s = out_;
    if (open_) {
        s += '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------

namespace {

/// Thrown by experiments whose inputs are well formed but fail a structural
/// precondition (for instance a field without a cone certificate).
struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Context {
    const ExperimentConfig& config;
    CuspDomain domain;
    DirectionField field;
    Coefficients coefficients;
    BatchOptions batch;
    OutputDir out;
    json summary = json::object();
    json checks = json::object();
    bool running = false;

    /// Ends the validation phase; errors after this point are runtime failures.
    void begin() { running = true; }

    void check(const std::string& name, bool pass) { checks[name] = pass; }
};

void validate(bool cond, const std::string& msg)
{
    if (!cond) {
        throw ConfigError(msg);
    }
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

Vec2 default_start(const CuspDomain& d, double x1) { return {x1, d.center(x1)}; }

Vec2 start_param(const Params& p, const std::string& key, const Vec2& fallback, const CuspDomain& d)
{
    if (!p.has(key)) {
        return fallback;
    }
    const Vec2 x = vec_from_json(p.raw(key), "params." + key);
    validate(x.x() > 0.0 && d.contains(x), "params." + key + " must lie in the domain off the tip");
    return x;
}

double level_param(const Params& p, const std::string& key, double fallback, const CuspDomain& d)
{
    const double v = p.get<double>(key, fallback);
    validate(v > 0.0 && v <= d.delta_top, "params." + key + " must lie in (0, delta_top]");
    return v;
}

template <class T>
T positive_param(const Params& p, const std::string& key, T fallback)
{
    const T v = p.get<T>(key, fallback);
    validate(v > T{0}, "params." + key + " must be positive");
    return v;
}

// ---------------------------------------------------------------------------

void check_domain_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"grid_size"});
    const int grid = positive_param<int>(p, "grid_size", 200);
    ctx.begin();

    auto entries = [](const CheckReport& r) {
        json a = json::array();
        for (const auto& e : r.entries) {
            a.push_back({{"name", e.name}, {"pass", e.pass}, {"margin", e.margin}, {"worst_x1", e.worst_x1}});
        }
        return a;
    };
    const CheckReport rd = check_domain(ctx.domain, grid);
    const CheckReport rf = check_field(ctx.domain, ctx.field, grid);
    const CheckReport rc = check_coefficients(ctx.domain, ctx.coefficients, grid);
    const ConeSearch cone = find_cone_certificate(ctx.field);

    json report;
    report["domain"] = entries(rd);
    report["field"] = entries(rf);
    report["coefficients"] = entries(rc);
    report["cone"] = {{"certified", cone.certificate.has_value()},
                      {"best_direction", vec_json(cone.best_direction)},
                      {"best_margin", cone.best_margin}};
    if (cone.certificate) {
        report["cone"]["e_star"] = vec_json(cone.certificate->e_star);
        report["cone"]["margin"] = cone.certificate->margin;
    }
    report["all_pass"] = rd.all_pass() && rf.all_pass() && rc.all_pass() && cone.certificate.has_value();
    ctx.out.write("check_domain.json", report.dump(2) + "\n");
    ctx.summary = report;

    if (!cone.certificate) {
        throw ValidationFailure("no cone certificate");
    }
    for (const auto* r : {&rd, &rf, &rc}) {
        for (const auto& e : r->entries) {
            if (!e.pass) {
                throw ValidationFailure("check '" + e.name + "' failed");
            }
        }
    }
}

StoppingRule rule_from(const Params& p, const CuspDomain& d)
{
    StoppingRule rule;
    if (p.has("exit_level")) {
        rule.exit_level = level_param(p, "exit_level", d.delta_top, d);
    }
    if (p.has("lower_level")) {
        rule.lower_level = level_param(p, "lower_level", d.delta_top, d);
    }
    if (p.has("horizon")) {
        rule.horizon = positive_param<double>(p, "horizon", 1.0);
    }
    if (p.has("ball")) {
        const json& b = p.raw("ball");
        validate(b.is_object() && b.contains("center") && b.contains("radius") && b.size() == 2,
                 "params.ball needs exactly center and radius");
        validate(b["radius"].is_number() && b["radius"].get<double>() > 0.0, "params.ball.radius must be positive");
        rule.ball = StoppingRule::Ball{vec_from_json(b["center"], "params.ball.center"), b["radius"].get<double>()};
    }
    if (!rule.exit_level && !rule.lower_level && !rule.horizon && !rule.ball) {
        rule.exit_level = d.delta_top;
    }
    return rule;
}

void simulate_experiment(Context& ctx)
{
    const Params p(ctx.config.params,
                   {"x0", "exit_level", "lower_level", "horizon", "ball", "time_change", "mirror_noise_x2"});
    const CuspDomain& d = ctx.domain;
    const Vec2 x0 = start_param(p, "x0", default_start(d, 0.5 * d.delta_top), d);
    const StoppingRule rule = rule_from(p, d);
    const bool time_change = p.get<bool>("time_change", false);
    SimOptions opt;
    opt.step = ctx.config.step;
    opt.mirror_noise_x2 = p.get<bool>("mirror_noise_x2", false);
    ctx.begin();

    const PathRecord rec = simulate(d, ctx.field, ctx.coefficients, x0, rule, ctx.config.seed, opt);
    Table t({"step", "t", "x1", "x2", "local_time", "gamma1", "gamma2"});
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
        t.row().add(std::uint64_t{k}).add(rec.times[k]).add(rec.states[k].x()).add(rec.states[k].y());
        t.add(rec.local_time[k]);
        if (rec.push_directions[k]) {
            t.add(rec.push_directions[k]->x()).add(rec.push_directions[k]->y());
        } else {
            t.add(std::string()).add(std::string());
        }
    }
    ctx.out.write("path.csv", t.str());

    const PathSummary& s = rec.summary;
    ctx.summary = {{"exit_flag", to_string(s.exit_flag)},
                   {"exit_time", s.exit_time},
                   {"exit_state", vec_json(s.exit_state)},
                   {"total_local_time", s.total_local_time},
                   {"min_x1", s.min_x1},
                   {"steps", s.steps},
                   {"terminal_interpolated", rec.terminal_interpolated}};

    if (time_change) {
        const TimeChangedPath tc = stretch(rec);
        Table tt({"u", "h0", "h1", "y1", "y2"});
        bool identity = true;
        for (std::size_t k = 0; k < tc.u.size(); ++k) {
            tt.row().add(tc.u[k]).add(tc.h0[k]).add(tc.h1[k]).add(tc.y_states[k].x()).add(tc.y_states[k].y());
            identity = identity && tc.h0[k] + tc.h1[k] == tc.u[k];
        }
        ctx.out.write("time_change.csv", tt.str());
        const ClockPath back = unstretch(tc);
        const bool round_trip = back.times == rec.times && back.states == rec.states && back.local_time == rec.local_time;
        ctx.summary["max_flat_length"] = max_flat_length(tc);
        ctx.check("clock_identity", identity);
        ctx.check("round_trip", round_trip);
    }
}

void exit_stats_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"x0", "level", "lower_level", "n_paths", "bound_factor", "bound_se_multiplier"});
    const CuspDomain& d = ctx.domain;
    const double level = level_param(p, "level", d.delta_top, d);
    const Vec2 x0 = start_param(p, "x0", default_start(d, 1e-3 * level), d);
    validate(x0.x() < level, "start must lie below the exit level");
    const auto n_paths = positive_param<std::size_t>(p, "n_paths", 1000);
    std::optional<double> lower;
    if (p.has("lower_level")) {
        lower = level_param(p, "lower_level", level, d);
        validate(*lower < x0.x(), "lower_level must lie below the start");
    }
    std::optional<double> bound_factor;
    if (p.has("bound_factor")) {
        bound_factor = positive_param<double>(p, "bound_factor", 1.0);
    }
    const double se_multiplier = p.get<double>("bound_se_multiplier", 0.0);
    validate(se_multiplier >= 0.0, "bound_se_multiplier must be non-negative");
    ctx.begin();

    StoppingRule rule = StoppingRule::exit_at(level);
    rule.lower_level = lower;
    const auto samples =
        batch_run(d, ctx.field, ctx.coefficients, x0, rule, n_paths, rng::StreamKey(ctx.config.seed), ctx.batch);

    Table t({"index", "exit_time", "exit_x2", "min_x1", "total_local_time", "flag"});
    std::vector<double> times, x2s;
    std::size_t at_level = 0, at_lower = 0, at_cap = 0;
    double min_x1 = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        t.row().add(s.index).add(s.exit_time).add(s.exit_x2).add(s.min_x1).add(s.total_local_time);
        t.add(std::string(to_string(s.flag)));
        times.push_back(s.exit_time);
        x2s.push_back(s.exit_x2);
        at_level += s.flag == ExitFlag::exit_level;
        at_lower += s.flag == ExitFlag::lower_level;
        at_cap += s.flag == ExitFlag::cap;
        min_x1 = std::min(min_x1, s.min_x1);
    }
    ctx.out.write("samples.csv", t.str());

    const EmpiricalDistribution et(times), ex(x2s);
    ctx.summary = {{"level", level},
                   {"x0", vec_json(x0)},
                   {"n_paths", n_paths},
                   {"mean_exit_time", et.mean()},
                   {"exit_time_se", et.standard_error()},
                   {"exit_time_quantiles", {et.quantile(0.1), et.quantile(0.5), et.quantile(0.9)}},
                   {"mean_exit_x2", ex.mean()},
                   {"min_x1", min_x1},
                   {"exits_at_level", at_level},
                   {"exits_at_lower", at_lower},
                   {"exits_at_cap", at_cap}};
    if (lower) {
        ctx.check("lower_level_never_reached", at_lower == 0);
    }
    if (bound_factor) {
        // the Monte Carlo mean is allowed k relative standard errors of slack
        const double rel_se = et.mean() > 0.0 ? et.standard_error() / et.mean() : 0.0;
        const double bound = *bound_factor * level * level * (1.0 + se_multiplier * rel_se);
        ctx.summary["exit_time_bound"] = bound;
        ctx.check("mean_exit_time_within_bound", et.mean() <= bound);
    }
}

void scaling_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"delta0", "levels", "n_paths", "ks_threshold", "noise_floor_max", "hitting"});
    const CuspDomain& d = ctx.domain;
    const double delta0 = level_param(p, "delta0", d.delta_top, d);
    const auto levels = p.get<std::vector<std::size_t>>("levels", {0, 1, 2});
    validate(!levels.empty(), "params.levels must not be empty");
    const auto n_paths = positive_param<std::size_t>(p, "n_paths", 2000);
    validate(n_paths >= 2, "params.n_paths must be at least 2");
    const double ks_threshold = positive_param<double>(p, "ks_threshold", 0.05);
    const double floor_max = positive_param<double>(p, "noise_floor_max", 0.02);

    struct HittingParams {
        double epsilon = 0.75;
        std::size_t n_paths = 1000;
        int grid = 9;
        double confidence = 0.99;
        std::vector<std::size_t> levels;
    };
    std::optional<HittingParams> hitting;
    if (p.has("hitting")) {
        const Params h(p.raw("hitting"), {"epsilon", "n_paths", "grid", "confidence", "levels"});
        HittingParams hp;
        hp.epsilon = positive_param<double>(h, "epsilon", hp.epsilon);
        validate(hp.epsilon <= 1.0, "params.hitting.epsilon must lie in (0, 1]");
        hp.n_paths = positive_param<std::size_t>(h, "n_paths", hp.n_paths);
        hp.grid = positive_param<int>(h, "grid", hp.grid);
        validate(hp.grid >= 2, "params.hitting.grid must be at least 2");
        hp.confidence = positive_param<double>(h, "confidence", hp.confidence);
        validate(hp.confidence < 1.0, "params.hitting.confidence must lie in (0, 1)");
        hp.levels = h.get<std::vector<std::size_t>>("levels", levels);
        hitting = hp;
    }
    std::size_t top = *std::max_element(levels.begin(), levels.end());
    if (hitting && !hitting->levels.empty()) {
        top = std::max(top, *std::max_element(hitting->levels.begin(), hitting->levels.end()));
    }
    const ScaleSequence s = scale_sequence(d, delta0, static_cast<int>(top) + 2);
    ctx.begin();

    const ScalingStudy study =
        scaling_convergence_study(d, ctx.field, ctx.coefficients, s, levels, n_paths, ctx.config.seed, ctx.batch);
    Table t({"level", "delta", "q", "n_paths", "ks", "ks_critical", "tv", "mean_exit_time", "mean_exit_time_strip"});
    json rows = json::array();
    for (const auto& r : study.levels) {
        t.row().add(std::uint64_t{r.level}).add(r.delta).add(r.q).add(std::uint64_t{r.n_paths}).add(r.ks);
        t.add(r.ks_critical).add(r.tv).add(r.mean_exit_time).add(r.mean_exit_time_strip);
        rows.push_back({{"level", r.level}, {"ks", r.ks}, {"tv", r.tv}});
    }
    ctx.out.write("scaling.csv", t.str());

    bool decreasing = true;
    for (std::size_t i = 1; i < study.levels.size(); ++i) {
        decreasing = decreasing && study.levels[i].ks < study.levels[i - 1].ks;
    }
    ctx.summary = {{"levels", rows},
                   {"noise_floor_ks", study.noise_floor_ks},
                   {"noise_floor_tv", study.noise_floor_tv},
                   {"strip_L", study.strip.L}};
    ctx.check("ks_decreasing", decreasing);
    ctx.check("finest_ks_below_threshold", study.levels.back().ks < ks_threshold);
    ctx.check("noise_floor_below_max", study.noise_floor_ks < floor_max);

    if (hitting) {
        Table ht({"level", "fiber_fraction", "x2", "hits", "trials", "estimate", "wilson_lo", "wilson_hi"});
        bool positive = true;
        json hj = json::array();
        for (std::size_t n : hitting->levels) {
            const HittingEstimate e =
                estimate_hitting(d, ctx.field, ctx.coefficients, s, n, hitting->epsilon, hitting->n_paths,
                                 rng::StreamKey(ctx.config.seed).split(1000 + n).value(), hitting->grid,
                                 hitting->confidence, ctx.batch);
            for (const auto& st : e.starts) {
                ht.row().add(std::uint64_t{n}).add(st.fiber_fraction).add(st.x2).add(std::uint64_t{st.hits});
                ht.add(std::uint64_t{st.trials}).add(st.estimate).add(st.wilson.lo).add(st.wilson.hi);
            }
            positive = positive && e.eta_lower > 0.0;
            hj.push_back({{"level", n}, {"eta_hat", e.eta_hat}, {"eta_lower", e.eta_lower}});
        }
        ctx.out.write("hitting.csv", ht.str());
        ctx.summary["hitting"] = hj;
        ctx.check("hitting_lower_bound_positive", positive);
    }
}

void coupling_experiment(Context& ctx)
{
    const Params p(ctx.config.params,
                   {"rho", "c_scan", "n_runs", "p0", "dt_factor", "threshold_factor", "center", "doubling"});
    const auto rhos = p.get<std::vector<double>>("rho", {0.25, 0.5, 1.0});
    auto c_scan = p.get<std::vector<double>>("c_scan", {0.01, 0.02, 0.05, 0.1, 0.2});
    const auto n_runs = positive_param<std::size_t>(p, "n_runs", 2000);
    const double p0 = positive_param<double>(p, "p0", 0.2);
    validate(p0 < 1.0, "params.p0 must lie in (0, 1)");
    const double dt_factor = positive_param<double>(p, "dt_factor", 1e-3);
    const double threshold_factor = positive_param<double>(p, "threshold_factor", 1e-6);
    const Vec2 center = p.has("center") ? vec_from_json(p.raw("center"), "params.center") : Vec2::Zero();
    for (double r : rhos) {
        validate(r > 0.0, "params.rho entries must be positive");
    }
    for (double cc : c_scan) {
        validate(cc > 0.0 && cc < 2.0, "params.c_scan entries must lie in (0, 2)");
    }
    std::sort(c_scan.begin(), c_scan.end());

    struct Doubling {
        double distance = 0.1;
        double dt = 1e-5;
        std::size_t n_runs = 10000;
    };
    std::optional<Doubling> doubling;
    if (p.has("doubling")) {
        const Params dp(p.raw("doubling"), {"distance", "dt", "n_runs"});
        Doubling db;
        db.distance = positive_param<double>(dp, "distance", db.distance);
        db.dt = positive_param<double>(dp, "dt", db.dt);
        db.n_runs = positive_param<std::size_t>(dp, "n_runs", db.n_runs);
        doubling = db;
    }
    const rng::StreamKey root(ctx.config.seed);
    ctx.begin();

    const Vec2 axis(1.0, 0.0);
    Table t({"rho", "C", "separation", "successes", "trials", "rate", "wilson_lo", "wilson_hi"});
    json found = json::array();
    bool all_found = true;
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        const double rho = rhos[ri];
        CouplingOptions opt;
        opt.dt = dt_factor * rho * rho;
        opt.rho = rho;
        std::optional<double> c0;
        bool prefix = true;
        for (std::size_t ci = 0; ci < c_scan.size(); ++ci) {
            const double sep = c_scan[ci] * rho;
            opt.threshold = threshold_factor * rho;
            const Vec2 x0 = center + 0.5 * sep * axis, xt0 = center - 0.5 * sep * axis;
            const CouplingEstimate e =
                estimate_coupling(ctx.coefficients, x0, xt0, opt, n_runs, root.split(ri).split(ci), ctx.batch.threads);
            t.row().add(rho).add(c_scan[ci]).add(sep).add(std::uint64_t{e.successes}).add(std::uint64_t{e.trials});
            t.add(e.rate).add(e.wilson95.lo).add(e.wilson95.hi);
            // every smaller scanned separation must pass as well
            prefix = prefix && e.wilson95.lo >= p0;
            if (prefix) {
                c0 = c_scan[ci];
            }
        }
        all_found = all_found && c0.has_value();
        found.push_back({{"rho", rho}, {"c0", c0 ? json(*c0) : json(nullptr)}});
    }
    ctx.out.write("coupling_scan.csv", t.str());
    ctx.summary["c0"] = found;
    ctx.check("c0_found_for_every_rho", all_found);

    if (doubling) {
        CouplingOptions opt;
        opt.dt = doubling->dt;
        opt.threshold = 1e-6 * doubling->distance;
        opt.separation_cap = 2.0 * doubling->distance;
        const Vec2 x0 = center + 0.5 * doubling->distance * axis, xt0 = center - 0.5 * doubling->distance * axis;
        const CouplingEstimate e =
            estimate_coupling(ctx.coefficients, x0, xt0, opt, doubling->n_runs, root.split(999), ctx.batch.threads);
        const double band = 3.0 * std::sqrt(0.25 / static_cast<double>(e.trials));
        ctx.summary["doubling"] = {{"successes", e.successes},
                                   {"trials", e.trials},
                                   {"rate", e.rate},
                                   {"band", band},
                                   {"wilson95", interval_json(e.wilson95)}};
        ctx.check("doubling_rate_near_half", std::abs(e.rate - 0.5) <= band);
    }
}

void tip_coupling_run(Context& ctx)
{
    const Params p(ctx.config.params, {"delta0", "n", "n_paths", "epsilon0", "threshold_factor", "blocks",
                                       "start_fractions", "noise_floor"});
    const CuspDomain& d = ctx.domain;
    const double delta0 = level_param(p, "delta0", d.delta_top, d);
    const auto n = p.get<std::size_t>("n", 2);
    const auto n_paths = positive_param<std::size_t>(p, "n_paths", 1000);
    TipCouplingOptions opt;
    opt.epsilon0 = positive_param<double>(p, "epsilon0", opt.epsilon0);
    validate(opt.epsilon0 <= 0.25, "params.epsilon0 must lie in (0, 1/4]");
    opt.threshold_factor = positive_param<double>(p, "threshold_factor", opt.threshold_factor);
    opt.blocks = p.get<int>("blocks", 1);
    validate(opt.blocks == 1 || opt.blocks == 2, "params.blocks must be 1 or 2");
    validate(opt.blocks == 1 || n >= 2, "two blocks need params.n >= 2");
    opt.batch = ctx.batch;
    const auto fractions = p.get<std::vector<double>>("start_fractions", {0.0, 1.0});
    validate(fractions.size() == 2 && fractions[0] >= 0.0 && fractions[0] <= 1.0 && fractions[1] >= 0.0
                 && fractions[1] <= 1.0,
             "params.start_fractions must be two numbers in [0, 1]");
    const bool noise_floor = p.get<bool>("noise_floor", true);
    const ScaleSequence s = scale_sequence(d, delta0, static_cast<int>(n) + 3);
    ctx.begin();

    const double start_level = s.deltas[n + 2];
    auto at = [&](double frac) {
        return frac == 1.0 ? d.upper(start_level) : d.lower(start_level) + frac * d.width(start_level);
    };
    const rng::StreamKey root(ctx.config.seed);
    const TipCouplingReport rep = tip_coupling_experiment(d, ctx.field, ctx.coefficients, s, n, at(fractions[0]),
                                                          at(fractions[1]), n_paths, root.split(1).value(), opt);
    std::optional<TipCouplingReport> floor_rep;
    if (noise_floor) {
        floor_rep = tip_coupling_experiment(d, ctx.field, ctx.coefficients, s, n, at(fractions[0]), at(fractions[0]),
                                            n_paths, root.split(2).value(), opt);
    }

    Table t({"run", "block", "n", "attempts", "coupled", "both_in_I", "coupled_given_both", "success_rate",
             "wilson_lo", "wilson_hi", "p0_hat", "eta_hat", "tv"});
    Table ex({"run", "block", "index", "exit_z", "exit_z_tilde"});
    auto emit = [&](const std::string& run, const TipCouplingReport& r) {
        for (std::size_t b = 0; b < r.blocks.size(); ++b) {
            const BlockReport& k = r.blocks[b];
            t.row().add(run).add(std::uint64_t{b + 1}).add(std::uint64_t{k.n}).add(std::uint64_t{k.attempts});
            t.add(std::uint64_t{k.coupled}).add(std::uint64_t{k.both_in_I}).add(std::uint64_t{k.coupled_given_both});
            t.add(k.success_rate).add(k.success_wilson.lo).add(k.success_wilson.hi).add(k.p0_hat).add(k.eta_hat);
            t.add(k.tv);
            for (std::size_t i = 0; i < k.exit_z.size(); ++i) {
                ex.row().add(run).add(std::uint64_t{b + 1}).add(std::uint64_t{i}).add(k.exit_z[i]).add(k.exit_z_tilde[i]);
            }
        }
    };
    emit("extreme", rep);
    if (floor_rep) {
        emit("identical", *floor_rep);
    }
    ctx.out.write("tip_coupling.csv", t.str());
    ctx.out.write("tip_exits.csv", ex.str());

    const BlockReport& b1 = rep.blocks.front();
    const double floor = floor_rep ? floor_rep->blocks.front().tv : 0.0;
    const double bound = 1.0 - b1.p0_hat * b1.eta_hat * b1.eta_hat;
    ctx.summary = {{"tv_one_step", b1.tv},
                   {"p0_hat", b1.p0_hat},
                   {"eta_hat", b1.eta_hat},
                   {"bound", bound},
                   {"noise_floor", floor}};
    ctx.check("tv_within_bound", b1.tv <= bound + 2.0 * floor);
    if (rep.blocks.size() == 2) {
        const double tv2 = rep.blocks[1].tv;
        ctx.summary["tv_two_step"] = tv2;
        ctx.check("two_step_contracts", tv2 + 2.0 * floor < b1.tv);
    }
}

void lyapunov_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"p_ladder", "delta_grid", "x1_points", "e_star", "ruin"});
    const CuspDomain& d = ctx.domain;
    const auto ladder = p.get<std::vector<double>>("p_ladder", {0.1, 0.25, 0.5, 0.75, 0.9});
    for (double v : ladder) {
        validate(v > 0.0 && v <= 1.0, "params.p_ladder entries must lie in (0, 1]");
    }
    std::vector<double> deltas;
    if (p.has("delta_grid")) {
        deltas = p.get<std::vector<double>>("delta_grid", {});
    } else {
        deltas = geometric_grid(1e-4 * d.delta_top, d.delta_top, 13);
    }
    validate(!ladder.empty() && !deltas.empty(), "p_ladder and delta_grid must not be empty");
    for (double v : deltas) {
        validate(v > 0.0 && v <= d.delta_top, "params.delta_grid entries must lie in (0, delta_top]");
    }
    const int x1_points = positive_param<int>(p, "x1_points", 240);
    const ConeSearch cone = find_cone_certificate(ctx.field);
    Vec2 e_star = cone.certificate ? cone.certificate->e_star : cone.best_direction;
    if (p.has("e_star")) {
        e_star = vec_from_json(p.raw("e_star"), "params.e_star");
        validate(e_star.norm() > 0.0, "params.e_star must be nonzero");
    }

    struct Ruin {
        double delta;
        int n;
        std::size_t n_paths;
        double p;
        double confidence;
    };
    std::optional<Ruin> ruin;
    if (p.has("ruin")) {
        const Params rp(p.raw("ruin"), {"delta", "n", "n_paths", "p", "confidence"});
        Ruin r{level_param(rp, "delta", d.delta_top, d), positive_param<int>(rp, "n", 1000000),
               positive_param<std::size_t>(rp, "n_paths", 1000), positive_param<double>(rp, "p", 0.5),
               positive_param<double>(rp, "confidence", 0.99)};
        validate(1.0 / r.n < 0.5 * r.delta, "params.ruin needs 1/n < delta/2");
        validate(r.p <= 1.0 && r.confidence < 1.0, "params.ruin.p in (0, 1], confidence in (0, 1)");
        ruin = r;
    }
    ctx.begin();

    const SignScan scan = sign_scan(d, ctx.field, ctx.coefficients, e_star, ladder, deltas, x1_points);
    Table t({"p", "delta", "inf_v", "sup_av", "sup_dv_gamma", "pass"});
    for (const auto& r : scan.rows) {
        t.row().add(r.p).add(r.delta).add(r.inf_v).add(r.sup_av).add(r.sup_dv_gamma).add(std::uint64_t{r.pass});
    }
    ctx.out.write("lyapunov_scan.csv", t.str());
    json best = json::array();
    for (const auto& [pv, dv] : scan.best) {
        best.push_back({{"p", pv}, {"delta", dv ? json(*dv) : json(nullptr)}});
    }
    ctx.summary = {{"e_star", vec_json(e_star)}, {"certified", cone.certificate.has_value()}, {"best", best}};
    ctx.check("sign_conditions_hold", scan.any_pass());

    if (ruin) {
        const Mat2 cov0 = ctx.coefficients.sigma0 * ctx.coefficients.sigma0.transpose();
        const LyapunovSpec spec = make_lyapunov(cov0, e_star, ruin->p);
        const RuinReport r = ruin_check(d, ctx.field, ctx.coefficients, spec, ruin->delta, ruin->n, ruin->n_paths,
                                        rng::StreamKey(ctx.config.seed).split(7).value(), ruin->confidence,
                                        ctx.batch);
        ctx.summary["ruin"] = {{"delta", r.delta},         {"low_level", r.low_level}, {"n_paths", r.n_paths},
                               {"hit_low", r.hit_low},     {"hit_high", r.hit_high},   {"v_low", r.v_low},
                               {"v_high", r.v_high},       {"v_start", r.v_start},     {"lhs", r.lhs},
                               {"lhs_lower", r.lhs_lower}, {"mean_v_stop", r.mean_v_stop},
                               {"mean_v_stop_se", r.mean_v_stop_se}};
        ctx.check("ruin_inequality", r.holds);
    }
}

void tv_contraction_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"instances", "max_states", "tolerance"});
    const auto instances = positive_param<std::size_t>(p, "instances", 1000);
    const int max_states = positive_param<int>(p, "max_states", 8);
    validate(max_states >= 2, "params.max_states must be at least 2");
    const double tol = positive_param<double>(p, "tolerance", 1e-12);
    ctx.begin();

    const rng::StreamKey key = rng::StreamKey(ctx.config.seed).split(3);
    Table t({"instance", "states", "rho", "reconstruction_error_1", "reconstruction_error_2", "contraction_error"});
    double worst_recon = 0.0, worst_contraction = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
        const rng::Stream st(key, i);
        std::uint64_t draw = 0;
        auto uniform = [&] {
            const auto u = st.uniform2(draw++);
            return u[0];
        };
        const int k = 2 + static_cast<int>(uniform() * (max_states - 1));
        auto measure = [&] {
            Eigen::VectorXd w(k);
            for (int j = 0; j < k; ++j) {
                // a third of the atoms are dropped so supports only partly overlap
                w[j] = uniform() < 1.0 / 3.0 ? 0.0 : uniform();
            }
            if (w.sum() == 0.0) {
                w[0] = 1.0;
            }
            return Eigen::VectorXd(w / w.sum());
        };
        const Eigen::VectorXd m1 = measure(), m2 = measure();
        Eigen::MatrixXd P(k, k);
        for (int r = 0; r < k; ++r) {
            P.row(r) = measure().transpose();
        }
        const auto mu1 = DiscreteMeasure::from_vector(m1), mu2 = DiscreteMeasure::from_vector(m2);
        const TvDecomposition dec = tv_decompose(mu1, mu2);
        const double e1 = reconstruction_error(dec, mu1, 1), e2 = reconstruction_error(dec, mu2, 2);
        const ContractionReport cr = kernel_contraction_check(P, mu1, mu2);
        t.row().add(std::uint64_t{i}).add(std::uint64_t(k)).add(dec.rho).add(e1).add(e2).add(cr.error);
        worst_recon = std::max({worst_recon, e1, e2});
        worst_contraction = std::max(worst_contraction, cr.error);
    }
    ctx.out.write("tv_contraction.csv", t.str());
    ctx.summary = {{"instances", instances},
                   {"max_reconstruction_error", worst_recon},
                   {"max_contraction_error", worst_contraction}};
    ctx.check("reconstruction_exact", worst_recon <= tol);
    ctx.check("contraction_exact", worst_contraction <= tol);
}

void feller_experiment(Context& ctx)
{
    const Params p(ctx.config.params, {"starts", "tip_sequence", "level", "n_paths", "alpha"});
    const CuspDomain& d = ctx.domain;
    const double level = level_param(p, "level", d.delta_top, d);
    const auto n_paths = positive_param<std::size_t>(p, "n_paths", 1000);
    const double alpha = positive_param<double>(p, "alpha", 0.05);
    validate(alpha < 1.0, "params.alpha must lie in (0, 1)");
    validate(p.has("starts") != p.has("tip_sequence"), "give exactly one of params.starts or params.tip_sequence");
    std::vector<Vec2> starts;
    if (p.has("starts")) {
        const json& a = p.raw("starts");
        validate(a.is_array(), "params.starts must be an array of points");
        for (const auto& v : a) {
            starts.push_back(vec_from_json(v, "params.starts[]"));
        }
    } else {
        for (double x1 : p.get<std::vector<double>>("tip_sequence", {})) {
            validate(x1 > 0.0 && x1 <= d.delta_top, "params.tip_sequence entries must lie in (0, delta_top]");
            starts.push_back(default_start(d, x1));
        }
    }
    validate(starts.size() >= 2, "need at least two start points");
    for (const auto& x : starts) {
        validate(x.x() > 0.0 && x.x() < level && d.contains(x), "every start must lie in the domain below the level");
    }
    ctx.begin();

    const rng::StreamKey root(ctx.config.seed);
    std::vector<EmpiricalDistribution> laws;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const auto samples = batch_run(d, ctx.field, ctx.coefficients, starts[i], StoppingRule::exit_at(level),
                                       n_paths, root.split(i), ctx.batch);
        std::vector<double> x2;
        x2.reserve(samples.size());
        for (const auto& s : samples) {
            x2.push_back(s.exit_x2);
        }
        laws.emplace_back(std::move(x2));
    }
    const double band = ks_critical_value(n_paths, n_paths, alpha);
    Table t({"pair", "x1_a", "x2_a", "x1_b", "x2_b", "distance", "ks", "ks_band"});
    json rows = json::array();
    std::vector<double> ks;
    for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
        const double dist = (starts[i] - starts[i + 1]).norm();
        ks.push_back(ks_distance(laws[i], laws[i + 1]));
        t.row().add(std::uint64_t{i}).add(starts[i].x()).add(starts[i].y()).add(starts[i + 1].x());
        t.add(starts[i + 1].y()).add(dist).add(ks.back()).add(band);
        rows.push_back({{"pair", i}, {"distance", dist}, {"ks", ks.back()}});
    }
    ctx.out.write("feller.csv", t.str());
    ctx.summary = {{"pairs", rows}, {"ks_band", band}};
    ctx.check("trend_within_band", ks.back() <= ks.front() + band);
}

using Runner = void (*)(Context&);

Runner runner_for(const std::string& kind)
{
    if (kind == "check-domain") return check_domain_experiment;
    if (kind == "simulate") return simulate_experiment;
    if (kind == "exit-stats") return exit_stats_experiment;
    if (kind == "scaling-study") return scaling_experiment;
    if (kind == "coupling-study") return coupling_experiment;
    if (kind == "tip-coupling") return tip_coupling_run;
    if (kind == "lyapunov-scan") return lyapunov_experiment;
    if (kind == "tv-contraction") return tv_contraction_experiment;
    if (kind == "feller-check") return feller_experiment;
    throw ConfigError("unknown experiment kind '" + kind + "'");
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunResult result;
    std::optional<Context> ctx;
    bool running = false;
    try {
        const CuspDomain d = build_domain(config.domain);
        ctx.emplace(Context{config, d, build_field(config.field, d), build_coefficients(config.coefficients),
                            BatchOptions{config.threads, config.step, false}, OutputDir(config.output_dir)});
        runner_for(config.experiment)(*ctx);
        running = ctx->running;
        bool all = true;
        for (const auto& item : ctx->checks.items()) {
            all = all && item.value().get<bool>();
        }
        if (!all) {
            result.status = RunStatus::acceptance_failure;
            result.message = "one or more checks failed";
        }
    } catch (const ConfigError& e) {
        result.status = RunStatus::validation_failure;
        result.message = e.what();
    } catch (const ValidationFailure& e) {
        result.status = RunStatus::validation_failure;
        result.message = e.what();
        running = true;
    } catch (const std::exception& e) {
        running = ctx && ctx->running;
        result.status = running ? RunStatus::runtime_failure : RunStatus::validation_failure;
        result.message = e.what();
    }
    if (!ctx || !running) {
        return result;
    }

    // results are written before the manifest so that only the manifest
    // carries run-dependent data (wall time, thread count)
    try {
        json summary = ctx->summary;
        summary["experiment"] = config.experiment;
        summary["seed"] = config.seed;
        summary["checks"] = ctx->checks;
        ctx->out.write("summary.json", summary.dump(2) + "\n");

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json manifest;
        manifest["config"] = to_json(config);
        manifest["seed"] = config.seed;
        manifest["version"] = CUSP_VERSION_STRING;
        manifest["compiler"] = __VERSION__;
        manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "."
                            + std::to_string(EIGEN_MINOR_VERSION);
        manifest["json_library"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "."
                                   + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "."
                                   + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
        manifest["wall_time_seconds"] = wall;
        manifest["status"] = to_string(result.status);
        manifest["exit_code"] = static_cast<int>(result.status);
        if (!result.message.empty()) {
            manifest["message"] = result.message;
        }
        manifest["outputs"] = ctx->out.written();
        ctx->out.write("manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        result.status = RunStatus::runtime_failure;
        result.message = std::string("writing results failed: ") + e.what();
    }
    result.outputs = ctx->out.written();
    return result;
}

RunResult run_config_file(const std::string& path, const RunOverrides& overrides)
{
    ExperimentConfig config;
    try {
        config = load_config(path);
    } catch (const ConfigError& e) {
        return {RunStatus::validation_failure, e.what(), {}};
    }
    if (overrides.output_dir) {
        if (overrides.output_dir->empty()) {
            return {RunStatus::validation_failure, "output directory override must not be empty", {}};
        }
        config.output_dir = *overrides.output_dir;
    }
    if (overrides.threads) {
        config.threads = *overrides.threads;
    }
    if (overrides.seed) {
        config.seed = *overrides.seed;
    }
    return run_experiment(config);
}

}  // namespace cusp
