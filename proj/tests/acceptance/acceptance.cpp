// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cusp/coupling.hpp"
#include "cusp/experiment.hpp"
#include "cusp/lyapunov.hpp"
#include "cusp/timechange.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using cusp::Mat2;
using cusp::Vec2;
using nlohmann::json;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Settings {
    fs::path out = "acceptance_out";
    unsigned threads = 1;
};

Settings g_settings;

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string num(double v) { return fmt("%.6g", v); }

// benchmark: (2,2) cusp, 45 degree tilt, sigma = I, b = 0
json bench_config(const std::string& experiment, std::uint64_t seed)
{
    return {{"experiment", experiment},
            {"seed", seed},
            {"domain", {{"kind", "power"}, {"beta1", 2.0}, {"beta2", 2.0}, {"delta_top", 0.1}}},
            {"field", {{"kind", "constant_angle"}, {"theta_lower", -pi / 4}, {"theta_upper", pi / 4}}},
            {"coefficients", {{"kind", "constant"}, {"b", {0.0, 0.0}}, {"sigma", {{1.0, 0.0}, {0.0, 1.0}}}}}};
}

struct Bench {
    cusp::CuspDomain d = cusp::make_power_cusp(2.0, 2.0, 0.1);
    cusp::DirectionField f = cusp::constant_angle_field(d, -pi / 4, pi / 4);
    cusp::Coefficients c = cusp::constant_coefficients(Vec2::Zero(), Mat2::Identity());
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ExperimentRun {
    cusp::RunResult result;
    json summary;
};

// Runs once per name; later criteria may reuse a run.
const ExperimentRun& run_named(const std::string& name, json config)
{
    static std::map<std::string, ExperimentRun> cache;
    if (const auto it = cache.find(name); it != cache.end()) {
        return it->second;
    }
    const fs::path dir = g_settings.out / name;
    fs::remove_all(dir);
    config["output_dir"] = dir.string();
    config["threads"] = g_settings.threads;
    ExperimentRun r;
    r.result = cusp::run_experiment(cusp::parse_config(config));
    if (fs::exists(dir / "summary.json")) {
        r.summary = json::parse(slurp(dir / "summary.json"));
    }
    return cache.emplace(name, std::move(r)).first->second;
}

bool check(const ExperimentRun& r, const std::string& name)
{
    return r.summary.contains("checks") && r.summary["checks"].contains(name) && r.summary["checks"][name].get<bool>();
}

// ---------------------------------------------------------------------------

Outcome cone_gate()
{
    Bench b;
    const auto tilted = cusp::find_cone_certificate(b.f);
    const auto normal = cusp::find_cone_certificate(cusp::constant_angle_field(b.d, 0.0, 0.0));
    Outcome o;
    if (!tilted.certificate) {
        o.detail = "tilted field not certified";
        return o;
    }
    const double e_err = (tilted.certificate->e_star - Vec2(1.0, 0.0)).norm();
    const double m_err = std::abs(tilted.certificate->margin - 1.0 / std::sqrt(2.0));
    o.pass = e_err <= 1e-9 && m_err <= 1e-9 && !normal.certificate && normal.best_margin <= 0.0;
    o.detail = "|e*-(1,0)|=" + num(e_err) + " |margin-1/sqrt2|=" + num(m_err)
               + " normal certified=" + (normal.certificate ? "yes" : "no") + " normal best margin=" + num(normal.best_margin);
    return o;
}

Outcome mirror_algebra()
{
    constexpr std::size_t kSamples = 1'000'000;
    const cusp::rng::StreamKey key = cusp::rng::StreamKey(20240601).split(2);
    double worst_orth = 0.0, worst_flip = 0.0;
    std::size_t accepted = 0, drawn = 0;
    auto inf_norm = [](const Mat2& m) { return std::max(m.row(0).cwiseAbs().sum(), m.row(1).cwiseAbs().sum()); };
    for (std::uint64_t i = 0; accepted < kSamples; ++i) {
        const cusp::rng::Stream s(key, i);
        ++drawn;
        const auto p = s.uniform2(0), q = s.uniform2(1);
        const Vec2 x(2 * p[0] - 1, 2 * p[1] - 1), xt(2 * q[0] - 1, 2 * q[1] - 1);
        Mat2 sig, sig_t;
        const auto a = s.normal2(2), bb = s.normal2(3), c = s.normal2(4), d = s.normal2(5);
        sig << 1 + 0.25 * a[0], 0.25 * a[1], 0.25 * bb[0], 1 + 0.25 * bb[1];
        sig_t << 1 + 0.25 * c[0], 0.25 * c[1], 0.25 * d[0], 1 + 0.25 * d[1];
        if ((x - xt).norm() < 1e-6 || sig.determinant() == 0.0 || sig_t.determinant() == 0.0) {
            continue;
        }
        const double sup_inv = std::max(cusp::op_norm(sig.inverse()), cusp::op_norm(sig_t.inverse()));
        if (!(2.0 / sup_inv - cusp::op_norm(sig - sig_t) > 0.0)) {
            continue;
        }
        ++accepted;
        const Mat2 K = cusp::mirror_matrix(sig_t, x, xt);
        const Vec2 w = sig_t.inverse() * (x - xt);
        worst_orth = std::max(worst_orth, inf_norm(K * K.transpose() - Mat2::Identity()));
        worst_flip = std::max(worst_flip, (K * w + w).cwiseAbs().maxCoeff());
    }
    return {worst_orth < 1e-12 && worst_flip < 1e-12,
            std::to_string(accepted) + " admissible of " + std::to_string(drawn) + " drawn, max ||KK^T-I||inf="
                + num(worst_orth) + " max |Kw+w|inf=" + num(worst_flip)};
}

Outcome plain_coupling()
{
    json c = bench_config("coupling-study", 31);
    c["params"] = {{"rho", {1.0}},
                   {"c_scan", {0.1}},
                   {"n_runs", 100},
                   {"doubling", {{"distance", 0.1}, {"dt", 1e-5}, {"n_runs", 100000}}}};
    const auto& r = run_named("c03_plain_coupling", c);
    if (!r.summary.contains("doubling")) {
        return {false, r.result.message};
    }
    const json& dbl = r.summary["doubling"];
    return {check(r, "doubling_rate_near_half"), "rate=" + num(dbl["rate"].get<double>()) + " over "
                                                     + std::to_string(dbl["trials"].get<std::size_t>())
                                                     + " runs, band=+-" + num(dbl["band"].get<double>())};
}

Outcome coupling_bound()
{
    json c = bench_config("coupling-study", 41);
    // sigma = (1 + x1/5) I with a constant drift; q-const margin is positive on the unit ball
    c["coefficients"] = {{"kind", "affine"},
                         {"b", {0.5, -0.25}},
                         {"B", {{0.0, 0.0}, {0.0, 0.0}}},
                         {"sigma", {{1.0, 0.0}, {0.0, 1.0}}},
                         {"S1", {{0.2, 0.0}, {0.0, 0.2}}},
                         {"S2", {{0.0, 0.0}, {0.0, 0.0}}}};
    c["params"] = {{"rho", {0.25, 0.5, 1.0}}, {"p0", 0.2}, {"n_runs", 2000}};
    const auto& r = run_named("c04_coupling_bound", c);
    std::string detail;
    if (r.summary.contains("c0")) {
        for (const auto& e : r.summary["c0"]) {
            detail += "rho=" + num(e["rho"].get<double>()) + ":C0="
                      + (e["c0"].is_null() ? std::string("none") : num(e["c0"].get<double>())) + " ";
        }
    }
    return {check(r, "c0_found_for_every_rho"), detail.empty() ? r.result.message : detail};
}

Outcome exit_time_bound()
{
    bool pass = true;
    std::string detail;
    for (double delta : {0.0125, 0.025, 0.05}) {
        json c = bench_config("exit-stats", 51);
        c["params"] = {{"level", delta}, {"n_paths", 10000}, {"bound_factor", 8.0}, {"bound_se_multiplier", 3.0}};
        const auto& r = run_named("c05_exit_" + num(delta), c);
        const bool ok = check(r, "mean_exit_time_within_bound");
        pass = pass && ok;
        if (r.summary.contains("mean_exit_time")) {
            detail += "delta=" + num(delta) + ": mean/delta^2=" + num(r.summary["mean_exit_time"].get<double>() / (delta * delta))
                      + " ";
        } else {
            detail += "delta=" + num(delta) + ": " + r.result.message + " ";
        }
    }
    return {pass, detail + "(bound 8*(1+3*rel_se))"};
}

const ExperimentRun& scaling_run()
{
    json c = bench_config("scaling-study", 61);
    c["params"] = {{"levels", {0, 1, 2}},
                   {"n_paths", 20000},
                   {"ks_threshold", 0.05},
                   {"noise_floor_max", 0.02},
                   {"hitting", {{"epsilon", 0.75}, {"n_paths", 2000}, {"grid", 9}, {"confidence", 0.99},
                                {"levels", {0, 1, 2, 4, 8, 16}}}}};
    return run_named("c06_c07_scaling", c);
}

Outcome scaling_convergence()
{
    const auto& r = scaling_run();
    std::string detail = "KS by level:";
    if (r.summary.contains("levels")) {
        for (const auto& l : r.summary["levels"]) {
            detail += " " + std::to_string(l["level"].get<int>()) + "->" + num(l["ks"].get<double>());
        }
        detail += " noise floor=" + num(r.summary["noise_floor_ks"].get<double>());
    }
    return {check(r, "ks_decreasing") && check(r, "finest_ks_below_threshold") && check(r, "noise_floor_below_max"),
            detail};
}

Outcome positive_hitting()
{
    const auto& r = scaling_run();
    std::string detail = "min Wilson 99% lower bound by level:";
    if (r.summary.contains("hitting")) {
        for (const auto& h : r.summary["hitting"]) {
            detail += " " + std::to_string(h["level"].get<int>()) + "->" + num(h["eta_lower"].get<double>());
        }
    }
    return {check(r, "hitting_lower_bound_positive"), detail};
}

Outcome tv_exactness()
{
    json c = bench_config("tv-contraction", 81);
    c["params"] = {{"instances", 1000}, {"max_states", 8}, {"tolerance", 1e-12}};
    const auto& r = run_named("c08_tv", c);
    std::string detail;
    if (r.summary.contains("max_reconstruction_error")) {
        detail = "max reconstruction error=" + num(r.summary["max_reconstruction_error"].get<double>())
                 + " max contraction error=" + num(r.summary["max_contraction_error"].get<double>());
    }
    return {check(r, "reconstruction_exact") && check(r, "contraction_exact"), detail};
}

Outcome tv_contraction()
{
    json c = bench_config("tip-coupling", 91);
    c["params"] = {{"n", 2}, {"n_paths", 500000}, {"blocks", 2}, {"start_fractions", {0.0, 1.0}}, {"noise_floor", true}};
    const auto& r = run_named("c09_tip_coupling", c);
    std::string detail;
    if (r.summary.contains("tv_one_step")) {
        detail = "TV1=" + num(r.summary["tv_one_step"].get<double>()) + " bound="
                 + num(r.summary["bound"].get<double>()) + " TV2=" + num(r.summary["tv_two_step"].get<double>())
                 + " floor=" + num(r.summary["noise_floor"].get<double>()) + " p0=" + num(r.summary["p0_hat"].get<double>())
                 + " eta=" + num(r.summary["eta_hat"].get<double>());
    } else {
        detail = r.result.message;
    }
    return {check(r, "tv_within_bound") && check(r, "two_step_contracts"), detail};
}

Outcome lyapunov_pins()
{
    Bench b;
    // harmonic model case: p = 1, b = 0, constant sigma
    Mat2 sig;
    sig << 1.2, 0.3, -0.1, 0.8;
    const Mat2 cov = sig * sig.transpose();
    const auto model = cusp::constant_coefficients(Vec2::Zero(), sig);
    const auto harmonic = cusp::make_lyapunov(cov, Vec2(1.0, -0.3), 1.0);
    bool harmonic_ok = true;
    double worst_ratio = 0.0;
    for (double theta : {-1.2, -0.6, 0.0, 0.4, 1.1}) {
        for (double r : {1e-3, 1e-2, 0.1}) {
            const Vec2 x = r * cusp::unit_at_angle(theta);
            const double h = 1e-4 * r;
            const auto V = [&](const Vec2& y) { return cusp::v_value(harmonic, y); };
            // round-off level of a central second difference
            const double noise = 1e2 * std::numeric_limits<double>::epsilon() * std::abs(V(x)) / (h * h);
            const double av = std::abs(cusp::apply_generator(model, harmonic, x));
            const double fd = std::abs(0.5 * (cov * oracle::fd_hess(V, x, h)).trace());
            worst_ratio = std::max(worst_ratio, av / noise);
            harmonic_ok = harmonic_ok && av <= noise && av <= std::max(fd, noise);
        }
    }

    double worst_grad = 0.0, worst_hess = 0.0;
    const cusp::rng::Stream s(cusp::rng::StreamKey(101), 0);
    for (std::uint64_t k = 0; k < 500; ++k) {
        const auto u = s.uniform2(2 * k), v = s.uniform2(2 * k + 1);
        const auto spec = cusp::make_lyapunov(cov, Vec2(1.0, 0.4 * (v[0] - 0.5)), 0.05 + 0.95 * u[0]);
        const Vec2 x = (0.5 + u[1]) * cusp::unit_at_angle(-1.2 + 2.4 * v[1]);
        const auto V = [&](const Vec2& y) { return cusp::v_value(spec, y); };
        const Vec2 g = cusp::v_grad(spec, x);
        const Mat2 h = cusp::v_hess(spec, x);
        worst_grad = std::max(worst_grad, (g - oracle::fd_grad(V, x, 1e-6)).norm() / g.norm());
        worst_hess = std::max(worst_hess, (h - oracle::fd_hess(V, x, 1e-4)).norm() / h.norm());
    }

    const auto grid = cusp::geometric_grid(1e-4 * b.d.delta_top, b.d.delta_top, 13);
    const std::vector<double> ladder = {0.1, 0.25, 0.5, 0.75, 0.9};
    const Vec2 e_star = cusp::find_cone_certificate(b.f).certificate->e_star;
    const auto pass_scan = cusp::sign_scan(b.d, b.f, b.c, e_star, ladder, grid);
    const auto fail_scan = cusp::sign_scan(b.d, cusp::constant_angle_field(b.d, 0.0, 0.0), b.c, Vec2(1.0, 0.0), ladder, grid);

    const bool ok = harmonic_ok && worst_grad <= 1e-5 && worst_hess <= 1e-5 && pass_scan.any_pass() && !fail_scan.any_pass();
    return {ok, "harmonic |AV|/noise max=" + num(worst_ratio) + " grad rel err=" + num(worst_grad) + " hess rel err="
                    + num(worst_hess) + " benchmark scan " + (pass_scan.any_pass() ? "passes" : "fails")
                    + ", normal field scan " + (fail_scan.any_pass() ? "passes" : "fails")};
}

Outcome non_attainment()
{
    Bench b;
    constexpr std::size_t kPaths = 100'000;
    cusp::StoppingRule rule;
    rule.lower_level = 1e-6;  // the cap stops every other path
    const Vec2 start(0.5 * b.d.delta_top, b.d.center(0.5 * b.d.delta_top));
    cusp::BatchOptions opt;
    opt.threads = g_settings.threads;
    const auto samples = cusp::batch_run(b.d, b.f, b.c, start, rule, kPaths, cusp::rng::StreamKey(111), opt);
    std::size_t reached = 0, capped = 0;
    double min_x1 = start.x();
    for (const auto& s : samples) {
        reached += s.flag == cusp::ExitFlag::lower_level;
        capped += s.flag == cusp::ExitFlag::cap;
        min_x1 = std::min(min_x1, s.min_x1);
    }

    const auto grid = cusp::geometric_grid(1e-4 * b.d.delta_top, b.d.delta_top, 13);
    const Vec2 e_star = cusp::find_cone_certificate(b.f).certificate->e_star;
    const auto scan = cusp::sign_scan(b.d, b.f, b.c, e_star, {0.9}, grid);
    if (!scan.best[0].second) {
        return {false, "no passing level for p = 0.9"};
    }
    const double delta = *scan.best[0].second;
    const auto spec = cusp::make_lyapunov(b.c.sigma0 * b.c.sigma0.transpose(), e_star, 0.9);
    const auto ruin = cusp::ruin_check(b.d, b.f, b.c, spec, delta, 10000, 20000, 112, 0.99, opt);

    return {reached == 0 && capped == kPaths && ruin.holds,
            std::to_string(reached) + " of " + std::to_string(kPaths) + " reached x1<=1e-6 (min x1=" + num(min_x1)
                + "); ruin at delta=" + num(delta) + " n=10000: lhs_lower=" + num(ruin.lhs_lower)
                + " <= V(start)=" + num(ruin.v_start)};
}

Outcome time_change()
{
    Bench b;
    std::size_t identity_fail = 0, round_trip_fail = 0, rows = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const double level = 0.05;
        const auto p = cusp::simulate(b.d, b.f, b.c, Vec2(0.5 * level, 0.0), cusp::StoppingRule::exit_at(level), seed);
        const auto tc = cusp::stretch(p);
        for (std::size_t k = 0; k < tc.u.size(); ++k) {
            identity_fail += tc.h0[k] + tc.h1[k] != tc.u[k];
        }
        rows += tc.u.size();
        const auto back = cusp::unstretch(tc);
        round_trip_fail += back.times != p.times || back.states != p.states || back.local_time != p.local_time;
    }
    return {identity_fail == 0 && round_trip_fail == 0,
            "1000 paths, " + std::to_string(rows) + " breakpoints: identity mismatches=" + std::to_string(identity_fail)
                + " round-trip mismatches=" + std::to_string(round_trip_fail)};
}

Outcome reproducibility()
{
    std::vector<std::pair<std::string, json>> configs;
    {
        json c = bench_config("check-domain", 1);
        configs.emplace_back("check-domain", c);
    }
    {
        json c = bench_config("simulate", 2);
        c["params"] = {{"x0", {0.02, 0.0}}, {"exit_level", 0.05}, {"time_change", true}};
        configs.emplace_back("simulate", c);
    }
    {
        json c = bench_config("exit-stats", 3);
        c["params"] = {{"level", 0.025}, {"n_paths", 400}};
        configs.emplace_back("exit-stats", c);
    }
    {
        json c = bench_config("scaling-study", 4);
        c["params"] = {{"n_paths", 500}, {"hitting", {{"n_paths", 100}}}};
        configs.emplace_back("scaling-study", c);
    }
    {
        json c = bench_config("coupling-study", 5);
        c["params"] = {{"n_runs", 200}, {"doubling", {{"n_runs", 500}}}};
        configs.emplace_back("coupling-study", c);
    }
    {
        json c = bench_config("tip-coupling", 6);
        c["params"] = {{"n", 2}, {"n_paths", 500}, {"blocks", 2}};
        configs.emplace_back("tip-coupling", c);
    }
    {
        json c = bench_config("lyapunov-scan", 7);
        c["params"] = {{"ruin", {{"delta", 0.05}, {"n", 1000}, {"n_paths", 200}}}};
        configs.emplace_back("lyapunov-scan", c);
    }
    {
        json c = bench_config("tv-contraction", 8);
        c["params"] = {{"instances", 100}};
        configs.emplace_back("tv-contraction", c);
    }
    {
        json c = bench_config("feller-check", 9);
        c["params"] = {{"tip_sequence", {0.02, 0.01, 0.005}}, {"level", 0.05}, {"n_paths", 300}};
        configs.emplace_back("feller-check", c);
    }

    const unsigned many = std::max(4u, g_settings.threads);
    std::size_t compared = 0;
    std::vector<std::string> mismatches;
    for (const auto& [name, config] : configs) {
        std::vector<fs::path> dirs;
        for (const unsigned threads : {1u, many, 1u}) {
            const fs::path dir = g_settings.out / "c13_repro" / (name + "_" + std::to_string(dirs.size()));
            fs::remove_all(dir);
            json c = config;
            c["output_dir"] = dir.string();
            c["threads"] = threads;
            (void)cusp::run_experiment(cusp::parse_config(c));
            dirs.push_back(dir);
        }
        std::set<std::string> names;
        for (const auto& dir : dirs) {
            for (const auto& e : fs::directory_iterator(dir)) {
                names.insert(e.path().filename().string());
            }
        }
        for (const auto& file : names) {
            if (file == "manifest.json") {
                // reruns differ only in wall time and in where they were written
                auto strip = [](const fs::path& p) {
                    json m = json::parse(slurp(p));
                    m.erase("wall_time_seconds");
                    m["config"].erase("output_dir");
                    return m.dump();
                };
                if (strip(dirs[0] / file) != strip(dirs[2] / file)) {
                    mismatches.push_back(name + "/" + file);
                }
                continue;
            }
            ++compared;
            const std::string a = slurp(dirs[0] / file);
            if (a.empty() || a != slurp(dirs[1] / file) || a != slurp(dirs[2] / file)) {
                mismatches.push_back(name + "/" + file);
            }
        }
    }
    std::string detail = std::to_string(configs.size()) + " experiments, " + std::to_string(compared)
                         + " result files compared across threads 1/" + std::to_string(many) + "/1";
    for (const auto& m : mismatches) {
        detail += "; differs: " + m;
    }
    return {mismatches.empty(), detail};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit_seconds;  ///< 0 when no hard limit is set
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance suite"};
    std::string out = g_settings.out.string();
    std::vector<int> only;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("-o,--out", out, "Directory for experiment outputs");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_option("-t,--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    g_settings.out = out;
    g_settings.threads = threads;
    fs::create_directories(g_settings.out);

    const std::vector<Criterion> criteria = {
        {1, "cone gate", 1.0, cone_gate},
        {2, "mirror kernel algebra", 10.0, mirror_algebra},
        {3, "plain Brownian coupling oracle", 0.0, plain_coupling},
        {4, "coupling probability bound", 0.0, coupling_bound},
        {5, "exit time bound", 0.0, exit_time_bound},
        {6, "scaling convergence", 0.0, scaling_convergence},
        {7, "positive hitting", 0.0, positive_hitting},
        {8, "TV decomposition exactness", 10.0, tv_exactness},
        {9, "TV contraction in tip coupling", 3600.0, tv_contraction},
        {10, "Lyapunov pins", 60.0, lyapunov_pins},
        {11, "non-attainment", 0.0, non_attainment},
        {12, "time change exactness", 60.0, time_change},
        {13, "reproducibility", 0.0, reproducibility},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_seconds > 0.0 && secs >= c.time_limit_seconds) {
            o.pass = false;
            o.detail += " (over the " + num(c.time_limit_seconds) + " s limit)";
        }
        failures += !o.pass;
        std::printf("%s %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
