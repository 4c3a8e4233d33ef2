#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cusp/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json base(const std::string& experiment)
{
    return {{"experiment", experiment},
            {"seed", 11},
            {"domain", {{"kind", "power"}, {"beta1", 2.0}, {"beta2", 2.0}, {"delta_top", 0.1}}},
            {"field", {{"kind", "constant_angle"}, {"theta_lower", -0.7853981633974483}, {"theta_upper", 0.7853981633974483}}},
            {"coefficients", {{"kind", "constant"}, {"b", {0.0, 0.0}}, {"sigma", {{1.0, 0.0}, {0.0, 1.0}}}}}};
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("cusp_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

cusp::RunResult run(json j, const fs::path& out)
{
    j["output_dir"] = out.string();
    return cusp::run_experiment(cusp::parse_config(j));
}

}  // namespace

TEST(Config, RoundTripThroughJson)
{
    json j = base("exit-stats");
    j["threads"] = 3;
    j["step"] = {{"c_dt", 0.05}};
    j["params"] = {{"n_paths", 10}};
    const auto c = cusp::parse_config(j);
    EXPECT_EQ(c.threads, 3u);
    EXPECT_EQ(c.step.c_dt, 0.05);
    const auto again = cusp::parse_config(cusp::to_json(c));
    EXPECT_EQ(c, again);
    EXPECT_EQ(cusp::to_json(again), cusp::to_json(c));
}

TEST(Config, TabulatedAndAffineVariantsRoundTrip)
{
    json j = base("check-domain");
    j["domain"] = {{"kind", "tabulated"},
                   {"x1", {0.025, 0.05, 0.1}},
                   {"psi1", {-0.000625, -0.0025, -0.01}},
                   {"psi2", {0.000625, 0.0025, 0.01}},
                   {"delta_top", 0.1}};
    j["coefficients"] = {{"kind", "affine"},
                         {"b", {0.1, 0.0}},
                         {"B", {{0.0, 0.0}, {0.0, 0.0}}},
                         {"sigma", {{1.0, 0.0}, {0.0, 1.0}}},
                         {"S1", {{0.1, 0.0}, {0.0, 0.1}}},
                         {"S2", {{0.0, 0.0}, {0.0, 0.0}}}};
    j["field"] = {{"kind", "constant_direction"}, {"lower", {1.0, 1.0}}, {"upper", {1.0, -1.0}}};
    const auto c = cusp::parse_config(j);
    EXPECT_EQ(cusp::parse_config(cusp::to_json(c)), c);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel)
{
    auto expect_reject = [](const json& j) { EXPECT_THROW((void)cusp::parse_config(j), cusp::ConfigError) << j.dump(); };
    json top = base("simulate");
    top["colour"] = "red";
    expect_reject(top);
    json dom = base("simulate");
    dom["domain"]["beta3"] = 2.0;
    expect_reject(dom);
    json step = base("simulate");
    step["step"] = {{"dt", 1e-3}};
    expect_reject(step);
    json kind = base("does-not-exist");
    expect_reject(kind);
    json missing = base("simulate");
    missing.erase("seed");
    expect_reject(missing);
    json bad_domain = base("simulate");
    bad_domain["domain"]["beta1"] = 0.5;
    expect_reject(bad_domain);
}

TEST(Config, UnknownParamIsValidationFailure)
{
    json j = base("exit-stats");
    j["params"] = {{"n_path", 10}};
    const auto r = run(j, scratch("unknown_param"));
    EXPECT_EQ(r.status, cusp::RunStatus::validation_failure);
    EXPECT_NE(r.message.find("n_path"), std::string::npos);
}

TEST(Runner, CheckDomainStatuses)
{
    const auto out = scratch("check_ok");
    const auto ok = run(base("check-domain"), out);
    EXPECT_EQ(ok.status, cusp::RunStatus::ok) << ok.message;
    const json report = json::parse(slurp(out / "check_domain.json"));
    EXPECT_TRUE(report["all_pass"].get<bool>());
    const json manifest = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["exit_code"], 0);
    EXPECT_EQ(manifest["seed"], 11);
    EXPECT_EQ(manifest["version"], cusp::version());

    json normal = base("check-domain");
    normal["field"]["theta_lower"] = 0.0;
    normal["field"]["theta_upper"] = 0.0;
    const auto bad_out = scratch("check_bad");
    const auto bad = run(normal, bad_out);
    EXPECT_EQ(bad.status, cusp::RunStatus::validation_failure);
    EXPECT_TRUE(fs::exists(bad_out / "check_domain.json"));
    EXPECT_EQ(json::parse(slurp(bad_out / "manifest.json"))["exit_code"], 2);
}

TEST(Runner, RuntimeFailureMapsToStatusThree)
{
    json j = base("simulate");
    j["step"] = {{"step_budget", 3}};
    j["params"] = {{"x0", {0.01, 0.0}}, {"exit_level", 0.1}};
    const auto r = run(j, scratch("budget"));
    EXPECT_EQ(r.status, cusp::RunStatus::runtime_failure);
}

TEST(Runner, SimulateWithTimeChangeWritesBothTables)
{
    json j = base("simulate");
    j["params"] = {{"x0", {0.02, 0.0}}, {"exit_level", 0.05}, {"time_change", true}};
    const auto out = scratch("simulate");
    const auto r = run(j, out);
    EXPECT_EQ(r.status, cusp::RunStatus::ok) << r.message;
    EXPECT_TRUE(fs::exists(out / "path.csv"));
    EXPECT_TRUE(fs::exists(out / "time_change.csv"));
    const json s = json::parse(slurp(out / "summary.json"));
    EXPECT_TRUE(s["checks"]["clock_identity"].get<bool>());
    EXPECT_TRUE(s["checks"]["round_trip"].get<bool>());
}

TEST(Runner, ResultFilesIdenticalAcrossThreadCounts)
{
    json j = base("exit-stats");
    j["params"] = {{"level", 0.05}, {"n_paths", 64}};
    const auto a = scratch("threads1"), b = scratch("threads4");
    j["threads"] = 1;
    ASSERT_EQ(run(j, a).status, cusp::RunStatus::ok);
    j["threads"] = 4;
    ASSERT_EQ(run(j, b).status, cusp::RunStatus::ok);
    for (const char* name : {"samples.csv", "summary.json"}) {
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    }
    const auto c = scratch("rerun");
    j["threads"] = 2;
    ASSERT_EQ(run(j, c).status, cusp::RunStatus::ok);
    EXPECT_EQ(slurp(a / "samples.csv"), slurp(c / "samples.csv"));
}

TEST(Runner, FailedCheckIsAcceptanceFailure)
{
    json j = base("exit-stats");
    j["params"] = {{"level", 0.05}, {"n_paths", 16}, {"bound_factor", 1e-12}};
    const auto r = run(j, scratch("bound"));
    EXPECT_EQ(r.status, cusp::RunStatus::acceptance_failure);
}

TEST(Runner, OverridesApply)
{
    const auto dir = scratch("overrides");
    fs::create_directories(dir);
    json j = base("tv-contraction");
    j["params"] = {{"instances", 20}};
    j["output_dir"] = (dir / "ignored").string();
    std::ofstream(dir / "config.json") << j.dump(2);

    cusp::RunOverrides o;
    o.output_dir = (dir / "used").string();
    o.seed = 99;
    o.threads = 2;
    const auto r = cusp::run_config_file((dir / "config.json").string(), o);
    EXPECT_EQ(r.status, cusp::RunStatus::ok) << r.message;
    EXPECT_FALSE(fs::exists(dir / "ignored"));
    const json m = json::parse(slurp(dir / "used" / "manifest.json"));
    EXPECT_EQ(m["seed"], 99);
    EXPECT_EQ(m["config"]["threads"], 2);

    EXPECT_EQ(cusp::run_config_file((dir / "missing.json").string()).status, cusp::RunStatus::validation_failure);
}

TEST(OutputDir, RejectsNamesOutsideTheRoot)
{
    const auto root = scratch("outdir");
    cusp::OutputDir out(root);
    for (const char* bad : {"../escape.txt", "a/b.txt", "/tmp/abs.txt", "..", ""}) {
        EXPECT_THROW((void)out.file(bad), std::exception) << bad;
    }
    out.write("fine.txt", "x");
    EXPECT_EQ(slurp(root / "fine.txt"), "x");
    EXPECT_EQ(out.written(), std::vector<std::string>{"fine.txt"});
}

TEST(Table, FormatsRowsAndNumbers)
{
    cusp::Table t({"a", "b", "c"});
    t.row().add(0.1).add(std::uint64_t{7}).add(std::string("x"));
    t.row().add(std::numeric_limits<double>::quiet_NaN()).add(-std::numeric_limits<double>::infinity()).add(1e-300);
    EXPECT_EQ(t.str(), "a,b,c\n0.1,7,x\nnan,-inf,1e-300\n");
    EXPECT_EQ(std::stod(cusp::format_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(Config, ShippedExamplesParse)
{
    std::size_t seen = 0;
    for (const auto& e : fs::directory_iterator(CUSP_TEST_DATA_DIR)) {
        if (e.path().extension() != ".json") {
            continue;
        }
        ++seen;
        EXPECT_NO_THROW((void)cusp::load_config(e.path().string())) << e.path();
    }
    EXPECT_EQ(seen, cusp::experiment_kinds().size());
}
