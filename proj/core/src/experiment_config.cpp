#include "cusp/experiment_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace cusp {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed)
{
    if (!j.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <class T>
T field(const json& j, const std::string& key, const std::string& where, const T& fallback)
{
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T required(const json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key)) {
        throw ConfigError("missing " + where + "." + key);
    }
    return field<T>(j, key, where, T{});
}

Mat2 mat_from_json(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 || !j[1].is_array()
        || j[1].size() != 2) {
        throw ConfigError(where + " must be a 2x2 array");
    }
    Mat2 m;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            if (!j[r][c].is_number()) {
                throw ConfigError(where + " entries must be numbers");
            }
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json to_json(const Mat2& m)
{
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

DomainSpec parse_domain(const json& j)
{
    DomainSpec s;
    s.kind = required<std::string>(j, "kind", "domain");
    if (s.kind == "power") {
        check_keys(j, "domain", {"kind", "beta1", "beta2", "delta_top"});
        s.beta1 = required<double>(j, "beta1", "domain");
        s.beta2 = required<double>(j, "beta2", "domain");
    } else if (s.kind == "tabulated") {
        check_keys(j, "domain", {"kind", "x1", "psi1", "psi2", "delta_top"});
        s.x1 = required<std::vector<double>>(j, "x1", "domain");
        s.psi1 = required<std::vector<double>>(j, "psi1", "domain");
        s.psi2 = required<std::vector<double>>(j, "psi2", "domain");
    } else {
        throw ConfigError("domain.kind must be 'power' or 'tabulated'");
    }
    s.delta_top = required<double>(j, "delta_top", "domain");
    return s;
}

FieldSpec parse_field(const json& j)
{
    FieldSpec s;
    s.kind = required<std::string>(j, "kind", "field");
    if (s.kind == "constant_angle") {
        check_keys(j, "field", {"kind", "theta_lower", "theta_upper"});
        s.theta_lower = required<double>(j, "theta_lower", "field");
        s.theta_upper = required<double>(j, "theta_upper", "field");
    } else if (s.kind == "constant_direction") {
        check_keys(j, "field", {"kind", "lower", "upper"});
        s.lower = vec_from_json(required<json>(j, "lower", "field"), "field.lower");
        s.upper = vec_from_json(required<json>(j, "upper", "field"), "field.upper");
    } else {
        throw ConfigError("field.kind must be 'constant_angle' or 'constant_direction'");
    }
    return s;
}

CoefficientSpec parse_coefficients(const json& j)
{
    CoefficientSpec s;
    s.kind = required<std::string>(j, "kind", "coefficients");
    if (s.kind == "constant") {
        check_keys(j, "coefficients", {"kind", "b", "sigma"});
        s.b = vec_from_json(required<json>(j, "b", "coefficients"), "coefficients.b");
        s.sigma = mat_from_json(required<json>(j, "sigma", "coefficients"), "coefficients.sigma");
    } else if (s.kind == "affine") {
        check_keys(j, "coefficients", {"kind", "b", "B", "sigma", "S1", "S2"});
        s.b = vec_from_json(required<json>(j, "b", "coefficients"), "coefficients.b");
        s.B = mat_from_json(required<json>(j, "B", "coefficients"), "coefficients.B");
        s.sigma = mat_from_json(required<json>(j, "sigma", "coefficients"), "coefficients.sigma");
        s.S1 = mat_from_json(required<json>(j, "S1", "coefficients"), "coefficients.S1");
        s.S2 = mat_from_json(required<json>(j, "S2", "coefficients"), "coefficients.S2");
    } else if (s.kind == "tabulated") {
        check_keys(j, "coefficients", {"kind", "x1", "b", "sigma"});
        s.x1 = required<std::vector<double>>(j, "x1", "coefficients");
        const json b = required<json>(j, "b", "coefficients");
        const json sig = required<json>(j, "sigma", "coefficients");
        if (!b.is_array() || !sig.is_array()) {
            throw ConfigError("tabulated coefficients need arrays b and sigma");
        }
        for (const auto& v : b) {
            s.b_table.push_back(vec_from_json(v, "coefficients.b[]"));
        }
        for (const auto& m : sig) {
            s.sigma_table.push_back(mat_from_json(m, "coefficients.sigma[]"));
        }
    } else {
        throw ConfigError("coefficients.kind must be 'constant', 'affine' or 'tabulated'");
    }
    return s;
}

StepControl parse_step(const json& j)
{
    check_keys(j, "step", {"c_dt", "dt_max", "dt_min", "step_budget"});
    StepControl s;
    s.c_dt = field<double>(j, "c_dt", "step", s.c_dt);
    s.dt_max = field<double>(j, "dt_max", "step", s.dt_max);
    s.dt_min = field<double>(j, "dt_min", "step", s.dt_min);
    s.step_budget = field<std::uint64_t>(j, "step_budget", "step", s.step_budget);
    if (!(s.c_dt > 0.0 && s.dt_min > 0.0 && s.dt_max >= s.dt_min && s.step_budget > 0)) {
        throw ConfigError("step needs c_dt > 0, 0 < dt_min <= dt_max, step_budget > 0");
    }
    return s;
}

}  // namespace

Vec2 vec_from_json(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ConfigError(where + " must be an array of two numbers");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

ExperimentConfig parse_config(const json& j)
{
    check_keys(j, "config",
               {"experiment", "seed", "threads", "output_dir", "domain", "field", "coefficients", "step", "params"});
    ExperimentConfig c;
    c.experiment = required<std::string>(j, "experiment", "config");
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), c.experiment) == kinds.end()) {
        throw ConfigError("unknown experiment kind '" + c.experiment + "'");
    }
    c.seed = required<std::uint64_t>(j, "seed", "config");
    c.threads = field<unsigned>(j, "threads", "config", 1u);
    c.output_dir = field<std::string>(j, "output_dir", "config", c.output_dir);
    if (c.output_dir.empty()) {
        throw ConfigError("output_dir must not be empty");
    }
    c.domain = parse_domain(required<json>(j, "domain", "config"));
    c.field = parse_field(required<json>(j, "field", "config"));
    c.coefficients = parse_coefficients(required<json>(j, "coefficients", "config"));
    c.step = parse_step(field<json>(j, "step", "config", json::object()));
    c.params = field<json>(j, "params", "config", json::object());
    if (!c.params.is_object()) {
        throw ConfigError("params must be an object");
    }

    // build once so every referenced parameter is validated before any run
    try {
        const CuspDomain d = build_domain(c.domain);
        (void)build_field(c.field, d);
        (void)build_coefficients(c.coefficients);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c)
{
    json j;
    j["experiment"] = c.experiment;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["output_dir"] = c.output_dir;

    json d;
    d["kind"] = c.domain.kind;
    d["delta_top"] = c.domain.delta_top;
    if (c.domain.kind == "power") {
        d["beta1"] = c.domain.beta1;
        d["beta2"] = c.domain.beta2;
    } else {
        d["x1"] = c.domain.x1;
        d["psi1"] = c.domain.psi1;
        d["psi2"] = c.domain.psi2;
    }
    j["domain"] = d;

    json f;
    f["kind"] = c.field.kind;
    if (c.field.kind == "constant_angle") {
        f["theta_lower"] = c.field.theta_lower;
        f["theta_upper"] = c.field.theta_upper;
    } else {
        f["lower"] = to_json(c.field.lower);
        f["upper"] = to_json(c.field.upper);
    }
    j["field"] = f;

    json k;
    k["kind"] = c.coefficients.kind;
    if (c.coefficients.kind == "tabulated") {
        k["x1"] = c.coefficients.x1;
        k["b"] = json::array();
        for (const auto& v : c.coefficients.b_table) {
            k["b"].push_back(to_json(v));
        }
        k["sigma"] = json::array();
        for (const auto& m : c.coefficients.sigma_table) {
            k["sigma"].push_back(to_json(m));
        }
    } else {
        k["b"] = to_json(c.coefficients.b);
        k["sigma"] = to_json(c.coefficients.sigma);
        if (c.coefficients.kind == "affine") {
            k["B"] = to_json(c.coefficients.B);
            k["S1"] = to_json(c.coefficients.S1);
            k["S2"] = to_json(c.coefficients.S2);
        }
    }
    j["coefficients"] = k;

    j["step"] = {{"c_dt", c.step.c_dt},
                 {"dt_max", c.step.dt_max},
                 {"dt_min", c.step.dt_min},
                 {"step_budget", c.step.step_budget}};
    j["params"] = c.params;
    return j;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

CuspDomain build_domain(const DomainSpec& s)
{
    if (s.kind == "power") {
        return make_power_cusp(s.beta1, s.beta2, s.delta_top);
    }
    return make_tabulated_domain(s.x1, s.psi1, s.psi2, s.delta_top);
}

DirectionField build_field(const FieldSpec& s, const CuspDomain& d)
{
    if (s.kind == "constant_angle") {
        return constant_angle_field(d, s.theta_lower, s.theta_upper);
    }
    return constant_direction_field(s.lower, s.upper);
}

Coefficients build_coefficients(const CoefficientSpec& s)
{
    if (s.kind == "constant") {
        return constant_coefficients(s.b, s.sigma);
    }
    if (s.kind == "affine") {
        return affine_coefficients(s.b, s.B, s.sigma, s.S1, s.S2);
    }
    return tabulated_coefficients(s.x1, s.b_table, s.sigma_table);
}

Params::Params(const json& j, std::vector<std::string> allowed) : j_(j)
{
    check_keys(j, "params", std::set<std::string>(allowed.begin(), allowed.end()));
}

}  // namespace cusp
