#pragma once

// JSON experiment configuration. Every object is checked against its allowed
// keys; anything unknown is a validation error.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cusp/dynamics.hpp"
#include "cusp/geometry.hpp"

namespace cusp {

/// Raised for any configuration problem; maps to the validation exit status.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct DomainSpec {
    std::string kind = "power";  ///< power | tabulated
    double beta1 = 2.0;
    double beta2 = 2.0;
    double delta_top = 0.1;
    std::vector<double> x1;
    std::vector<double> psi1;
    std::vector<double> psi2;
};

struct FieldSpec {
    std::string kind = "constant_angle";  ///< constant_angle | constant_direction
    double theta_lower = 0.0;
    double theta_upper = 0.0;
    Vec2 lower = Vec2(0.0, 1.0);
    Vec2 upper = Vec2(0.0, -1.0);
};

struct CoefficientSpec {
    std::string kind = "constant";  ///< constant | affine | tabulated
    Vec2 b = Vec2::Zero();
    Mat2 sigma = Mat2::Identity();
    Mat2 B = Mat2::Zero();
    Mat2 S1 = Mat2::Zero();
    Mat2 S2 = Mat2::Zero();
    std::vector<double> x1;
    std::vector<Vec2> b_table;
    std::vector<Mat2> sigma_table;
};

inline const std::vector<std::string>& experiment_kinds()
{
    static const std::vector<std::string> kinds = {"check-domain", "simulate",       "exit-stats",
                                                   "scaling-study", "coupling-study", "tip-coupling",
                                                   "lyapunov-scan", "tv-contraction", "feller-check"};
    return kinds;
}

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string output_dir = "cusp_out";
    DomainSpec domain;
    FieldSpec field;
    CoefficientSpec coefficients;
    StepControl step;
    nlohmann::json params = nlohmann::json::object();

    friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
};

/// Parses and validates; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

CuspDomain build_domain(const DomainSpec& s);
DirectionField build_field(const FieldSpec& s, const CuspDomain& d);
Coefficients build_coefficients(const CoefficientSpec& s);

/// Reads a parameter with a default, rejecting keys outside `allowed`.
class Params
{
  public:
    Params(const nlohmann::json& j, std::vector<std::string> allowed);

    template <class T>
    T get(const std::string& key, const T& fallback) const
    {
        if (!j_.contains(key)) {
            return fallback;
        }
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("params." + key + ": " + e.what());
        }
    }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
    [[nodiscard]] const nlohmann::json& raw(const std::string& key) const { return j_.at(key); }

  private:
    const nlohmann::json& j_;
};

Vec2 vec_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace cusp
