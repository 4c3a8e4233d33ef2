#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cusp/geometry.hpp"
#include "cusp/rng.hpp"
#include "oracles.hpp"

using cusp::Vec2;
using std::numbers::pi;

namespace {

cusp::CuspDomain benchmark() { return cusp::make_power_cusp(2.0, 2.0, 0.1); }

cusp::DirectionField tilted(const cusp::CuspDomain& d) { return cusp::constant_angle_field(d, -pi / 4, pi / 4); }

}  // namespace

TEST(PowerCusp, RatioLimits)
{
    EXPECT_EQ(cusp::make_power_cusp(2, 2, 0.1).L_limit, -0.5);
    EXPECT_EQ(cusp::make_power_cusp(3, 2, 0.1).L_limit, 0.0);
    EXPECT_EQ(cusp::make_power_cusp(2, 3, 0.1).L_limit, -1.0);
}

TEST(PowerCusp, ProfilesAndDerivatives)
{
    const auto d = cusp::make_power_cusp(2.0, 3.0, 0.1);
    EXPECT_DOUBLE_EQ(d.lower(0.05), -0.0025);
    EXPECT_DOUBLE_EQ(d.upper(0.05), 0.000125);
    EXPECT_DOUBLE_EQ(d.dpsi1(0.05), -0.1);
    EXPECT_DOUBLE_EQ(d.dpsi2(0.05), 3 * 0.0025);
}

TEST(PowerCusp, RejectsNonCuspsAndLargeCaps)
{
    EXPECT_THROW(cusp::make_power_cusp(1.0, 2.0, 0.1), cusp::Error);
    EXPECT_THROW(cusp::make_power_cusp(2.0, 0.5, 0.1), cusp::Error);
    // psi' = 2 x reaches 1/2 at x = 1/4
    EXPECT_THROW(cusp::make_power_cusp(2.0, 2.0, 0.3), cusp::Error);
}

TEST(CheckDomain, BenchmarkPassesEverything)
{
    const auto r = cusp::check_domain(benchmark(), 100);
    EXPECT_TRUE(r.all_pass());
    for (const char* name : {"strict ordering", "profiles -> 0", "derivative -> 0", "derivative cap", "ratio -> L"}) {
        ASSERT_NE(r.find(name), nullptr) << name;
    }
}

TEST(CheckDomain, DegenerateSlitFailsOrdering)
{
    auto f = [](double x) { return x * x; };
    auto df = [](double x) { return 2 * x; };
    const auto d = cusp::make_profile_domain(f, f, df, df, 0.1, 0.0);
    const auto r = cusp::check_domain(d, 100);
    EXPECT_FALSE(r.find("strict ordering")->pass);
}

TEST(CheckDomain, WedgeFailsDerivativeLimit)
{
    const auto d = cusp::make_profile_domain([](double x) { return -x * x; }, [](double x) { return x; },
                                             [](double x) { return -2 * x; }, [](double) { return 1.0; }, 0.1, -0.0);
    const auto r = cusp::check_domain(d, 100);
    EXPECT_FALSE(r.find("derivative -> 0")->pass);
}

TEST(CheckDomain, EstimatedRatioLimit)
{
    const auto d = cusp::make_profile_domain([](double x) { return -x * x; }, [](double x) { return x * x + x * x * x; },
                                             [](double x) { return -2 * x; },
                                             [](double x) { return 2 * x + 3 * x * x; }, 0.1);
    EXPECT_NEAR(d.L_limit, -0.5, 1e-6);
    EXPECT_TRUE(cusp::check_domain(d, 100).find("ratio -> L")->pass);
}

TEST(TabulatedDomain, InterpolatesPowerLawsExactly)
{
    std::vector<double> x, p1, p2;
    for (double v : cusp::geometric_grid(1e-9, 0.1, 30)) {
        x.push_back(v);
        p1.push_back(-v * v);
        p2.push_back(v * v);
    }
    const auto d = cusp::make_tabulated_domain(x, p1, p2, 0.1);
    EXPECT_NEAR(d.upper(0.0123), 0.0123 * 0.0123, 1e-15);
    EXPECT_NEAR(d.lower(0.0123), -0.0123 * 0.0123, 1e-15);
    EXPECT_NEAR(d.L_limit, -0.5, 1e-9);
    EXPECT_TRUE(cusp::check_domain(d, 100).all_pass());
}

TEST(AngleField, NormalReflectionLimits)
{
    const auto f = cusp::constant_angle_field(benchmark(), 0.0, 0.0);
    EXPECT_NEAR((f.gamma1_0 - Vec2(0, 1)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((f.gamma2_0 - Vec2(0, -1)).norm(), 0.0, 1e-15);
}

TEST(AngleField, TiltedLimits)
{
    const auto f = tilted(benchmark());
    EXPECT_NEAR((f.gamma1_0 - Vec2(1, 1) / std::sqrt(2.0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((f.gamma2_0 - Vec2(1, -1) / std::sqrt(2.0)).norm(), 0.0, 1e-15);
    EXPECT_TRUE(cusp::check_field(benchmark(), f, 100).all_pass());
}

TEST(AngleField, RejectsTangentialAngles)
{
    EXPECT_THROW(cusp::constant_angle_field(benchmark(), pi / 2, 0.0), cusp::Error);
    EXPECT_THROW(cusp::constant_angle_field(benchmark(), 0.0, -2.0), cusp::Error);
}

TEST(AngleField, PositiveNormalComponentAtRandomPoints)
{
    const auto d = benchmark();
    const auto f = cusp::constant_angle_field(d, -1.2, 0.7);
    const cusp::rng::Stream s(cusp::rng::StreamKey(5), 0);
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const auto u = s.uniform2(k);
        const double x1 = d.delta_top * std::pow(u[0], 4.0);
        const bool upper = u[1] < 0.5;
        // inward normal from the profile derivative, computed directly
        const Vec2 n = upper ? Vec2(d.dpsi2(x1), -1.0).normalized() : Vec2(-d.dpsi1(x1), 1.0).normalized();
        const Vec2 g = upper ? f.gamma_upper(x1) : f.gamma_lower(x1);
        EXPECT_NEAR(g.norm(), 1.0, 1e-14);
        EXPECT_GT(g.dot(n), 0.0);
    }
}

TEST(ConeCertificate, SymmetricTiltGivesAxis)
{
    const auto c = cusp::find_cone_certificate(tilted(benchmark()));
    ASSERT_TRUE(c.certificate);
    EXPECT_NEAR((c.certificate->e_star - Vec2(1, 0)).norm(), 0.0, 1e-9);
    EXPECT_NEAR(c.certificate->margin, 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(ConeCertificate, NormalReflectionFails)
{
    const auto c = cusp::find_cone_certificate(cusp::constant_angle_field(benchmark(), 0.0, 0.0));
    EXPECT_FALSE(c.certificate);
    EXPECT_LE(c.best_margin, 1e-12);
}

TEST(ConeCertificate, AlignedCone)
{
    const auto c = cusp::find_cone_certificate(Vec2(1, 0), Vec2(1, 0));
    ASSERT_TRUE(c.certificate);
    // the objective is quadratic at its peak, so the argmax is only resolved to ~sqrt(eps)
    EXPECT_NEAR((c.certificate->e_star - Vec2(1, 0)).norm(), 0.0, 1e-7);
    EXPECT_NEAR(c.certificate->margin, 1.0, 1e-12);
}

TEST(ConeCertificate, RotationConsistent)
{
    const cusp::rng::Stream s(cusp::rng::StreamKey(6), 0);
    for (std::uint64_t k = 0; k < 200; ++k) {
        const auto u = s.uniform2(k);
        const Vec2 g1 = cusp::unit_at_angle(0.2 + 1.2 * u[0]);
        const Vec2 g2 = cusp::unit_at_angle(-0.2 - 1.2 * u[1]);
        const auto base = cusp::find_cone_certificate(g1, g2);
        ASSERT_TRUE(base.certificate);
        const double rot = 2 * pi * s.uniform2(k + 1000)[0];
        const auto turned = cusp::find_cone_certificate(cusp::rotate(g1, rot), cusp::rotate(g2, rot),
                                                        cusp::rotate(Vec2(1, 0), rot));
        ASSERT_TRUE(turned.certificate);
        EXPECT_NEAR((turned.certificate->e_star - cusp::rotate(base.certificate->e_star, rot)).norm(), 0.0, 1e-9);
    }
}

TEST(ConeCertificate, AxisIsPositiveCombinationOfTipLimits)
{
    const cusp::rng::Stream s(cusp::rng::StreamKey(8), 0);
    for (std::uint64_t k = 0; k < 300; ++k) {
        const auto u = s.uniform2(k);
        // inward on each arc, opening less than a half turn around the axis
        const double t1 = pi * (0.02 + 0.96 * u[0]);
        const double t2 = -pi * (0.02 + 0.96 * u[1]);
        if (t1 - t2 >= pi - 1e-6) {
            continue;
        }
        const Vec2 g1 = cusp::unit_at_angle(t1);
        const Vec2 g2 = cusp::unit_at_angle(t2);
        ASSERT_TRUE(cusp::find_cone_certificate(g1, g2).certificate);
        const auto [a, b] = cusp::positive_combination(g1, g2);
        EXPECT_GE(a, -1e-12);
        EXPECT_GE(b, -1e-12);
        EXPECT_NEAR((a * g1 + b * g2 - Vec2(1, 0)).norm(), 0.0, 1e-9);
    }
}

// A locally flat lower arc: psi1 = 0 near x1 = 0.3, domain wide enough to
// keep the upper arc out of the way.
namespace {

struct HalfPlane {
    Vec2 dir;
    [[nodiscard]] double lower(double) const { return 0.0; }
    [[nodiscard]] double upper(double) const { return 10.0; }
    [[nodiscard]] bool contains(const Vec2& x) const { return x.y() >= 0.0 && x.y() <= 10.0; }
    [[nodiscard]] bool has_tip() const { return false; }
    [[nodiscard]] Vec2 gamma_lower(double) const { return dir; }
    [[nodiscard]] Vec2 gamma_upper(double) const { return Vec2(0, -1); }
    [[nodiscard]] Vec2 tip_direction() const { return Vec2(1, 0); }
    [[nodiscard]] double tolerance() const { return 1e-13; }
};

}  // namespace

TEST(Projection, HalfPlaneVertical)
{
    const auto p = cusp::project_oblique(HalfPlane{Vec2(0, 1)}, Vec2(0.3, -0.2));
    EXPECT_NEAR(p.point.x(), 0.3, 1e-15);
    EXPECT_NEAR(p.point.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.lambda, 0.2, 1e-12);
}

TEST(Projection, HalfPlaneOblique)
{
    const auto p = cusp::project_oblique(HalfPlane{Vec2(1, 1).normalized()}, Vec2(0.3, -0.2));
    EXPECT_NEAR(p.point.x(), 0.5, 1e-12);
    EXPECT_NEAR(p.point.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.lambda, 0.2 * std::sqrt(2.0), 1e-12);
}

TEST(Projection, TipOvershootMatchesBisection)
{
    const auto d = benchmark();
    const auto f = tilted(d);
    EXPECT_NEAR((f.tip_direction() - Vec2(1, 0)).norm(), 0.0, 1e-15);
    const Vec2 x(-0.01, 0.0);
    const auto p = cusp::project_oblique(d, f, x);
    EXPECT_TRUE(d.contains(p.point));
    EXPECT_GE(p.point.x(), 0.0);
    const double lam = oracle::bisect_ray(x, Vec2(1, 0), 1.0, 1e-15, [&](const Vec2& y) { return d.contains(y); });
    EXPECT_NEAR(p.lambda, lam, 1e-12);
}

TEST(Projection, LowerArcMatchesBisection)
{
    const auto d = benchmark();
    const auto f = tilted(d);
    const Vec2 x(0.05, -0.0031);
    const auto p = cusp::project_oblique(d, f, x);
    const Vec2 g = f.gamma_lower(x.x());
    const double lam =
        oracle::bisect_ray(x, g, 0.01, 1e-16, [&](const Vec2& y) { return y.y() >= d.lower(y.x()); });
    EXPECT_NEAR(p.lambda, lam, 1e-12);
    EXPECT_TRUE(d.contains(p.point));
    ASSERT_TRUE(p.direction);
}

TEST(Projection, MembershipAndZeroLambdaProperty)
{
    const auto d = benchmark();
    const auto f = tilted(d);
    const cusp::rng::Stream s(cusp::rng::StreamKey(10), 0);
    for (std::uint64_t k = 0; k < 2000; ++k) {
        const auto u = s.uniform2(k);
        const auto v = s.uniform2(k + 100000);
        const double x1 = d.delta_top * (1.2 * u[0] - 0.1);
        const double x2 = (v[0] - 0.5) * 3.0 * d.width(std::max(x1, 1e-3));
        const Vec2 x(std::min(x1, 0.099), x2);
        const auto p = cusp::project_oblique(d, f, x);
        EXPECT_TRUE(d.contains_tol(p.point)) << x.transpose();
        EXPECT_EQ(p.lambda == 0.0, d.contains(x));
    }
}
