#include <gtest/gtest.h>

#include <cmath>

#include "cusp/error.hpp"
#include "cusp/rng.hpp"
#include "cusp/stats.hpp"
#include "oracles.hpp"

using cusp::DiscreteMeasure;
using cusp::EmpiricalDistribution;

namespace {

std::vector<double> normal_sample(std::uint64_t seed, std::size_t n, double shift = 0.0)
{
    const cusp::rng::Stream s(cusp::rng::StreamKey(seed), 0);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = s.normal2(i).x() + shift;
    }
    return v;
}

}  // namespace

TEST(Empirical, SortsAndSummarizes)
{
    const EmpiricalDistribution d({3.0, 1.0, 2.0});
    EXPECT_EQ(d.samples(), (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_DOUBLE_EQ(d.mean(), 2.0);
    EXPECT_DOUBLE_EQ(d.variance(), 1.0);
    EXPECT_DOUBLE_EQ(d.quantile(0.0), 1.0);
    EXPECT_DOUBLE_EQ(d.quantile(1.0), 3.0);
    EXPECT_DOUBLE_EQ(d.cdf(2.0), 2.0 / 3.0);
}

TEST(Empirical, RejectsEmptyAndNonFinite)
{
    EXPECT_THROW(EmpiricalDistribution({}), cusp::Error);
    EXPECT_THROW(EmpiricalDistribution({1.0, NAN}), cusp::Error);
}

TEST(KsDistance, IdenticalSamplesGiveZero)
{
    const auto v = normal_sample(1, 200);
    EXPECT_EQ(cusp::ks_distance(EmpiricalDistribution(v), EmpiricalDistribution(v)), 0.0);
}

TEST(KsDistance, DisjointSupportsGiveOne)
{
    EXPECT_EQ(cusp::ks_distance(EmpiricalDistribution({0.0, 1.0}), EmpiricalDistribution({2.0, 3.0, 4.0})), 1.0);
}

TEST(KsDistance, HandEvaluatedExample)
{
    const std::vector<double> a{0.0, 1.0}, b{0.5};
    EXPECT_DOUBLE_EQ(oracle::ks_brute(a, b), 0.5);
    EXPECT_DOUBLE_EQ(cusp::ks_distance(EmpiricalDistribution(a), EmpiricalDistribution(b)), 0.5);
}

TEST(KsDistance, MatchesBruteForceWithTies)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto a = normal_sample(seed, 37), b = normal_sample(seed + 100, 53, 0.3);
        // coarse rounding creates ties within and across samples
        for (auto* s : {&a, &b}) {
            for (double& x : *s) {
                x = std::round(4.0 * x) / 4.0;
            }
        }
        EXPECT_NEAR(cusp::ks_distance(EmpiricalDistribution(a), EmpiricalDistribution(b)), oracle::ks_brute(a, b),
                    1e-15);
    }
}

TEST(KsDistance, SymmetricAndAffineInvariant)
{
    const auto a = normal_sample(5, 300), b = normal_sample(6, 250, 0.2);
    const EmpiricalDistribution ea(a), eb(b);
    EXPECT_EQ(cusp::ks_distance(ea, eb), cusp::ks_distance(eb, ea));
    std::vector<double> a2, b2;
    for (double x : a) a2.push_back(3.0 * x - 7.0);
    for (double x : b) b2.push_back(3.0 * x - 7.0);
    EXPECT_EQ(cusp::ks_distance(EmpiricalDistribution(a2), EmpiricalDistribution(b2)), cusp::ks_distance(ea, eb));
}

TEST(TvBinned, IdenticalAndDisjoint)
{
    const auto v = normal_sample(2, 100);
    EXPECT_EQ(cusp::tv_binned(EmpiricalDistribution(v), EmpiricalDistribution(v)), 0.0);
    EXPECT_EQ(cusp::tv_binned(EmpiricalDistribution({0.0, 0.1}), EmpiricalDistribution({5.0, 5.1}), 10), 1.0);
}

TEST(TvBinned, MatchesBruteForceAndAutoRule)
{
    const auto a = normal_sample(3, 400), b = normal_sample(4, 600, 0.5);
    const int auto_bins = static_cast<int>(std::ceil(std::cbrt(1000.0)));
    EXPECT_EQ(auto_bins, 10);
    EXPECT_NEAR(cusp::tv_binned(EmpiricalDistribution(a), EmpiricalDistribution(b)),
                oracle::tv_binned_brute(a, b, auto_bins), 1e-12);
    EXPECT_NEAR(cusp::tv_binned(EmpiricalDistribution(a), EmpiricalDistribution(b), 7),
                oracle::tv_binned_brute(a, b, 7), 1e-12);
}

TEST(TvBinned, SelfSplitStaysNearNoise)
{
    const auto v = normal_sample(8, 20000);
    const std::vector<double> h1(v.begin(), v.begin() + 10000), h2(v.begin() + 10000, v.end());
    // ~28 bins, each bin difference has sd about sqrt(2 p / 1e4)
    const double tv = cusp::tv_binned(EmpiricalDistribution(h1), EmpiricalDistribution(h2));
    EXPECT_LT(tv, 0.05);
}

TEST(Wilson, MatchesTextbookFormula)
{
    const double z = cusp::normal_quantile_two_sided(0.95);
    EXPECT_NEAR(z, 1.959963984540054, 1e-9);
    for (auto [k, n] : {std::pair{0, 10}, {3, 10}, {10, 10}, {4999, 10000}}) {
        const auto w = cusp::wilson_interval(k, n, 0.95);
        const auto o = oracle::wilson(k, n, z);
        EXPECT_NEAR(w.lo, o.first, 1e-12);
        EXPECT_NEAR(w.hi, o.second, 1e-12);
    }
}

TEST(Bootstrap, CoversTheSampleMean)
{
    const EmpiricalDistribution d(normal_sample(9, 500, 1.0));
    const auto ci = cusp::bootstrap_mean_interval(d, 400, 17, 0.95);
    EXPECT_LT(ci.lo, d.mean());
    EXPECT_GT(ci.hi, d.mean());
    const auto again = cusp::bootstrap_mean_interval(d, 400, 17, 0.95);
    EXPECT_EQ(ci.lo, again.lo);
    EXPECT_EQ(ci.hi, again.hi);
}

TEST(DiscreteMeasureTest, ValidatesAtoms)
{
    EXPECT_THROW(DiscreteMeasure({{0.0, 0.5}, {0.0, 0.5}}), cusp::Error);
    EXPECT_THROW(DiscreteMeasure({{0.0, 0.5}, {1.0, 0.6}}), cusp::Error);
    EXPECT_THROW(DiscreteMeasure({{0.0, -0.1}, {1.0, 1.1}}), cusp::Error);
    const DiscreteMeasure m({{2.0, 0.25}, {1.0, 0.75}});
    EXPECT_EQ(m.atoms().front().first, 1.0);
    EXPECT_EQ(m.weight_at(2.0), 0.25);
    EXPECT_EQ(m.weight_at(3.0), 0.0);
}

TEST(TvDecompose, EqualMeasuresGiveZeroRho)
{
    const DiscreteMeasure m({{0.0, 0.3}, {1.0, 0.7}});
    const auto dec = cusp::tv_decompose(m, m);
    EXPECT_EQ(dec.rho, 0.0);
    EXPECT_TRUE(dec.rho_zero);
}

TEST(TvDecompose, SingularPointMasses)
{
    const DiscreteMeasure a({{1.0, 1.0}}), b({{2.0, 1.0}});
    const auto dec = cusp::tv_decompose(a, b);
    EXPECT_EQ(dec.rho, 1.0);
    EXPECT_EQ(dec.nu1.weight_at(1.0), 1.0);
    EXPECT_EQ(dec.nu2.weight_at(2.0), 1.0);
}

TEST(TvDecompose, HalfOverlapExample)
{
    // mu1 = (d_a + d_b)/2, mu2 = d_b
    const Eigen::Vector2d m1(0.5, 0.5), m2(0.0, 1.0);
    const auto o = oracle::tv_decompose_dense(m1, m2);
    EXPECT_DOUBLE_EQ(o.rho, 0.5);
    const auto dec = cusp::tv_decompose(DiscreteMeasure::from_vector(m1), DiscreteMeasure::from_vector(m2));
    EXPECT_DOUBLE_EQ(dec.rho, 0.5);
    EXPECT_DOUBLE_EQ(dec.nu0.weight_at(1.0), 1.0);
    EXPECT_DOUBLE_EQ(dec.nu1.weight_at(0.0), 1.0);
    EXPECT_DOUBLE_EQ(dec.nu2.weight_at(1.0), 1.0);
}

namespace {

Eigen::VectorXd random_prob(const cusp::rng::Stream& s, std::uint64_t& k, int n)
{
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = s.uniform2(k++)[0] < 0.3 ? 0.0 : s.uniform2(k++)[1];
    }
    if (v.sum() == 0.0) {
        v[0] = 1.0;
    }
    return v / v.sum();
}

}  // namespace

TEST(TvDecompose, PropertiesOnRandomInstances)
{
    for (std::uint64_t i = 0; i < 300; ++i) {
        const cusp::rng::Stream s(cusp::rng::StreamKey(42), i);
        std::uint64_t k = 0;
        const int n = 2 + static_cast<int>(i % 6);
        const auto m1 = random_prob(s, k, n), m2 = random_prob(s, k, n);
        const auto mu1 = DiscreteMeasure::from_vector(m1), mu2 = DiscreteMeasure::from_vector(m2);
        const auto dec = cusp::tv_decompose(mu1, mu2);
        const auto o = oracle::tv_decompose_dense(m1, m2);
        EXPECT_NEAR(dec.rho, o.rho, 1e-15);
        // the TV norm equals rho exactly
        EXPECT_EQ(cusp::tv_distance(mu1, mu2), dec.rho);
        EXPECT_LE(cusp::reconstruction_error(dec, mu1, 1), 1e-12);
        EXPECT_LE(cusp::reconstruction_error(dec, mu2, 2), 1e-12);
        if (!dec.rho_zero) {
            // nu1 and nu2 are mutually singular
            for (const auto& [loc, w] : dec.nu1.atoms()) {
                EXPECT_TRUE(w == 0.0 || dec.nu2.weight_at(loc) == 0.0);
            }
        }
    }
}

TEST(KernelContraction, IdentityKernel)
{
    const DiscreteMeasure a({{0.0, 0.2}, {1.0, 0.5}, {2.0, 0.3}}), b({{0.0, 0.6}, {1.0, 0.1}, {2.0, 0.3}});
    const auto r = cusp::kernel_contraction_check(Eigen::MatrixXd::Identity(3, 3), a, b);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.lhs, cusp::tv_distance(a, b), 1e-15);
}

TEST(KernelContraction, IdenticalRowsGiveZero)
{
    Eigen::MatrixXd P(3, 3);
    P << 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5;
    const DiscreteMeasure a({{0.0, 1.0}}), b({{2.0, 1.0}});
    const auto r = cusp::kernel_contraction_check(P, a, b);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.lhs, 0.0, 1e-15);
    EXPECT_NEAR(r.rhs, 0.0, 1e-15);
}

TEST(KernelContraction, RandomFiveStateKernels)
{
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const cusp::rng::Stream s(cusp::rng::StreamKey(7), i);
        std::uint64_t k = 0;
        Eigen::MatrixXd P(5, 5);
        for (int r = 0; r < 5; ++r) {
            P.row(r) = random_prob(s, k, 5).transpose();
        }
        const auto m1 = random_prob(s, k, 5), m2 = random_prob(s, k, 5);
        const auto r = cusp::kernel_contraction_check(P, DiscreteMeasure::from_vector(m1),
                                                      DiscreteMeasure::from_vector(m2));
        // brute force: both sides from dense vectors
        const auto o = oracle::tv_decompose_dense(m1, m2);
        const double lhs = oracle::tv_dense(P.transpose() * m1, P.transpose() * m2);
        const double rhs = o.rho * oracle::tv_dense(P.transpose() * o.nu1, P.transpose() * o.nu2);
        EXPECT_NEAR(lhs, rhs, 1e-12);
        EXPECT_NEAR(r.lhs, lhs, 1e-12);
        EXPECT_TRUE(r.pass) << "instance " << i << " error " << r.error;
    }
}
