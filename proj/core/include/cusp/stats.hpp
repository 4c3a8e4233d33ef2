#pragma once

// Empirical laws, distances between them, and the exact total-variation
// decomposition of two finite discrete measures.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cusp {

class EmpiricalDistribution
{
  public:
    /// Sorts the samples. Requires at least one finite sample.
    explicit EmpiricalDistribution(std::vector<double> samples);

    [[nodiscard]] const std::vector<double>& samples() const { return samples_; }
    [[nodiscard]] std::size_t size() const { return samples_.size(); }
    [[nodiscard]] double min() const { return samples_.front(); }
    [[nodiscard]] double max() const { return samples_.back(); }
    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;  ///< unbiased; 0 for a single sample
    [[nodiscard]] double standard_error() const;

    /// Right-continuous ECDF, P(X <= x).
    [[nodiscard]] double cdf(double x) const;
    /// Lower empirical quantile, p in [0, 1].
    [[nodiscard]] double quantile(double p) const;

  private:
    std::vector<double> samples_;
};

/// sup_x |F_a(x) - F_b(x)|.
double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

/// Asymptotic two-sample KS rejection threshold at level alpha:
/// sqrt(-ln(alpha/2)/2) * sqrt((n_a + n_b) / (n_a n_b)).
double ks_critical_value(std::size_t n_a, std::size_t n_b, double alpha);

/// Half L1 distance between bin frequencies over the joint sample range.
/// Without `bins` the count is ceil((n_a + n_b)^(1/3)).
double tv_binned(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                 std::optional<int> bins = std::nullopt);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Two-sided standard normal quantile z with P(|Z| <= z) = confidence.
double normal_quantile_two_sided(double confidence);

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double confidence);

/// Percentile bootstrap interval for the mean, resampling with the counter RNG.
Interval bootstrap_mean_interval(const EmpiricalDistribution& d, int resamples, std::uint64_t seed,
                                 double confidence);

// ---------------------------------------------------------------------------

class DiscreteMeasure
{
  public:
    using Atom = std::pair<double, double>;  ///< (location, weight)

    DiscreteMeasure() = default;
    /// Sorts atoms by location. Weights must be nonnegative, locations
    /// distinct and the total within 1e-15 per atom of 1.
    explicit DiscreteMeasure(std::vector<Atom> atoms);

    /// Probability vector over states 0..n-1.
    static DiscreteMeasure from_vector(const Eigen::VectorXd& p);

    [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
    [[nodiscard]] double weight_at(double location) const;
    [[nodiscard]] double total() const;
    [[nodiscard]] Eigen::VectorXd to_vector(std::size_t n_states) const;

  private:
    std::vector<Atom> atoms_;
};

/// Half the L1 distance, over the union of supports.
double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// mu_i = (1 - rho) nu0 + rho nu_i with nu1, nu2 mutually singular, built from
/// the pointwise minimum of the two weight functions.
struct TvDecomposition {
    double rho = 0.0;
    DiscreteMeasure nu0;
    DiscreteMeasure nu1;
    DiscreteMeasure nu2;
    bool rho_zero = false;  ///< nu1 = nu2 = nu0 by convention
    bool rho_one = false;   ///< nu0 undefined, set equal to mu1
};

TvDecomposition tv_decompose(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2);

/// Signed difference (1-rho) nu0 + rho nu_i - mu_i as a TV norm; 0 when exact.
double reconstruction_error(const TvDecomposition& dec, const DiscreteMeasure& mu, int which);

struct ContractionReport {
    double lhs = 0.0;  ///< |P mu1 - P mu2|_TV
    double rhs = 0.0;  ///< |mu1 - mu2|_TV * |P nu1 - P nu2|_TV
    double error = 0.0;
    bool pass = false;
};

/// Both sides of the kernel identity on a finite state space; measures live on
/// the row indices of the row-stochastic matrix P. Equality tolerance 1e-12.
ContractionReport kernel_contraction_check(const Eigen::MatrixXd& P, const DiscreteMeasure& mu1,
                                           const DiscreteMeasure& mu2);

}  // namespace cusp
