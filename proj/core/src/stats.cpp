#include "cusp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cusp/error.hpp"
#include "cusp/rng.hpp"

namespace cusp {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples) : samples_(std::move(samples))
{
    require(!samples_.empty(), "empirical distribution needs at least one sample");
    for (double v : samples_) {
        require(std::isfinite(v), "empirical distribution samples must be finite");
    }
    std::sort(samples_.begin(), samples_.end());
}

double EmpiricalDistribution::mean() const
{
    // Kahan summation: sample files are compared byte for byte, so keep the
    // aggregate independent of accumulated rounding as far as practical
    double sum = 0.0, comp = 0.0;
    for (double v : samples_) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::variance() const
{
    const std::size_t n = samples_.size();
    if (n < 2) {
        return 0.0;
    }
    const double m = mean();
    double ss = 0.0;
    for (double v : samples_) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(n - 1);
}

double EmpiricalDistribution::standard_error() const
{
    return std::sqrt(variance() / static_cast<double>(samples_.size()));
}

double EmpiricalDistribution::cdf(double x) const
{
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::quantile(double p) const
{
    require(p >= 0.0 && p <= 1.0, "quantile level must be in [0, 1]");
    const auto n = samples_.size();
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    return samples_[k == 0 ? 0 : std::min(k - 1, n - 1)];
}

double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b)
{
    const auto& xa = a.samples();
    const auto& xb = b.samples();
    const double na = static_cast<double>(xa.size());
    const double nb = static_cast<double>(xb.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < xa.size() && j < xb.size()) {
        const double v = std::min(xa[i], xb[j]);
        while (i < xa.size() && xa[i] == v) {
            ++i;
        }
        while (j < xb.size() && xb[j] == v) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical_value(std::size_t n_a, std::size_t n_b, double alpha)
{
    require(n_a > 0 && n_b > 0 && alpha > 0.0 && alpha < 1.0, "invalid KS threshold arguments");
    const double c = std::sqrt(-0.5 * std::log(0.5 * alpha));
    const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
    return c * std::sqrt((na + nb) / (na * nb));
}

double tv_binned(const EmpiricalDistribution& a, const EmpiricalDistribution& b, std::optional<int> bins)
{
    const double lo = std::min(a.min(), b.min());
    const double hi = std::max(a.max(), b.max());
    if (!(hi > lo)) {
        return 0.0;
    }
    const int k = bins ? *bins
                       : static_cast<int>(std::ceil(std::cbrt(static_cast<double>(a.size() + b.size()))));
    require(k >= 1, "bin count must be positive");

    auto histogram = [&](const EmpiricalDistribution& d) {
        std::vector<double> h(static_cast<std::size_t>(k), 0.0);
        // bin index from the affine position so the estimate is invariant
        // under common affine rescaling of both samples
        for (double v : d.samples()) {
            auto idx = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * k));
            idx = std::clamp<std::ptrdiff_t>(idx, 0, k - 1);
            h[static_cast<std::size_t>(idx)] += 1.0;
        }
        for (double& x : h) {
            x /= static_cast<double>(d.size());
        }
        return h;
    };
    const auto ha = histogram(a);
    const auto hb = histogram(b);
    double l1 = 0.0;
    for (std::size_t i = 0; i < ha.size(); ++i) {
        l1 += std::abs(ha[i] - hb[i]);
    }
    return std::min(1.0, 0.5 * l1);
}

double normal_quantile_two_sided(double confidence)
{
    require(confidence > 0.0 && confidence < 1.0, "confidence must be in (0, 1)");
    // P(|Z| <= z) = erf(z / sqrt 2); solve by bisection
    double lo = 0.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::erf(mid / std::sqrt(2.0)) < confidence) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double confidence)
{
    require(trials > 0 && successes <= trials, "wilson interval needs 0 <= successes <= trials, trials > 0");
    const double z = normal_quantile_two_sided(confidence);
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

Interval bootstrap_mean_interval(const EmpiricalDistribution& d, int resamples, std::uint64_t seed,
                                 double confidence)
{
    require(resamples >= 10, "bootstrap needs at least 10 resamples");
    const auto& x = d.samples();
    const auto n = x.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        const rng::Stream stream(rng::StreamKey(seed), static_cast<std::uint64_t>(r));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; i += 2) {
            const auto u = stream.uniform2(i / 2);
            sum += x[std::min(n - 1, static_cast<std::size_t>(u[0] * static_cast<double>(n)))];
            if (i + 1 < n) {
                sum += x[std::min(n - 1, static_cast<std::size_t>(u[1] * static_cast<double>(n)))];
            }
        }
        means[static_cast<std::size_t>(r)] = sum / static_cast<double>(n);
    }
    const EmpiricalDistribution boot(std::move(means));
    const double tail = 0.5 * (1.0 - confidence);
    return {boot.quantile(tail), boot.quantile(1.0 - tail)};
}

// ---------------------------------------------------------------------------

DiscreteMeasure::DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms))
{
    require(!atoms_.empty(), "discrete measure needs at least one atom");
    std::sort(atoms_.begin(), atoms_.end());
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        require(atoms_[i].second >= 0.0 && std::isfinite(atoms_[i].second), "atom weights must be nonnegative");
        require(i == 0 || atoms_[i].first != atoms_[i - 1].first, "atom locations must be distinct");
        total += atoms_[i].second;
    }
    require(std::abs(total - 1.0) <= 1e-15 * static_cast<double>(atoms_.size()),
            "discrete measure weights must sum to 1");
}

DiscreteMeasure DiscreteMeasure::from_vector(const Eigen::VectorXd& p)
{
    std::vector<Atom> atoms;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        atoms.emplace_back(static_cast<double>(i), p[i]);
    }
    return DiscreteMeasure(std::move(atoms));
}

double DiscreteMeasure::weight_at(double location) const
{
    const auto it = std::lower_bound(atoms_.begin(), atoms_.end(), location,
                                     [](const Atom& a, double v) { return a.first < v; });
    return it != atoms_.end() && it->first == location ? it->second : 0.0;
}

double DiscreteMeasure::total() const
{
    double t = 0.0;
    for (const auto& a : atoms_) {
        t += a.second;
    }
    return t;
}

Eigen::VectorXd DiscreteMeasure::to_vector(std::size_t n_states) const
{
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_states));
    for (const auto& [loc, w] : atoms_) {
        const auto i = static_cast<Eigen::Index>(loc);
        require(static_cast<double>(i) == loc && i >= 0 && i < v.size(), "atom is not a state index");
        v[i] = w;
    }
    return v;
}

namespace {

// Union of supports with both weight functions.
std::map<double, std::pair<double, double>> joint(const DiscreteMeasure& a, const DiscreteMeasure& b)
{
    std::map<double, std::pair<double, double>> m;
    for (const auto& [loc, w] : a.atoms()) {
        m[loc].first += w;
    }
    for (const auto& [loc, w] : b.atoms()) {
        m[loc].second += w;
    }
    return m;
}

// Bypasses the normalization check for the intermediate signed pieces.
DiscreteMeasure normalized(std::vector<DiscreteMeasure::Atom> atoms, double mass)
{
    std::vector<DiscreteMeasure::Atom> kept;
    for (auto& [loc, w] : atoms) {
        if (w > 0.0) {
            kept.emplace_back(loc, w / mass);
        }
    }
    // absorb the last rounding residue into the largest atom
    double total = 0.0;
    for (const auto& a : kept) {
        total += a.second;
    }
    auto largest = std::max_element(kept.begin(), kept.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; });
    largest->second += 1.0 - total;
    return DiscreteMeasure(std::move(kept));
}

}  // namespace

double tv_distance(const DiscreteMeasure& a, const DiscreteMeasure& b)
{
    double l1 = 0.0;
    for (const auto& [loc, w] : joint(a, b)) {
        l1 += std::abs(w.first - w.second);
    }
    return 0.5 * l1;
}

TvDecomposition tv_decompose(const DiscreteMeasure& mu1, const DiscreteMeasure& mu2)
{
    std::vector<DiscreteMeasure::Atom> common, only1, only2;
    double overlap = 0.0, excess1 = 0.0, excess2 = 0.0, l1 = 0.0;
    for (const auto& [loc, w] : joint(mu1, mu2)) {
        const double m = std::min(w.first, w.second);
        common.emplace_back(loc, m);
        only1.emplace_back(loc, w.first - m);
        only2.emplace_back(loc, w.second - m);
        overlap += m;
        excess1 += w.first - m;
        excess2 += w.second - m;
        // same terms and order as tv_distance, so rho matches it bit for bit
        l1 += (w.first - m) + (w.second - m);
    }

    TvDecomposition out;
    out.rho = 0.5 * l1;
    if (out.rho <= 0.0) {
        out.rho = 0.0;
        out.rho_zero = true;
        out.nu0 = mu1;
        out.nu1 = mu1;
        out.nu2 = mu1;
        return out;
    }
    out.nu1 = normalized(std::move(only1), excess1);
    out.nu2 = normalized(std::move(only2), excess2);
    if (overlap <= 0.0) {
        out.rho = 1.0;
        out.rho_one = true;
        out.nu0 = mu1;
    } else {
        out.nu0 = normalized(std::move(common), overlap);
    }
    return out;
}

double reconstruction_error(const TvDecomposition& dec, const DiscreteMeasure& mu, int which)
{
    require(which == 1 || which == 2, "which must be 1 or 2");
    const DiscreteMeasure& nu = which == 1 ? dec.nu1 : dec.nu2;
    std::map<double, double> diff;
    for (const auto& [loc, w] : dec.nu0.atoms()) {
        diff[loc] += (1.0 - dec.rho) * w;
    }
    for (const auto& [loc, w] : nu.atoms()) {
        diff[loc] += dec.rho * w;
    }
    for (const auto& [loc, w] : mu.atoms()) {
        diff[loc] -= w;
    }
    double l1 = 0.0;
    for (const auto& [loc, d] : diff) {
        l1 += std::abs(d);
    }
    return 0.5 * l1;
}

ContractionReport kernel_contraction_check(const Eigen::MatrixXd& P, const DiscreteMeasure& mu1,
                                           const DiscreteMeasure& mu2)
{
    require(P.rows() == P.cols() && P.rows() > 0, "kernel must be a nonempty square matrix");
    const auto n = static_cast<std::size_t>(P.rows());
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        require((P.row(i).array() >= 0.0).all() && std::abs(P.row(i).sum() - 1.0) <= 1e-12,
                "kernel rows must be probability vectors");
    }
    auto push = [&](const DiscreteMeasure& m) -> Eigen::VectorXd { return P.transpose() * m.to_vector(n); };
    auto tv = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); };

    const auto dec = tv_decompose(mu1, mu2);
    ContractionReport r;
    r.lhs = tv(push(mu1), push(mu2));
    r.rhs = dec.rho_zero ? 0.0 : tv_distance(mu1, mu2) * tv(push(dec.nu1), push(dec.nu2));
    r.error = std::abs(r.lhs - r.rhs);
    r.pass = r.error <= 1e-12;
    return r;
}

}  // namespace cusp
