#pragma once

// Zoom ladder toward the tip, rescaling of path segments, and the limiting
// reflecting Brownian motion in the strip R x [L, L+1].

#include <cstdint>
#include <limits>
#include <vector>

#include "cusp/dynamics.hpp"
#include "cusp/stats.hpp"

namespace cusp {

/// deltas[0..n], widths[k] = deltas[k] - deltas[k+1] (exact), and
/// profile_widths[k] = (psi2 - psi1)(deltas[k]) as evaluated.
///
/// The next level is fl(delta - profile width). Because that subtraction
/// never loses more than half the level, the back difference is exact, so
/// using it as the width makes delta_n - delta_{n+1} = q_n hold with no
/// rounding at all. It differs from the evaluated profile width by at most
/// one rounding.
struct ScaleSequence {
    std::vector<double> deltas;
    std::vector<double> widths;
    std::vector<double> profile_widths;

    [[nodiscard]] std::size_t levels() const { return widths.size(); }
};

ScaleSequence scale_sequence(const CuspDomain& d, double delta0, int n_levels);

struct RescaledPath {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<double> local_time;
};

/// ((x1 - delta_{n+1}) / q_n, x2 / q_n) on the clock t / q_n^2.
RescaledPath rescale_segment(const PathRecord& p, const ScaleSequence& s, std::size_t n);

// ---------------------------------------------------------------------------

struct StripSpec {
    double L = -0.5;
    Mat2 sigma0 = Mat2::Identity();
    Vec2 dir_lower = Vec2(0.0, 1.0);
    Vec2 dir_upper = Vec2(0.0, -1.0);
    Vec2 drift = Vec2::Zero();

    [[nodiscard]] Mat2 cov0() const { return sigma0 * sigma0.transpose(); }
};

/// Strip limit of a cusp setup: L from the domain, sigma(0), and the tip
/// limits of the field.
StripSpec strip_from(const CuspDomain& d, const DirectionField& f, const Coefficients& c);

class StripRegion
{
  public:
    explicit StripRegion(const StripSpec& spec);

    [[nodiscard]] double lower(double) const { return L_; }
    [[nodiscard]] double upper(double) const { return L_ + 1.0; }
    [[nodiscard]] double width(double) const { return 1.0; }
    [[nodiscard]] bool has_tip() const { return false; }
    [[nodiscard]] bool contains(const Vec2& x) const { return x.y() >= L_ && x.y() <= L_ + 1.0; }
    [[nodiscard]] double tolerance() const { return 1e-12; }
    [[nodiscard]] Vec2 gamma_lower(double) const { return lower_; }
    [[nodiscard]] Vec2 gamma_upper(double) const { return upper_; }
    [[nodiscard]] Vec2 tip_direction() const { return tip_; }

  private:
    double L_;
    Vec2 lower_;
    Vec2 upper_;
    Vec2 tip_;
};

/// Constant coefficients, constant directions, dt = clamp(c_dt, dt_min,
/// dt_max) (the strip has unit width), no cap.
class StripModel
{
  public:
    StripModel(const StripSpec& spec, const StepControl& ctl) : region_(spec), spec_(spec), ctl_(ctl) {}

    [[nodiscard]] const StripRegion& region() const { return region_; }
    [[nodiscard]] Vec2 drift(const Vec2&) const { return spec_.drift; }
    [[nodiscard]] Mat2 sigma(const Vec2&) const { return spec_.sigma0; }
    [[nodiscard]] double dt(const Vec2&) const { return std::clamp(ctl_.c_dt, ctl_.dt_min, ctl_.dt_max); }
    [[nodiscard]] double cap() const { return std::numeric_limits<double>::infinity(); }

  private:
    StripRegion region_;
    StripSpec spec_;
    StepControl ctl_;
};

/// Step control for strip runs: same c_dt, no upper clamp.
StepControl strip_step_control(const StepControl& cusp_control);

PathRecord simulate_strip(const StripSpec& spec, const Vec2& x0, double stop_at_x1, const rng::Stream& stream,
                          const SimOptions& opt = {});
PathRecord simulate_strip(const StripSpec& spec, const Vec2& x0, double stop_at_x1, std::uint64_t seed,
                          const SimOptions& opt = {});

std::vector<ExitSample> strip_batch(const StripSpec& spec, const Vec2& x0, double stop_at_x1, std::size_t n_paths,
                                    rng::StreamKey key, const BatchOptions& opt = {});

// ---------------------------------------------------------------------------

/// Open interval of length epsilon * q_n centred at the fiber midpoint at delta_n.
Interval hitting_interval(const CuspDomain& d, const ScaleSequence& s, std::size_t n, double epsilon);

struct HittingStart {
    double fiber_fraction = 0.0;
    double x2 = 0.0;
    std::size_t hits = 0;
    std::size_t trials = 0;
    double estimate = 0.0;
    Interval wilson;
};

struct HittingEstimate {
    Interval interval;
    std::vector<HittingStart> starts;
    double eta_hat = 0.0;    ///< min over starts of the hit frequency
    double eta_lower = 0.0;  ///< min over starts of the Wilson lower bound
};

/// Starts on a uniform fiber grid at delta_{n+1} (endpoints included), run to
/// delta_n, count exits inside the hitting interval.
HittingEstimate estimate_hitting(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                 const ScaleSequence& s, std::size_t n, double epsilon, std::size_t n_paths,
                                 std::uint64_t seed, int grid_points = 9, double confidence = 0.99,
                                 const BatchOptions& opt = {});

struct LevelReport {
    std::size_t level = 0;
    double delta = 0.0;
    double q = 0.0;
    std::size_t n_paths = 0;
    double ks = 0.0;
    double ks_critical = 0.0;     ///< 5% two-sample threshold
    double mean_exit_time = 0.0;  ///< rescaled cusp exit time
    double mean_exit_time_strip = 0.0;
    double tv = 0.0;
};

struct ScalingStudy {
    std::vector<LevelReport> levels;
    double noise_floor_ks = 0.0;  ///< KS between two independent strip halves
    double noise_floor_tv = 0.0;
    StripSpec strip;
};

/// For each level n: cusp replicas from (delta_{n+1}, centreline) to delta_n,
/// compared through the exit fiber fraction with strip replicas from
/// (0, L + 1/2) to first coordinate 1. Cusp replicas share streams across
/// levels; one strip reference sample serves every level.
ScalingStudy scaling_convergence_study(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                       const ScaleSequence& s, const std::vector<std::size_t>& levels,
                                       std::size_t n_paths, std::uint64_t seed, const BatchOptions& opt = {});

}  // namespace cusp
