#pragma once

// Mirror coupling of two copies of the diffusion and the staged tip-coupling
// experiment built on it.

#include <cstdint>
#include <optional>
#include <vector>

#include "cusp/dynamics.hpp"
#include "cusp/scaling.hpp"
#include "cusp/stats.hpp"

namespace cusp {

/// Householder reflection I - 2 w w^T / |w|^2 with w = sigma_tilde^-1 (x - x_tilde).
/// Throws degenerate_pair when |x - x_tilde| < threshold.
Mat2 mirror_matrix(const Mat2& sigma_tilde, const Vec2& x, const Vec2& x_tilde, double threshold = 1e-6);
Mat2 mirror_matrix(const Coefficients& c, const Vec2& x, const Vec2& x_tilde, double threshold = 1e-6);

struct CoupledPair {
    Vec2 z;
    Vec2 z_tilde;
};

/// Free-space Euler step of both copies driven by the same scaled noise n:
/// z' = z + b(z) dt + sigma(z) n, z~' = z~ + b(z~) dt + sigma(z~) K(z, z~) n.
CoupledPair coupled_step(const Coefficients& c, const Vec2& z, const Vec2& z_tilde, double dt, const Vec2& noise,
                         double threshold = 1e-6);

struct QConstReport {
    double sup_inverse = 0.0;     ///< sup |sigma(x)^-1|
    double sup_difference = 0.0;  ///< sup |sigma(x) - sigma(x~)|
    double margin = 0.0;          ///< 2 / sup_inverse - sup_difference
    bool pass = false;
};

/// Operator norms over all grid pairs.
QConstReport check_q_const(const Coefficients& c, const std::vector<Vec2>& grid);

/// n x n tensor grid over [lo1, hi1] x [lo2, hi2].
std::vector<Vec2> box_grid(double lo1, double hi1, double lo2, double hi2, int n);

struct Rect {
    double x1_lo, x1_hi, x2_lo, x2_hi;
    /// Open rectangle.
    [[nodiscard]] bool contains(const Vec2& x) const
    {
        return x.x() > x1_lo && x.x() < x1_hi && x.y() > x2_lo && x.y() < x2_hi;
    }
};

struct CouplingOptions {
    double dt = 1e-4;
    double threshold = 1e-6;                 ///< coupling distance
    std::optional<double> rho;               ///< stop when either copy leaves its start ball
    std::optional<double> separation_cap;    ///< stop when |z - z~| >= cap
    std::optional<Rect> region;              ///< stop when either copy leaves the open rectangle
    std::uint64_t step_budget = 100'000'000;
    std::uint64_t post_coupling_steps = 0;   ///< merged steps recorded after coupling
    bool record_full = false;
};

/// Stop reasons; several exit flags may be set by the same step.
struct CoupledRun {
    std::vector<Vec2> z_path;
    std::vector<Vec2> z_tilde_path;
    std::vector<double> times;
    bool coupled = false;
    std::optional<double> zeta;
    bool exit_z = false;        ///< z left its rho ball
    bool exit_z_tilde = false;  ///< z~ left its rho ball
    bool separated = false;
    bool left_region = false;
    std::uint64_t steps = 0;
};

/// Mirror-coupled run. Coupling is declared when the new separation is below
/// the threshold or the separation vector reverses (the copies crossed
/// within the step); the copies then merge at z'.
CoupledRun run_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde, const CouplingOptions& opt,
                        const rng::Stream& stream);
CoupledRun run_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde, const CouplingOptions& opt,
                        std::uint64_t seed);

struct CouplingEstimate {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double rate = 0.0;
    Interval wilson95;
};

/// Fraction of runs with zeta before either copy leaves its rho ball (or
/// before the separation cap, when set).
CouplingEstimate estimate_coupling(const Coefficients& c, const Vec2& x0, const Vec2& x0_tilde,
                                   const CouplingOptions& opt, std::size_t n_runs, rng::StreamKey key,
                                   unsigned threads = 1);

// ---------------------------------------------------------------------------

struct TipCouplingOptions {
    double epsilon0 = 0.25;
    double threshold_factor = 1e-6;  ///< coupling threshold = factor * q_{n+1}
    int blocks = 1;                  ///< 2 adds the block delta_n -> delta_{n-2}
    BatchOptions batch;
};

struct BlockReport {
    std::size_t n = 0;            ///< block runs delta_{n+2} -> delta_n
    std::size_t attempts = 0;
    std::size_t coupled = 0;      ///< coupled inside Q
    std::size_t both_in_I = 0;    ///< both arrivals at delta_{n+1} inside I^{eps0}
    std::size_t coupled_given_both = 0;
    std::size_t z_in_I = 0;
    std::size_t z_tilde_in_I = 0;
    double success_rate = 0.0;
    Interval success_wilson;
    double p0_hat = 0.0;          ///< coupled_given_both / both_in_I
    double eta_hat = 0.0;         ///< min of the two arrival hit rates
    double tv = 0.0;              ///< binned TV of exit fiber fractions at delta_n
    std::vector<double> exit_z;        ///< exit fiber fractions
    std::vector<double> exit_z_tilde;
};

struct TipCouplingReport {
    std::vector<BlockReport> blocks;
};

/// Stage 1: independent runs from (delta_{n+2}, x2) and (delta_{n+2}, x2~) to
/// delta_{n+1}. Stage 2: mirror coupling in
/// Q = (delta_{n+1} -+ q_{n+1}/4) x I^{eps0 + 1/2}_{n+1} with dt = c_dt q_{n+1}^2.
/// Stage 3: merged or independent continuation to delta_n. A second block
/// restarts from the exit points and runs to delta_{n-2}.
TipCouplingReport tip_coupling_experiment(const CuspDomain& d, const DirectionField& f, const Coefficients& c,
                                          const ScaleSequence& s, std::size_t n, double x2, double x2_tilde,
                                          std::size_t n_paths, std::uint64_t seed,
                                          const TipCouplingOptions& opt = {});

}  // namespace cusp
