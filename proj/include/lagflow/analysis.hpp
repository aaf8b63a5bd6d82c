#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lagflow/jko.hpp"

namespace lagflow {

/// One audited invariant. `worst` is the largest violation found (0 when the
/// invariant holds everywhere, including tolerance), `step` the step index of
/// the most critical case (-1 when inapplicable), `applicable` whether the
/// trajectory's model satisfies the invariant's hypotheses.
struct InvariantCheck {
    std::string name;
    double worst = 0.0;
    std::int64_t step = -1;
    bool pass = true;
    bool applicable = true;
};

struct AuditReport {
    std::vector<InvariantCheck> checks;
    bool pass() const;
    /// Lines "name,worst,step,pass" after a header, 17 significant digits.
    std::string to_csv() const;
};

/// Recomputes every provable step invariant from the stored states:
///   energy_dissipation    H(x^n) <= H(x^{n-1}) + 1e-10 * (1 + |H(x^{n-1})|)
///   energy_rate           tau*(1/k)*sum_i ctilde(d_i/tau) <= H(x^{n-1}) - H(x^n)
///                         + slack, ctilde(s) = s * c'(s)
///   dx_min_max            [v constant] extremes of delta move monotonically
///                         (1e-9 slack)
///   dx_max_convex_v       [convex non-constant v, quadratic cost] max delta
///                         non-increasing (1e-9 slack)
///   d2x_min_max           [relativistic cost, v constant] delta2 stays inside
///                         [min(min delta2^0, 0), max(max delta2^0, 0)] with
///                         1e-7 * k^2 slack
///   flux_limit            [relativistic] max_i |d_i|/tau < gamma strictly
///   hoelder_bound         [m = 1, v constant] (1/k)*sum_i |x_i^n2 - x_i^n1| <=
///                         (t2-t1+tau)^(1/p') * alpha^(-1/p) * (H(x^0)-Hbar)^(1/p)
///                         over all step pairs, 1e-8 relative slack
///   entropy_rate          [p-power, or relativistic with all speeds inside the
///                         envelope window] tau*(1/k)*sum_n sum_i |a_i^n|^{p'} <=
///                         beta^(1/(p-1)) * (H(x^0) - Hbar), 1e-8 relative slack
///   euler_lagrange        every step's velocities solve the optimality system
///                         to 10 * k * newton_tol in the dual slope
///   endpoints_pinned      x_0^n == a and x_k^n == b bitwise
/// Deterministic: identical inputs give identical reports.
AuditReport audit(const Trajectory& traj, const CostModel& c, const EnergyModel& e,
                  const JkoConfig& cfg);

/// Derivative-free reference minimizer of the step functional for k <= 6:
/// cyclic coordinate golden-section descent run from 20 random feasible
/// starts (fixed seed), best result returned. Independent of the Newton path.
IdfVector brute_force_step(const CostModel& c, const EnergyModel& e, double tau,
                           const IdfVector& x_prev);

enum class ConvergenceAxis { Grid, Timestep };

/// Fixed physical setup a convergence study refines.
struct ConvergenceScenario {
    double a, b;
    CostModel cost;
    EnergyModel energy;
    DensitySpec init;
    double floor = 1e-3;
    double t_end;
    double tau;     // held fixed on the grid axis
    std::size_t k;  // held fixed on the timestep axis
    double newton_tol = 0.0;
    int newton_max_iter = 100;
    double armijo_shrink = 0.5;
    double min_gap = 0.0;
};

struct ConvergenceLevel {
    double level;        // k (grid axis) or tau (timestep axis)
    double err_idf;      // L1 distance between IDFs at the comparison time
    double err_density;  // L1 distance between recovered densities
};

struct ConvergenceResult {
    ConvergenceAxis axis;
    std::vector<ConvergenceLevel> levels;
    double slope_idf = 0.0;      // log-log fit against the mesh parameter
    double slope_density = 0.0;  // (1/k on the grid axis, tau on the timestep axis)
    std::vector<std::string> warnings;  // e.g. zero-error levels excluded from the fit
};

/// Runs the scenario at each level and at the reference, measures final-time
/// errors against the reference run, and fits least-squares slopes of
/// log(error) against log(mesh parameter).
///
/// Grid axis: levels and reference are point counts; every level must divide
/// the reference (the reference IDF is restricted to the shared quantile
/// indices for the IDF error). Timestep axis: levels and reference are time
/// steps; each level must be an integer multiple of the reference step, runs
/// floor(t_end/tau) steps, and is compared with the reference state at its
/// own final time. The reference must be strictly finer than every level.
ConvergenceResult convergence_study(ConvergenceAxis axis, const ConvergenceScenario& scenario,
                                    std::span<const double> levels, double reference);

}  // namespace lagflow
