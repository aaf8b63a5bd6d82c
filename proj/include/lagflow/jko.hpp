#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lagflow/cost.hpp"
#include "lagflow/energy.hpp"
#include "lagflow/grid.hpp"

namespace lagflow {

/// Raised when a step vector is infeasible (non-monotone positions or a
/// relativistic displacement at/over the speed limit).
struct InfeasibleError : std::runtime_error {
    std::size_t index;
    InfeasibleError(const std::string& what, std::size_t i)
        : std::runtime_error(what), index(i) {}
};

/// Raised when the inner Newton iteration fails to reach tolerance.
struct NewtonError : std::runtime_error {
    double last_grad_norm;
    NewtonError(const std::string& what, double g)
        : std::runtime_error(what), last_grad_norm(g) {}
};

/// Implicit-step parameters. newton_tol <= 0 selects the automatic
/// tolerance 1e-8 * k * max(1, |H(x_prev)|), resolved per step.
struct JkoConfig {
    double tau = 0.01;         // time step, > 0
    double t_end = 1.0;        // final time; t_end / tau integral within 1e-9
    double newton_tol = 0.0;   // sup-norm gradient tolerance (<= 0: automatic)
    int newton_max_iter = 100;
    double armijo_shrink = 0.5;  // backtracking factor, in (0, 1)
    double min_gap = 0.0;        // hard lower bound kept on position gaps

    void validate() const;
    /// round(t_end / tau); throws unless integral within 1e-9 relative.
    std::size_t num_steps() const;
    double effective_tol(std::size_t k, double energy_prev) const;
};

/// Per-step diagnostics.
struct StepReport {
    std::size_t n = 0;      // step index, 1-based
    double t = 0.0;         // n * tau
    double energy = 0.0;    // H(x^n)
    double transport = 0.0; // tau * (1/k) * sum_i c((x_i^n - x_i^{n-1}) / tau)
    double min_dx = 0.0, max_dx = 0.0;    // extremes of delta(x^n)
    double min_d2x = 0.0, max_d2x = 0.0;  // extremes of delta2(x^n)
    double max_speed = 0.0;  // max_i |x_i^n - x_i^{n-1}| / tau
    int newton_iters = 0;
};

/// Movement functional of one implicit step:
///   Phi(x) = tau * (1/k) * sum_{i=0}^{k} c((x_i - xprev_i)/tau)
///          + (1/k) * sum_{i=0}^{k-1} h_X(k*(x_{i+1}-x_i))
///          + (1/k) * sum_{i=0}^{k} v(x_i).
/// Returns +inf when x is infeasible (a non-positive gap, or a relativistic
/// displacement with |x_i - xprev_i| >= gamma * tau).
double phi(const CostModel& c, const EnergyModel& e, double tau, const IdfVector& x_prev,
           const IdfVector& x);
double phi_raw(const CostModel& c, const EnergyModel& e, double tau,
               std::span<const double> x_prev, std::span<const double> x);

/// Gradient of Phi in the k-1 interior positions, j = 1..k-1:
///   g_j = (1/k) c'((x_j - xprev_j)/tau) + h_X'(delta_{j-1}) - h_X'(delta_j)
///       + (1/k) v'(x_j).
/// Throws InfeasibleError (naming the first bad index) when x is not
/// strictly feasible.
std::vector<double> grad_phi(const CostModel& c, const EnergyModel& e, double tau,
                             const IdfVector& x_prev, const IdfVector& x);

/// Symmetric tridiagonal matrix: diag has order n, off the n-1 couplings.
struct Tridiagonal {
    std::vector<double> diag;
    std::vector<double> off;
};

/// Hessian of Phi in the interior positions (symmetric positive definite
/// tridiagonal on the feasible set):
///   diag_j = (1/(k*tau)) c''((x_j-xprev_j)/tau) + k*(h_X''(delta_{j-1}) +
///            h_X''(delta_j)) + (1/k) v''(x_j),
///   off_j  = -k * h_X''(delta_j).
/// For p_power with p < 2 the c'' argument is clamped away from 0 at
/// 1e-3 * tau to keep the diagonal finite.
Tridiagonal hess_phi(const CostModel& c, const EnergyModel& e, double tau,
                     const IdfVector& x_prev, const IdfVector& x);

/// Attainable-gradient resolution at x: the largest change of each interior
/// gradient component reachable by one-ulp moves of the positions (row sums
/// of |Hessian| times the local float spacing, safety factor 8). The Newton
/// iteration treats a component as converged once it falls below the
/// tolerance plus this floor; optimality audits must allow the same margin.
std::vector<double> gradient_floor(const CostModel& c, const EnergyModel& e, double tau,
                                   const IdfVector& x_prev, const IdfVector& x);

/// Thomas solve of the symmetric tridiagonal system (no pivoting; relies on
/// positive definiteness). Throws std::runtime_error on a non-positive or
/// non-finite pivot.
std::vector<double> solve_tridiagonal(std::span<const double> diag, std::span<const double> off,
                                      std::span<const double> rhs);

/// One implicit step: damped Newton on the interior positions starting from
/// x_prev, backtracking (factor armijo_shrink) until the candidate keeps all
/// gaps > min_gap, respects the relativistic displacement bound, and does
/// not increase Phi beyond a rounding allowance of 1e-14 * (1 + |Phi|).
/// Stops when every gradient component falls below the (possibly automatic)
/// tolerance plus its attainable resolution (gradient_floor).
std::pair<IdfVector, StepReport> jko_step(const CostModel& c, const EnergyModel& e,
                                          const JkoConfig& cfg, const IdfVector& x_prev);

struct Trajectory {
    std::vector<IdfVector> states;    // size N+1, states[0] = initial
    std::vector<StepReport> reports;  // size N
};

using StepObserver = std::function<void(const StepReport&)>;

/// num_steps() implicit steps from x0; the observer (if any) fires once per
/// completed step. Solver failures are rethrown with the step index attached.
Trajectory evolve(const CostModel& c, const EnergyModel& e, const JkoConfig& cfg,
                  const IdfVector& x0, const StepObserver& observer = {});

}  // namespace lagflow
