#include "lagflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace lagflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double t : v) m = std::max(m, std::fabs(t));
    return m;
}

// c''((x_j - xprev_j)/tau) with the p < 2 clamp keeping the diagonal finite
// at zero displacement (c'' blows up there for sub-quadratic powers).
double transport_curvature(const CostModel& c, double s, double tau) {
    if (c.kind == CostKind::PPower && c.p < 2.0) {
        const double floor = 1e-3 * tau;
        const double as = std::max(std::fabs(s), floor);
        return (c.p - 1.0) * std::pow(as, c.p - 2.0);
    }
    return cost_second(c, s);
}

// First strictly-infeasible index of x relative to x_prev, or npos.
// Checks gaps > min_gap and, for the relativistic cost, |d_i| < gamma*tau.
constexpr std::size_t kFeasible = static_cast<std::size_t>(-1);

std::size_t first_infeasible(const CostModel& c, double tau, double min_gap,
                             std::span<const double> xp, std::span<const double> x,
                             bool* gap_violation = nullptr) {
    const std::size_t k = x.size() - 1;
    for (std::size_t i = 0; i < k; ++i) {
        if (!(x[i + 1] - x[i] > min_gap)) {
            if (gap_violation) *gap_violation = true;
            return i;
        }
    }
    if (c.kind == CostKind::Relativistic) {
        const double cap = c.gamma * tau;
        for (std::size_t i = 0; i <= k; ++i) {
            if (!(std::fabs(x[i] - xp[i]) < cap)) {
                if (gap_violation) *gap_violation = false;
                return i;
            }
        }
    }
    return kFeasible;
}

double transport_term(const CostModel& c, double tau, std::span<const double> xp,
                      std::span<const double> x) {
    const std::size_t k = x.size() - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double v = cost_value(c, (x[i] - xp[i]) / tau);
        if (!std::isfinite(v)) return kInf;
        sum += v;
    }
    return tau * sum / static_cast<double>(k);
}

std::vector<double> grad_raw(const CostModel& c, const EnergyModel& e, double tau,
                             std::span<const double> xp, std::span<const double> x) {
    const std::size_t k = x.size() - 1;
    const double kd = static_cast<double>(k);
    // h_X'(delta_i) for all k cells
    std::vector<double> hp(k);
    for (std::size_t i = 0; i < k; ++i) hp[i] = -std::pow(kd * (x[i + 1] - x[i]), -e.m);
    std::vector<double> g(k - 1);
    const bool with_pot = !e.potential.is_constant();
    for (std::size_t j = 1; j < k; ++j) {
        double gj = cost_prime(c, (x[j] - xp[j]) / tau) / kd + hp[j - 1] - hp[j];
        if (with_pot) gj += e.potential.prime(x[j]) / kd;
        g[j - 1] = gj;
    }
    return g;
}

Tridiagonal hess_raw(const CostModel& c, const EnergyModel& e, double tau,
                     std::span<const double> xp, std::span<const double> x) {
    const std::size_t k = x.size() - 1;
    const double kd = static_cast<double>(k);
    std::vector<double> h2(k);
    for (std::size_t i = 0; i < k; ++i) h2[i] = e.m * std::pow(kd * (x[i + 1] - x[i]), -e.m - 1.0);
    Tridiagonal H;
    H.diag.resize(k - 1);
    H.off.resize(k - 2);
    const bool with_pot = !e.potential.is_constant();
    for (std::size_t j = 1; j < k; ++j) {
        double d = transport_curvature(c, (x[j] - xp[j]) / tau, tau) / (kd * tau) +
                   kd * (h2[j - 1] + h2[j]);
        if (with_pot) d += e.potential.second(x[j]) / kd;
        H.diag[j - 1] = d;
        if (j < k - 1) H.off[j - 1] = -kd * h2[j];
    }
    return H;
}

void check_shapes(std::span<const double> xp, std::span<const double> x) {
    if (xp.size() != x.size() || x.size() < 2)
        throw std::invalid_argument("jko: state vectors must share a size >= 2");
}

// Largest change of each interior gradient component reachable by one-ulp
// moves of the positions: row sums of |Hessian| weighted by the positions'
// local float spacing (safety factor 8). For sub-quadratic powers the kink
// of c' at zero displacement adds (2/k)|c'(quantum/tau)|: the smallest
// representable nonzero displacement already carries that much transport
// gradient, so components at the kink cannot be steered below it. No
// tolerance under this floor is attainable, however many iterations run.
std::vector<double> floor_raw(const CostModel& c, double tau, const Tridiagonal& H,
                              std::span<const double> xp, std::span<const double> x) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const std::size_t n = H.diag.size();
    const double kd = static_cast<double>(x.size() - 1);
    const bool kink = c.kind == CostKind::PPower && c.p < 2.0;
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j) {
        double row = H.diag[j] * std::fabs(x[j + 1]);
        if (j > 0) row += std::fabs(H.off[j - 1]) * std::fabs(x[j]);
        if (j + 1 < n) row += std::fabs(H.off[j]) * std::fabs(x[j + 2]);
        f[j] = 8.0 * eps * row;
        if (kink) {
            const double quantum = 2.0 * eps * std::max(std::fabs(x[j + 1]), std::fabs(xp[j + 1]));
            f[j] += 2.0 / kd * cost_prime(c, quantum / tau);
        }
    }
    return f;
}

bool within_floor(std::span<const double> g, const CostModel& c, double tau, const Tridiagonal& H,
                  std::span<const double> xp, std::span<const double> x, double tol) {
    const std::vector<double> f = floor_raw(c, tau, H, xp, x);
    for (std::size_t j = 0; j < g.size(); ++j)
        if (std::fabs(g[j]) > tol + f[j]) return false;
    return true;
}

}  // namespace

void JkoConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("JkoConfig: tau must be positive");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw std::invalid_argument("JkoConfig: t_end must be positive");
    num_steps();  // enforces integrality
    if (newton_max_iter < 1) throw std::invalid_argument("JkoConfig: newton_max_iter must be >= 1");
    if (!(armijo_shrink > 0.0) || !(armijo_shrink < 1.0))
        throw std::invalid_argument("JkoConfig: armijo_shrink must lie in (0, 1)");
    if (!(min_gap >= 0.0)) throw std::invalid_argument("JkoConfig: min_gap must be >= 0");
    if (!std::isfinite(newton_tol)) throw std::invalid_argument("JkoConfig: newton_tol not finite");
}

std::size_t JkoConfig::num_steps() const {
    const double ratio = t_end / tau;
    const double n = std::round(ratio);
    if (!(n >= 1.0) || std::fabs(ratio - n) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("JkoConfig: t_end must be an integer multiple of tau");
    return static_cast<std::size_t>(n);
}

double JkoConfig::effective_tol(std::size_t k, double energy_prev) const {
    if (newton_tol > 0.0) return newton_tol;
    return 1e-8 * static_cast<double>(k) * std::max(1.0, std::fabs(energy_prev));
}

double phi_raw(const CostModel& c, const EnergyModel& e, double tau, std::span<const double> xp,
               std::span<const double> x) {
    check_shapes(xp, x);
    if (c.kind == CostKind::Relativistic) {
        const double cap = c.gamma * tau;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (std::fabs(x[i] - xp[i]) >= cap) return kInf;
    }
    const double energy = total_energy_raw(e, x);
    if (!std::isfinite(energy)) return kInf;
    return transport_term(c, tau, xp, x) + energy;
}

double phi(const CostModel& c, const EnergyModel& e, double tau, const IdfVector& x_prev,
           const IdfVector& x) {
    return phi_raw(c, e, tau, x_prev.values(), x.values());
}

std::vector<double> grad_phi(const CostModel& c, const EnergyModel& e, double tau,
                             const IdfVector& x_prev, const IdfVector& x) {
    check_shapes(x_prev.values(), x.values());
    bool gap = false;
    const std::size_t bad = first_infeasible(c, tau, 0.0, x_prev.values(), x.values(), &gap);
    if (bad != kFeasible)
        throw InfeasibleError(std::string("grad_phi: ") +
                                  (gap ? "non-positive gap" : "displacement at speed limit") +
                                  " at index " + std::to_string(bad),
                              bad);
    return grad_raw(c, e, tau, x_prev.values(), x.values());
}

Tridiagonal hess_phi(const CostModel& c, const EnergyModel& e, double tau,
                     const IdfVector& x_prev, const IdfVector& x) {
    check_shapes(x_prev.values(), x.values());
    bool gap = false;
    const std::size_t bad = first_infeasible(c, tau, 0.0, x_prev.values(), x.values(), &gap);
    if (bad != kFeasible)
        throw InfeasibleError(std::string("hess_phi: ") +
                                  (gap ? "non-positive gap" : "displacement at speed limit") +
                                  " at index " + std::to_string(bad),
                              bad);
    return hess_raw(c, e, tau, x_prev.values(), x.values());
}

std::vector<double> gradient_floor(const CostModel& c, const EnergyModel& e, double tau,
                                   const IdfVector& x_prev, const IdfVector& x) {
    return floor_raw(c, tau, hess_phi(c, e, tau, x_prev, x), x_prev.values(), x.values());
}

std::vector<double> solve_tridiagonal(std::span<const double> diag, std::span<const double> off,
                                      std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || off.size() + 1 != n || rhs.size() != n)
        throw std::invalid_argument("solve_tridiagonal: inconsistent sizes");
    std::vector<double> cp(n > 1 ? n - 1 : 0), dp(n);
    double piv = diag[0];
    if (!(piv > 0.0) || !std::isfinite(piv))
        throw std::runtime_error("solve_tridiagonal: non-positive pivot at row 0 "
                                 "(matrix not positive definite)");
    if (n > 1) cp[0] = off[0] / piv;
    dp[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - off[i - 1] * cp[i - 1];
        if (!(piv > 0.0) || !std::isfinite(piv))
            throw std::runtime_error("solve_tridiagonal: non-positive pivot at row " +
                                     std::to_string(i) + " (matrix not positive definite)");
        if (i + 1 < n) cp[i] = off[i] / piv;
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / piv;
    }
    std::vector<double> sol(n);
    sol[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) sol[i] = dp[i] - cp[i] * sol[i + 1];
    return sol;
}

std::pair<IdfVector, StepReport> jko_step(const CostModel& c, const EnergyModel& e,
                                          const JkoConfig& cfg, const IdfVector& x_prev) {
    cfg.validate();
    const std::size_t k = x_prev.k();
    if (k < 2) throw std::invalid_argument("jko_step: need k >= 2 (at least one interior point)");
    const double tau = cfg.tau;

    std::vector<double> xp(x_prev.values().begin(), x_prev.values().end());
    {
        bool gap = false;
        const std::size_t bad = first_infeasible(c, tau, cfg.min_gap, xp, xp, &gap);
        if (bad != kFeasible)
            throw InfeasibleError("jko_step: previous state infeasible at index " +
                                      std::to_string(bad),
                                  bad);
    }

    const double energy_prev = total_energy_raw(e, xp);
    const double tol = cfg.effective_tol(k, energy_prev);

    std::vector<double> x = xp;       // current iterate
    double phi_cur = energy_prev;     // Phi(x_prev) = H(x_prev): zero displacement
    std::vector<double> g = grad_raw(c, e, tau, xp, x);
    double gnorm = sup_norm(g);
    int iters = 0;

    std::vector<double> cand(x.size());
    const bool kink = c.kind == CostKind::PPower && c.p < 2.0;
    // Sub-quadratic bookkeeping. `snapped` marks coordinates caught in a
    // terminal limit cycle of the clamped model: they crossed the kink during
    // an iteration whose every displacement was already below the clamp
    // scale, so the quadratic model has nothing left to say about them.
    // `implicit_dir` marks the ones steered by the exact scalar solve in the
    // current iteration.
    const double steep = 1e-3 * tau * tau;  // curvature clamp scale in displacement
    std::vector<unsigned char> snapped(x.size(), 0);
    std::vector<unsigned char> snap_trial(x.size(), 0);
    std::vector<unsigned char> implicit_dir(x.size(), 0);
    std::vector<unsigned char> flip_intent(x.size(), 0);
    std::vector<unsigned char> flip_count(x.size(), 0);
    while (gnorm > tol) {
        const Tridiagonal H = hess_raw(c, e, tau, xp, x);
        // components the float grid cannot improve count as converged
        if (within_floor(g, c, tau, H, xp, x, tol)) break;
        if (iters >= cfg.newton_max_iter)
            throw NewtonError("jko_step: no convergence after " +
                                  std::to_string(cfg.newton_max_iter) +
                                  " Newton iterations (|grad| = " + std::to_string(gnorm) + ")",
                              gnorm);
        // sub-quadratic powers: below the curvature clamp the quadratic model
        // understates c'' by orders of magnitude, so Newton components there
        // overshoot and cross back over the kink in a limit cycle. A
        // coordinate marked as cycling is decoupled from the collective solve
        // -- its residual is removed from the right-hand side and its row is
        // disconnected, so the neighbors no longer get recruited against a
        // curvature the model misstates -- and is steered, while its
        // displacement stays below the clamp scale, by the exact scalar
        // problem in its own coordinate: the root in w of
        //   psi(w) = g_j + (c'((d+w)/tau) - c'(d/tau))/k + q_j w,
        // q_j the entropy/potential diagonal. psi is strictly increasing, so
        // a bracketed bisection with the true (unclamped) slope is stable at
        // every scale. Unmarked coordinates keep the full Newton component,
        // which propagates collective motion through the whole chain.
        std::vector<double> rhs(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) rhs[j] = -g[j];
        std::vector<double> off = H.off;
        bool any_implicit = false;
        if (kink) {
            for (std::size_t j = 1; j < k; ++j) {
                implicit_dir[j] = 0;
                if (!snapped[j] || std::fabs(x[j] - xp[j]) >= steep) continue;
                implicit_dir[j] = 1;
                any_implicit = true;
                rhs[j - 1] = 0.0;
                if (j >= 2) off[j - 2] = 0.0;
                if (j - 1 < off.size()) off[j - 1] = 0.0;
            }
        }
        std::vector<double> dir = solve_tridiagonal(H.diag, off, rhs);
        if (any_implicit) {
            const double kd = static_cast<double>(k);
            for (std::size_t j = 1; j < k; ++j) {
                if (!implicit_dir[j]) continue;
                const double gj = g[j - 1];
                if (gj == 0.0) {
                    dir[j - 1] = 0.0;
                    continue;
                }
                const double d = x[j] - xp[j];
                const double q =
                    H.diag[j - 1] - transport_curvature(c, d / tau, tau) / (kd * tau);
                const double s0 = cost_prime(c, d / tau);
                const auto psi = [&](double w) {
                    return gj + (cost_prime(c, (d + w) / tau) - s0) / kd + q * w;
                };
                const double m0 = std::max(
                    {std::fabs(d), tau * dual_prime(c, kd * std::fabs(gj)), std::fabs(gj) / q});
                double lo = 0.0, hi = 0.0;
                if (gj > 0.0) {
                    lo = -m0;
                    for (int b = 0; b < 200 && psi(lo) > 0.0; ++b) lo *= 2.0;
                } else {
                    hi = m0;
                    for (int b = 0; b < 200 && psi(hi) < 0.0; ++b) hi *= 2.0;
                }
                for (int b = 0; b < 150; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    (psi(mid) > 0.0 ? hi : lo) = mid;
                }
                dir[j - 1] = 0.5 * (lo + hi);
            }
        }
        // Second limit-cycle signature: a coordinate below the clamp scale
        // whose full Newton component proposes a sign flip of the
        // displacement. Backtracking can land such a coordinate short of the
        // kink (so the crossing-based commit below never triggers) while the
        // understated curvature keeps it oscillating. The proposal itself is
        // cheap to see here; whether it counts is decided after the line
        // search, because flip proposals are routine while the bulk still
        // moves macroscopically and diagnostic only once whole iterations
        // have shrunk below the clamp scale. Displacement exactly zero
        // proposes nothing, so coordinates leaving a kink are never counted.
        if (kink) {
            for (std::size_t j = 1; j < k; ++j) {
                const double d = x[j] - xp[j];
                flip_intent[j] = !implicit_dir[j] && std::fabs(d) < steep &&
                                 d * (d + dir[j - 1]) < 0.0;
            }
        }

        // backtrack until the candidate is strictly feasible and Phi does
        // not increase (monotone inner iteration, up to a rounding allowance:
        // near the minimizer a full Newton step moves Phi by less than one
        // ulp, so an exact comparison would reject every productive step)
        const double phi_slack = 1e-14 * (1.0 + std::fabs(phi_cur));
        double h = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 120; ++ls) {
            cand = x;
            if (kink) snap_trial = snapped;
            bool trial_snapped = false;
            double step_norm = 0.0;
            for (std::size_t j = 1; j < k; ++j) {
                cand[j] = x[j] + h * dir[j - 1];
                // sub-quadratic powers: the quadratic model is useless across
                // the kink at zero displacement, so a Newton move that would
                // flip the displacement's sign lands on the kink instead (it
                // may leave in a later iteration). Scalar-solve moves carry
                // the true slope and may cross legitimately.
                if (kink && !implicit_dir[j] && (x[j] - xp[j]) * (cand[j] - xp[j]) < 0.0) {
                    cand[j] = xp[j];
                    snap_trial[j] = 1;
                    trial_snapped = true;
                }
                step_norm = std::max(step_norm, std::fabs(cand[j] - x[j]));
            }
            if (first_infeasible(c, tau, cfg.min_gap, xp, cand) == kFeasible) {
                const double phi_new = phi_raw(c, e, tau, xp, cand);
                if (std::isfinite(phi_new) && phi_new <= phi_cur + phi_slack) {
                    x.swap(cand);
                    // a kink crossing or a repeated flip proposal inside a
                    // microscopic step (everything below the clamp scale) is
                    // the limit-cycle signature; both are transient during
                    // real collective motion, so they only count here
                    if (kink) {
                        if (trial_snapped && step_norm < steep) snapped.swap(snap_trial);
                        for (std::size_t j = 1; j < k; ++j) {
                            if (step_norm < steep && flip_intent[j]) {
                                if (++flip_count[j] >= 3) snapped[j] = 1;
                            } else if (std::fabs(x[j] - xp[j]) >= steep) {
                                flip_count[j] = 0;
                            }
                        }
                    }
                    phi_cur = phi_new;
                    accepted = true;
                    break;
                }
            }
            h *= cfg.armijo_shrink;
        }
        if (!accepted)
            throw NewtonError("jko_step: line search stalled (|grad| = " + std::to_string(gnorm) +
                                  ")",
                              gnorm);
        ++iters;
        g = grad_raw(c, e, tau, xp, x);
        gnorm = sup_norm(g);
    }

    StepReport rep;
    rep.n = 1;
    rep.t = tau;
    rep.energy = total_energy_raw(e, x);
    rep.transport = transport_term(c, tau, xp, x);
    rep.newton_iters = iters;
    const double kd = static_cast<double>(k);
    rep.min_dx = kInf;
    rep.max_dx = -kInf;
    double prev_d = 0.0;
    rep.min_d2x = kInf;
    rep.max_d2x = -kInf;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = kd * (x[i + 1] - x[i]);
        rep.min_dx = std::min(rep.min_dx, d);
        rep.max_dx = std::max(rep.max_dx, d);
        if (i > 0) {
            const double dd = kd * (d - prev_d);
            rep.min_d2x = std::min(rep.min_d2x, dd);
            rep.max_d2x = std::max(rep.max_d2x, dd);
        }
        prev_d = d;
    }
    rep.max_speed = 0.0;
    for (std::size_t i = 0; i <= k; ++i)
        rep.max_speed = std::max(rep.max_speed, std::fabs(x[i] - xp[i]) / tau);

    return {IdfVector(x_prev.a(), x_prev.b(), std::move(x)), rep};
}

Trajectory evolve(const CostModel& c, const EnergyModel& e, const JkoConfig& cfg,
                  const IdfVector& x0, const StepObserver& observer) {
    cfg.validate();
    const std::size_t n_steps = cfg.num_steps();
    Trajectory traj;
    traj.states.reserve(n_steps + 1);
    traj.reports.reserve(n_steps);
    traj.states.push_back(x0);
    for (std::size_t n = 1; n <= n_steps; ++n) {
        try {
            auto [x, rep] = jko_step(c, e, cfg, traj.states.back());
            rep.n = n;
            rep.t = static_cast<double>(n) * cfg.tau;
            traj.states.push_back(std::move(x));
            traj.reports.push_back(rep);
        } catch (const NewtonError& ex) {
            throw NewtonError("evolve: step " + std::to_string(n) + ": " + ex.what(),
                              ex.last_grad_norm);
        } catch (const InfeasibleError& ex) {
            throw InfeasibleError("evolve: step " + std::to_string(n) + ": " + ex.what(),
                                  ex.index);
        }
        if (observer) observer(traj.reports.back());
    }
    return traj;
}

}  // namespace lagflow
