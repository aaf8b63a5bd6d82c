#include "lagflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lagflow/csv.hpp"

namespace lagflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StateStats {
    double energy;
    double min_dx, max_dx;
    double min_d2x, max_d2x;
};

StateStats state_stats(const EnergyModel& e, const IdfVector& x) {
    StateStats s{};
    s.energy = total_energy(e, x);
    const std::size_t k = x.k();
    const double kd = static_cast<double>(k);
    s.min_dx = kInf;
    s.max_dx = -kInf;
    s.min_d2x = kInf;
    s.max_d2x = -kInf;
    double prev = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = kd * (x[i + 1] - x[i]);
        s.min_dx = std::min(s.min_dx, d);
        s.max_dx = std::max(s.max_dx, d);
        if (i > 0) {
            const double dd = kd * (d - prev);
            s.min_d2x = std::min(s.min_d2x, dd);
            s.max_d2x = std::max(s.max_d2x, dd);
        }
        prev = d;
    }
    return s;
}

// a_i = k * (h_X'(delta_i) - h_X'(delta_{i-1})) - v'(x_i), i = 1..k-1:
// the dual slope the i-th velocity must match at optimality.
std::vector<double> dual_slopes(const EnergyModel& e, const IdfVector& x) {
    const std::size_t k = x.k();
    const double kd = static_cast<double>(k);
    std::vector<double> hp(k);
    for (std::size_t i = 0; i < k; ++i) hp[i] = -std::pow(kd * (x[i + 1] - x[i]), -e.m);
    std::vector<double> a(k - 1);
    const bool with_pot = !e.potential.is_constant();
    for (std::size_t i = 1; i < k; ++i) {
        a[i - 1] = kd * (hp[i] - hp[i - 1]) - (with_pot ? e.potential.prime(x[i]) : 0.0);
    }
    return a;
}

// Worst-violation accumulator: keeps the most positive excess and its step.
struct Worst {
    double excess = -kInf;
    std::int64_t step = -1;
    void update(double ex, std::int64_t n) {
        if (ex > excess) {
            excess = ex;
            step = n;
        }
    }
    InvariantCheck check(const std::string& name, bool strict = false) const {
        InvariantCheck c;
        c.name = name;
        if (step < 0) {  // nothing examined (empty trajectory)
            c.worst = 0.0;
            c.step = -1;
            c.pass = true;
            return c;
        }
        c.pass = strict ? (excess < 0.0) : (excess <= 0.0);
        c.worst = std::max(0.0, excess);
        c.step = step;
        return c;
    }
};

InvariantCheck not_applicable(const std::string& name) {
    InvariantCheck c;
    c.name = name;
    c.worst = 0.0;
    c.step = -1;
    c.pass = true;
    c.applicable = false;
    return c;
}

double safe_ctilde(const CostModel& c, double v) {
    if (c.kind == CostKind::Relativistic && std::fabs(v) >= c.gamma) return kInf;
    return v == 0.0 ? 0.0 : v * cost_prime(c, v);
}

}  // namespace

bool AuditReport::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string AuditReport::to_csv() const {
    std::string out = "name,worst,step,pass\n";
    for (const auto& c : checks) {
        out += c.name;
        out += ',';
        out += format_double(c.worst);
        out += ',';
        out += std::to_string(c.step);
        out += ',';
        out += c.pass ? '1' : '0';
        out += '\n';
    }
    return out;
}

AuditReport audit(const Trajectory& traj, const CostModel& c, const EnergyModel& e,
                  const JkoConfig& cfg) {
    if (traj.states.empty()) throw std::invalid_argument("audit: empty trajectory");
    const IdfVector& x0 = traj.states.front();
    const std::size_t k = x0.k();
    const double a = x0.a(), b = x0.b();
    if (k < 2) throw std::invalid_argument("audit: need k >= 2");
    for (const auto& s : traj.states)
        if (s.k() != k || s.a() != a || s.b() != b)
            throw std::invalid_argument("audit: states disagree on k or the domain");
    const std::size_t N = traj.states.size() - 1;
    const double tau = cfg.tau;
    const double kd = static_cast<double>(k);
    const bool v_const = e.potential.is_constant();
    const bool relativistic = c.kind == CostKind::Relativistic;

    std::vector<StateStats> st(N + 1);
    for (std::size_t n = 0; n <= N; ++n) st[n] = state_stats(e, traj.states[n]);

    std::vector<double> max_speed(N + 1, 0.0);
    for (std::size_t n = 1; n <= N; ++n) {
        double m = 0.0;
        for (std::size_t i = 0; i <= k; ++i)
            m = std::max(m, std::fabs(traj.states[n][i] - traj.states[n - 1][i]) / tau);
        max_speed[n] = m;
    }

    AuditReport rep;

    {  // energy_dissipation: H non-increasing up to 1e-10 * (1 + |H|)
        Worst w;
        for (std::size_t n = 1; n <= N; ++n) {
            const double slack = 1e-10 * (1.0 + std::fabs(st[n - 1].energy));
            w.update(st[n].energy - st[n - 1].energy - slack, static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("energy_dissipation"));
    }

    {  // energy_rate: tau*(1/k)*sum ctilde(v_i) <= H^{n-1} - H^n + slack,
       // slack = tol_n * sum |displacement| + 1e-10 * (1 + |H^{n-1}|)
        Worst w;
        for (std::size_t n = 1; n <= N; ++n) {
            double sum = 0.0, l1disp = 0.0;
            for (std::size_t i = 0; i <= k; ++i) {
                const double d = traj.states[n][i] - traj.states[n - 1][i];
                sum += safe_ctilde(c, d / tau);
                l1disp += std::fabs(d);
            }
            const double lhs = tau * sum / kd;
            const double tol_n = cfg.effective_tol(k, st[n - 1].energy);
            const double slack = tol_n * l1disp + 1e-10 * (1.0 + std::fabs(st[n - 1].energy));
            w.update(lhs - (st[n - 1].energy - st[n].energy + slack),
                     static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("energy_rate"));
    }

    if (v_const) {  // dx_min_max: both delta extremes move monotonically
        Worst w;
        for (std::size_t n = 1; n <= N; ++n) {
            const double ex_min = (st[n - 1].min_dx - 1e-9) - st[n].min_dx;
            const double ex_max = st[n].max_dx - (st[n - 1].max_dx + 1e-9);
            w.update(std::max(ex_min, ex_max), static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("dx_min_max"));
    } else {
        rep.checks.push_back(not_applicable("dx_min_max"));
    }

    if (!v_const && c.kind == CostKind::PPower && c.p == 2.0) {
        // dx_max_convex_v: max delta non-increasing under a convex potential
        // (quadratic cost only: needs c'' globally bounded below)
        Worst w;
        for (std::size_t n = 1; n <= N; ++n)
            w.update(st[n].max_dx - (st[n - 1].max_dx + 1e-9), static_cast<std::int64_t>(n));
        rep.checks.push_back(w.check("dx_max_convex_v"));
    } else {
        rep.checks.push_back(not_applicable("dx_max_convex_v"));
    }

    if (relativistic && v_const) {
        // d2x_min_max: flux-limited concavity window set by the initial state
        Worst w;
        const double lo = std::min(st[0].min_d2x, 0.0) - 1e-7 * kd * kd;
        const double hi = std::max(st[0].max_d2x, 0.0) + 1e-7 * kd * kd;
        for (std::size_t n = 1; n <= N; ++n) {
            const double ex = std::max(lo - st[n].min_d2x, st[n].max_d2x - hi);
            w.update(ex, static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("d2x_min_max"));
    } else {
        rep.checks.push_back(not_applicable("d2x_min_max"));
    }

    if (relativistic) {  // flux_limit: strictly below the speed limit
        Worst w;
        for (std::size_t n = 1; n <= N; ++n)
            w.update(max_speed[n] - c.gamma, static_cast<std::int64_t>(n));
        rep.checks.push_back(w.check("flux_limit", /*strict=*/true));
    } else {
        rep.checks.push_back(not_applicable("flux_limit"));
    }

    if (e.m == 1.0 && v_const) {
        // hoelder_bound over sampled step pairs; alpha is a global lower
        // growth bound for both families
        const GrowthEnvelope env = growth_envelope(c);
        const double p = env.p, pc = p / (p - 1.0);
        const double hbar =
            -std::log(b - a) + (kd + 1.0) / kd * e.potential.value(a);
        const double budget = std::max(st[0].energy - hbar, 0.0);
        const double coeff = std::pow(env.alpha, -1.0 / p) * std::pow(budget, 1.0 / p);
        std::vector<std::size_t> idx;
        const std::size_t stride = N <= 300 ? 1 : (N + 299) / 300;
        for (std::size_t n = 0; n <= N; n += stride) idx.push_back(n);
        if (idx.back() != N) idx.push_back(N);
        Worst w;
        for (std::size_t ii = 0; ii < idx.size(); ++ii) {
            for (std::size_t jj = ii + 1; jj < idx.size(); ++jj) {
                const std::size_t n1 = idx[ii], n2 = idx[jj];
                double l1 = 0.0;
                for (std::size_t i = 0; i <= k; ++i)
                    l1 += std::fabs(traj.states[n2][i] - traj.states[n1][i]);
                l1 /= kd;
                const double dt = static_cast<double>(n2 - n1) * tau;
                const double rhs = std::pow(dt + tau, 1.0 / pc) * coeff;
                w.update(l1 - rhs * (1.0 + 1e-8), static_cast<std::int64_t>(n2));
            }
        }
        rep.checks.push_back(w.check("hoelder_bound"));
    } else {
        rep.checks.push_back(not_applicable("hoelder_bound"));
    }

    {  // entropy_rate: cumulative p'-power of the dual slopes
        bool applicable = !relativistic;
        if (relativistic) {
            double m = 0.0;
            for (std::size_t n = 1; n <= N; ++n) m = std::max(m, max_speed[n]);
            applicable = m <= 0.9 * c.gamma;  // beta window of the default envelope
        }
        if (applicable && N > 0) {
            const GrowthEnvelope env = growth_envelope(c);
            const double p = env.p, pc = p / (p - 1.0);
            const double hbar = h_x(e, b - a) + (kd + 1.0) / kd * e.potential.min_on(a, b);
            const double budget = std::max(st[0].energy - hbar, 0.0);
            const double rhs = std::pow(env.beta, 1.0 / (p - 1.0)) * budget;
            double lhs = 0.0;
            Worst contrib;  // step with the largest single contribution
            for (std::size_t n = 1; n <= N; ++n) {
                const std::vector<double> slopes = dual_slopes(e, traj.states[n]);
                double s = 0.0;
                for (double v : slopes) s += std::pow(std::fabs(v), pc);
                s *= tau / kd;
                lhs += s;
                contrib.update(s, static_cast<std::int64_t>(n));
            }
            InvariantCheck chk;
            chk.name = "entropy_rate";
            const double excess = lhs - (rhs + 1e-8 * (1.0 + rhs));
            chk.pass = excess <= 0.0;
            chk.worst = std::max(0.0, excess);
            chk.step = contrib.step;
            rep.checks.push_back(chk);
        } else if (applicable) {
            Worst w;
            rep.checks.push_back(w.check("entropy_rate"));
        } else {
            rep.checks.push_back(not_applicable("entropy_rate"));
        }
    }

    {  // euler_lagrange: velocities inside the dual-slope interval allowed by
       // the Newton tolerance (monotone dual_prime turns the gradient bound
       // |c'(v_i) - a_i| <= k * (tol + floor_i) into a two-sided velocity
       // bracket; floor_i is the gradient resolution the solver cannot beat)
        Worst w;
        for (std::size_t n = 1; n <= N; ++n) {
            const double tol_n = cfg.effective_tol(k, st[n - 1].energy);
            const std::vector<double> fl =
                gradient_floor(c, e, tau, traj.states[n - 1], traj.states[n]);
            const std::vector<double> slopes = dual_slopes(e, traj.states[n]);
            double ex = -kInf;
            for (std::size_t i = 1; i < k; ++i) {
                const double D = 10.0 * kd * (tol_n + fl[i - 1]);
                const double v = (traj.states[n][i] - traj.states[n - 1][i]) / tau;
                const double lo = dual_prime(c, slopes[i - 1] - D);
                const double hi = dual_prime(c, slopes[i - 1] + D);
                ex = std::max(ex, std::max(lo - v, v - hi));
            }
            w.update(ex, static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("euler_lagrange"));
    }

    {  // endpoints_pinned: bitwise equality with the domain ends
        Worst w;
        for (std::size_t n = 0; n <= N; ++n) {
            const double ex =
                std::max(std::fabs(traj.states[n][0] - a), std::fabs(traj.states[n][k] - b));
            // zero deviation registers as a strictly satisfied bound
            w.update(ex > 0.0 ? ex : -1.0, static_cast<std::int64_t>(n));
        }
        rep.checks.push_back(w.check("endpoints_pinned"));
    }

    return rep;
}

IdfVector brute_force_step(const CostModel& c, const EnergyModel& e, double tau,
                           const IdfVector& x_prev) {
    const std::size_t k = x_prev.k();
    if (k < 2 || k > 6)
        throw std::invalid_argument("brute_force_step: supported only for 2 <= k <= 6");
    if (!(tau > 0.0)) throw std::invalid_argument("brute_force_step: tau must be positive");
    const double a = x_prev.a(), b = x_prev.b();
    const double cap = c.kind == CostKind::Relativistic ? c.gamma * tau : kInf;

    std::vector<double> xp(x_prev.values().begin(), x_prev.values().end());
    const auto objective = [&](const std::vector<double>& x) { return phi_raw(c, e, tau, xp, x); };

    const double margin = 1e-13 * (b - a);
    const double gold_tol = 1e-10 * (b - a);
    constexpr double invphi = 0.61803398874989484820;  // 1/golden ratio

    // golden-section minimization of coordinate j on its feasible interval
    const auto minimize_coord = [&](std::vector<double>& x, std::size_t j) {
        double lo = std::max(x[j - 1], xp[j] - cap) + margin;
        double hi = std::min(x[j + 1], xp[j] + cap) - margin;
        if (!(lo < hi)) return;
        const auto eval = [&](double t) {
            x[j] = t;
            return objective(x);
        };
        double x1 = hi - invphi * (hi - lo);
        double x2 = lo + invphi * (hi - lo);
        double f1 = eval(x1), f2 = eval(x2);
        while (hi - lo > gold_tol) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - invphi * (hi - lo);
                f1 = eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + invphi * (hi - lo);
                f2 = eval(x2);
            }
        }
        x[j] = f1 <= f2 ? x1 : x2;
    };

    double min_gap = kInf;
    for (std::size_t i = 0; i < k; ++i) min_gap = std::min(min_gap, xp[i + 1] - xp[i]);
    const double rho = 0.49 * std::min(min_gap, cap);

    std::mt19937_64 rng(0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> jitter(-rho, rho);

    std::vector<double> best;
    double best_phi = kInf;
    for (int start = 0; start < 20; ++start) {
        std::vector<double> x = xp;
        for (std::size_t j = 1; j < k; ++j) x[j] += jitter(rng);
        double prev_phi = objective(x);
        for (int sweep = 0; sweep < 1000; ++sweep) {
            for (std::size_t j = 1; j < k; ++j) minimize_coord(x, j);
            const double cur = objective(x);
            if (prev_phi - cur < 1e-12) {
                prev_phi = cur;
                break;
            }
            prev_phi = cur;
        }
        if (prev_phi < best_phi) {
            best_phi = prev_phi;
            best = x;
        }
    }
    return IdfVector(a, b, std::move(best));
}

namespace {

std::size_t to_count(double v, const char* what) {
    const double r = std::round(v);
    if (!(r >= 1.0) || std::fabs(v - r) > 1e-9 * std::max(1.0, v))
        throw std::invalid_argument(std::string("convergence_study: ") + what +
                                    " must be a positive integer");
    return static_cast<std::size_t>(r);
}

double fit_slope(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

ConvergenceResult convergence_study(ConvergenceAxis axis, const ConvergenceScenario& sc,
                                    std::span<const double> levels, double reference) {
    if (levels.empty()) throw std::invalid_argument("convergence_study: no levels given");
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        const bool inc = levels.front() < levels.back();
        if (inc ? !(levels[i] < levels[i + 1]) : !(levels[i] > levels[i + 1]))
            throw std::invalid_argument("convergence_study: levels must be strictly ordered");
    }

    JkoConfig base;
    base.newton_tol = sc.newton_tol;
    base.newton_max_iter = sc.newton_max_iter;
    base.armijo_shrink = sc.armijo_shrink;
    base.min_gap = sc.min_gap;

    const auto run = [&](std::size_t k, double tau, double t_end) {
        JkoConfig cfg = base;
        cfg.tau = tau;
        cfg.t_end = t_end;
        const IdfVector x0 = from_density(sc.init, k, sc.a, sc.b, sc.floor);
        return evolve(sc.cost, sc.energy, cfg, x0);
    };

    ConvergenceResult res;
    res.axis = axis;

    std::vector<double> log_h, log_ei, log_ed;

    if (axis == ConvergenceAxis::Grid) {
        const std::size_t kref = to_count(reference, "reference grid level");
        const Trajectory ref = run(kref, sc.tau, sc.t_end);
        const IdfVector& xr = ref.states.back();
        for (double lv : levels) {
            const std::size_t kl = to_count(lv, "grid level");
            if (kl < 2) throw std::invalid_argument("convergence_study: grid level must be >= 2");
            if (kl > kref || kref % kl != 0)
                throw std::invalid_argument(
                    "convergence_study: grid levels must nest into the reference");
            const Trajectory t = run(kl, sc.tau, sc.t_end);
            const IdfVector& xl = t.states.back();
            // restrict the reference to the shared quantile indices
            const std::size_t m = kref / kl;
            std::vector<double> sub(kl + 1);
            for (std::size_t i = 0; i <= kl; ++i) sub[i] = xr[i * m];
            const IdfVector xsub(sc.a, sc.b, std::move(sub));
            ConvergenceLevel L;
            L.level = lv;
            L.err_idf = l1_idf_distance(xl, xsub);
            L.err_density = l1_density_distance(xl, xr);
            res.levels.push_back(L);
            if (L.err_idf > 0.0 && L.err_density > 0.0 && std::isfinite(L.err_idf) &&
                std::isfinite(L.err_density)) {
                log_h.push_back(std::log(1.0 / static_cast<double>(kl)));
                log_ei.push_back(std::log(L.err_idf));
                log_ed.push_back(std::log(L.err_density));
            } else {
                res.warnings.push_back("level " + format_double(lv) +
                                       " excluded from the fit (zero or invalid error)");
            }
        }
    } else {
        const double tau_ref = reference;
        if (!(tau_ref > 0.0))
            throw std::invalid_argument("convergence_study: reference time step must be positive");
        const double ratio_ref = sc.t_end / tau_ref;
        const std::size_t n_ref =
            static_cast<std::size_t>(std::floor(ratio_ref + 1e-9 * std::max(1.0, ratio_ref)));
        if (n_ref < 1)
            throw std::invalid_argument("convergence_study: reference step exceeds the horizon");
        const Trajectory ref = run(sc.k, tau_ref, static_cast<double>(n_ref) * tau_ref);
        for (double tau_l : levels) {
            if (!(tau_l > 0.0))
                throw std::invalid_argument("convergence_study: time-step level must be positive");
            if (tau_l < tau_ref)
                throw std::invalid_argument(
                    "convergence_study: reference must be the finest time step");
            const double rr = tau_l / tau_ref;
            if (std::fabs(rr - std::round(rr)) > 1e-9 * rr)
                throw std::invalid_argument(
                    "convergence_study: each time-step level must be an integer multiple "
                    "of the reference step");
            const double ratio = sc.t_end / tau_l;
            const std::size_t n_l =
                static_cast<std::size_t>(std::floor(ratio + 1e-9 * std::max(1.0, ratio)));
            if (n_l < 1)
                throw std::invalid_argument("convergence_study: time-step level exceeds the horizon");
            const Trajectory t = run(sc.k, tau_l, static_cast<double>(n_l) * tau_l);
            // reference state at this level's own final time
            const std::size_t ref_idx = n_l * static_cast<std::size_t>(std::round(rr));
            if (ref_idx >= ref.states.size())
                throw std::logic_error("convergence_study: reference run too short");
            ConvergenceLevel L;
            L.level = tau_l;
            L.err_idf = l1_idf_distance(t.states.back(), ref.states[ref_idx]);
            L.err_density = l1_density_distance(t.states.back(), ref.states[ref_idx]);
            res.levels.push_back(L);
            if (L.err_idf > 0.0 && L.err_density > 0.0 && std::isfinite(L.err_idf) &&
                std::isfinite(L.err_density)) {
                log_h.push_back(std::log(tau_l));
                log_ei.push_back(std::log(L.err_idf));
                log_ed.push_back(std::log(L.err_density));
            } else {
                res.warnings.push_back("level " + format_double(tau_l) +
                                       " excluded from the fit (zero or invalid error)");
            }
        }
    }

    if (log_h.size() >= 2) {
        res.slope_idf = fit_slope(log_h, log_ei);
        res.slope_density = fit_slope(log_h, log_ed);
    } else {
        res.slope_idf = std::numeric_limits<double>::quiet_NaN();
        res.slope_density = std::numeric_limits<double>::quiet_NaN();
        res.warnings.push_back("fewer than 2 usable levels; no slope fitted");
    }
    return res;
}

}  // namespace lagflow
