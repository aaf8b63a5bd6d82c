#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <lagflow/analysis.hpp>
#include <lagflow/cost.hpp>
#include <lagflow/energy.hpp>
#include <lagflow/grid.hpp>
#include <lagflow/jko.hpp>

using namespace lagflow;

namespace {

const InvariantCheck& find_check(const AuditReport& rep, const std::string& name) {
    for (const InvariantCheck& c : rep.checks)
        if (c.name == name) return c;
    REQUIRE_MESSAGE(false, "missing check: " << name);
    static InvariantCheck dummy;
    return dummy;
}

Trajectory short_run(const CostModel& c, const EnergyModel& e, const JkoConfig& cfg,
                     std::size_t k, double lo, double hi) {
    const IdfVector x0 = from_density(DensitySpec::uniform(lo, hi), k, -1.0, 1.0, 1e-3);
    return evolve(c, e, cfg, x0);
}

}  // namespace

TEST_CASE("audit: stationary trajectory satisfies every applicable invariant") {
    const CostModel c = CostModel::p_power(2.0);
    const EnergyModel e(1.0, Potential::constant());
    JkoConfig cfg;
    cfg.tau = 0.1;
    cfg.t_end = 0.5;
    cfg.newton_tol = 1e-12;
    const Trajectory tr = evolve(c, e, cfg, IdfVector::equispaced(-1.0, 1.0, 16));
    const AuditReport rep = audit(tr, c, e, cfg);
    CHECK(rep.pass());
    for (const InvariantCheck& ck : rep.checks) {
        CHECK(ck.pass);
        if (ck.applicable) CHECK(ck.worst == 0.0);
    }
    CHECK(find_check(rep, "energy_dissipation").applicable);
    CHECK(find_check(rep, "endpoints_pinned").applicable);
    CHECK_FALSE(find_check(rep, "flux_limit").applicable);     // not relativistic
    CHECK_FALSE(find_check(rep, "dx_max_convex_v").applicable);  // constant potential
}

TEST_CASE("audit: diffusive and relativistic short runs pass all checks") {
    JkoConfig cfg;
    cfg.tau = 0.02;
    cfg.t_end = 0.2;
    cfg.newton_tol = 1e-12;

    const EnergyModel e1(1.0, Potential::constant());
    const CostModel p7 = CostModel::p_power(7.0);
    const Trajectory t1 = short_run(p7, e1, cfg, 40, -0.4, 0.4);
    const AuditReport r1 = audit(t1, p7, e1, cfg);
    CHECK(r1.pass());
    CHECK(find_check(r1, "dx_min_max").applicable);
    CHECK(find_check(r1, "hoelder_bound").applicable);
    CHECK(find_check(r1, "entropy_rate").applicable);
    CHECK(find_check(r1, "euler_lagrange").applicable);

    const CostModel rel = CostModel::relativistic(1.0);
    const Trajectory t2 = short_run(rel, e1, cfg, 40, -0.4, 0.4);
    const AuditReport r2 = audit(t2, rel, e1, cfg);
    CHECK(r2.pass());
    CHECK(find_check(r2, "flux_limit").applicable);
    CHECK(find_check(r2, "d2x_min_max").applicable);

    // convex quadratic potential with quadratic cost: max-gap contraction
    const EnergyModel e2(1.0, Potential::quadratic(1.0, 0.0));
    const CostModel p2 = CostModel::p_power(2.0);
    const Trajectory t3 = short_run(p2, e2, cfg, 40, -0.4, 0.4);
    const AuditReport r3 = audit(t3, p2, e2, cfg);
    CHECK(r3.pass());
    CHECK(find_check(r3, "dx_max_convex_v").applicable);
    CHECK_FALSE(find_check(r3, "dx_min_max").applicable);
    CHECK_FALSE(find_check(r3, "hoelder_bound").applicable);
}

TEST_CASE("audit: a corrupted state is caught at the right step") {
    const CostModel c = CostModel::p_power(7.0);
    const EnergyModel e(1.0, Potential::constant());
    JkoConfig cfg;
    cfg.tau = 0.02;
    cfg.t_end = 0.1;
    cfg.newton_tol = 1e-12;
    Trajectory tr = short_run(c, e, cfg, 24, -0.4, 0.4);
    REQUIRE(tr.states.size() == 6);

    // squeeze one interior gap of x^2 to inflate its entropy
    std::vector<double> bad(tr.states[2].values().begin(), tr.states[2].values().end());
    bad[12] = bad[11] + 1e-7;
    tr.states[2] = IdfVector(tr.states[2].a(), tr.states[2].b(), bad);

    const AuditReport rep = audit(tr, c, e, cfg);
    CHECK_FALSE(rep.pass());
    const InvariantCheck& diss = find_check(rep, "energy_dissipation");
    CHECK_FALSE(diss.pass);
    CHECK(diss.step == 2);
    CHECK(diss.worst > 0.0);
}

TEST_CASE("audit: deterministic CSV serialization") {
    const CostModel c = CostModel::relativistic(1.0);
    const EnergyModel e(5.0 / 3.0, Potential::constant());
    JkoConfig cfg;
    cfg.tau = 0.05;
    cfg.t_end = 0.2;
    const Trajectory tr = short_run(c, e, cfg, 20, -0.4, 0.4);
    const std::string a = audit(tr, c, e, cfg).to_csv();
    const std::string b = audit(tr, c, e, cfg).to_csv();
    CHECK(a == b);
    CHECK(a.find("energy_dissipation") != std::string::npos);
    CHECK(a.find("name,") == 0);  // header first
}

TEST_CASE("reference minimizer agrees with the Newton step on small instances") {
    std::mt19937_64 rng(90125);
    std::uniform_real_distribution<double> j(-0.3, 0.3);
    JkoConfig cfg;
    cfg.tau = 0.1;
    cfg.t_end = 0.1;
    cfg.newton_tol = 1e-13;

    const std::vector<CostModel> costs = {CostModel::p_power(2.0), CostModel::p_power(7.0),
                                          CostModel::relativistic(1.0)};
    for (const CostModel& c : costs) {
        for (double m : {1.0, 5.0 / 3.0}) {
            const EnergyModel e(m, Potential::quadratic(0.5, 0.1));
            std::vector<double> xv = {-1.0, -0.5, 0.0, 0.5, 1.0};
            for (std::size_t i = 1; i < 4; ++i) xv[i] += 0.4 * j(rng);
            const IdfVector xp(-1.0, 1.0, xv);

            const auto [xn, rep] = jko_step(c, e, cfg, xp);
            const IdfVector xb = brute_force_step(c, e, cfg.tau, xp);
            for (std::size_t i = 0; i <= 4; ++i) CHECK(std::fabs(xn[i] - xb[i]) <= 1e-4);
            const double pn = phi(c, e, cfg.tau, xp, xn);
            const double pb = phi(c, e, cfg.tau, xp, xb);
            CHECK(pn <= pb + 1e-8 * (1.0 + std::fabs(pb)));
        }
    }

    // stationary point is recovered
    const IdfVector eq = IdfVector::equispaced(-1.0, 1.0, 4);
    const IdfVector xb = brute_force_step(CostModel::p_power(2.0),
                                          EnergyModel(1.0, Potential::constant()), 0.1, eq);
    for (std::size_t i = 0; i <= 4; ++i) CHECK(std::fabs(xb[i] - eq[i]) <= 1e-6);

    // determinism and the size guard
    const IdfVector xb2 = brute_force_step(CostModel::p_power(2.0),
                                           EnergyModel(1.0, Potential::constant()), 0.1, eq);
    for (std::size_t i = 0; i <= 4; ++i) CHECK(xb[i] == xb2[i]);
    CHECK_THROWS_AS((void)brute_force_step(CostModel::p_power(2.0),
                                           EnergyModel(1.0, Potential::constant()), 0.1,
                                           IdfVector::equispaced(0.0, 1.0, 7)),
                    std::invalid_argument);
}

TEST_CASE("convergence study: grid refinement of a diffusive front") {
    ConvergenceScenario s{
        .a = -4.0,
        .b = 4.0,
        .cost = CostModel::relativistic(1.0),
        .energy = EnergyModel(1.0, Potential::constant()),
        .init = DensitySpec::uniform(-0.3, 0.3),
        .floor = 1e-3,
        .t_end = 0.1,
        .tau = 0.02,
        .k = 0,  // unused on the grid axis
        .newton_tol = 1e-11,
        .newton_max_iter = 100,
        .armijo_shrink = 0.5,
        .min_gap = 0.0,
    };
    const std::vector<double> levels = {10.0, 20.0, 40.0};
    const ConvergenceResult r = convergence_study(ConvergenceAxis::Grid, s, levels, 160.0);
    REQUIRE(r.levels.size() == 3);
    CHECK(r.warnings.empty());
    // errors decrease under refinement; fitted order near one
    CHECK(r.levels[0].err_idf > r.levels[2].err_idf);
    CHECK(r.levels[0].err_density > r.levels[2].err_density);
    CHECK(r.slope_idf > 0.4);
    CHECK(r.slope_idf < 2.0);
    CHECK(r.slope_density > 0.4);
    CHECK(r.slope_density < 2.5);

    // a level that does not divide the reference is rejected
    CHECK_THROWS_AS((void)convergence_study(ConvergenceAxis::Grid, s,
                                            std::vector<double>{12.0}, 160.0),
                    std::invalid_argument);
}

TEST_CASE("convergence study: time-step refinement") {
    ConvergenceScenario s{
        .a = -4.0,
        .b = 4.0,
        .cost = CostModel::p_power(2.0),
        .energy = EnergyModel(1.0, Potential::constant()),
        .init = DensitySpec::uniform(-0.3, 0.3),
        .floor = 1e-3,
        .t_end = 0.2,
        .tau = 0.0,  // unused on the timestep axis
        .k = 30,
        .newton_tol = 1e-11,
        .newton_max_iter = 100,
        .armijo_shrink = 0.5,
        .min_gap = 0.0,
    };
    const std::vector<double> levels = {0.1, 0.05, 0.025};
    const ConvergenceResult r =
        convergence_study(ConvergenceAxis::Timestep, s, levels, 0.0125 / 2.0);
    REQUIRE(r.levels.size() == 3);
    CHECK(r.levels[0].err_idf > r.levels[2].err_idf);
    CHECK(r.slope_idf > 0.4);
    CHECK(r.slope_idf < 2.0);

    // level that is not an integer multiple of the reference step
    CHECK_THROWS_AS((void)convergence_study(ConvergenceAxis::Timestep, s,
                                            std::vector<double>{0.025}, 0.01),
                    std::invalid_argument);
}

TEST_CASE("convergence study: zero-error levels are excluded with a warning") {
    // a level equal to the reference step reruns the reference bit for bit,
    // so its error is exactly zero and must not enter the log-log fit
    ConvergenceScenario s{
        .a = -4.0,
        .b = 4.0,
        .cost = CostModel::p_power(2.0),
        .energy = EnergyModel(1.0, Potential::constant()),
        .init = DensitySpec::uniform(-0.3, 0.3),
        .floor = 1e-3,
        .t_end = 0.2,
        .tau = 0.0,
        .k = 30,
        .newton_tol = 1e-11,
        .newton_max_iter = 100,
        .armijo_shrink = 0.5,
        .min_gap = 0.0,
    };
    const ConvergenceResult r = convergence_study(ConvergenceAxis::Timestep, s,
                                                  std::vector<double>{0.05, 0.1}, 0.05);
    REQUIRE(r.levels.size() == 2);
    CHECK(r.levels[0].err_idf == 0.0);
    CHECK(r.levels[0].err_density == 0.0);
    CHECK(r.levels[1].err_idf > 0.0);
    REQUIRE(r.warnings.size() == 2);
    CHECK(r.warnings[0].find("excluded") != std::string::npos);
    CHECK(r.warnings[1].find("fewer than 2 usable levels") != std::string::npos);
    CHECK(std::isnan(r.slope_idf));
    CHECK(std::isnan(r.slope_density));
}
