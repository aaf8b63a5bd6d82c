#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <lagflow/cost.hpp>

using namespace lagflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// central difference with cube-root-of-eps spacing
double fd(double (*f)(const CostModel&, double), const CostModel& c, double s) {
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::fabs(s));
    return (f(c, s + h) - f(c, s - h)) / (2.0 * h);
}

// invert c' by bisection on a bracketing interval, independent of dual_prime
double invert_prime(const CostModel& c, double r, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (cost_prime(c, mid) > r ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("power cost: closed-form spot values") {
    const CostModel c2 = CostModel::p_power(2.0);
    CHECK(cost_value(c2, 3.0) == doctest::Approx(4.5).epsilon(1e-15));
    CHECK(cost_second(c2, -17.3) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dual_prime(c2, 0.25) == doctest::Approx(0.25).epsilon(1e-15));

    const CostModel c7 = CostModel::p_power(7.0);
    CHECK(cost_prime(c7, -1.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(cost_second(c7, 1.0) == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(cost_value(c7, 0.0) == 0.0);
    CHECK(cost_prime(c7, 0.0) == 0.0);
    CHECK(dual_prime(c7, 0.0) == 0.0);
}

TEST_CASE("relativistic cost: closed-form spot values at gamma = 1") {
    const CostModel c = CostModel::relativistic(1.0);
    CHECK(cost_value(c, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cost_value(c, 1.5) == kInf);
    CHECK(cost_value(c, -2.0) == kInf);
    const double is2 = 1.0 / std::sqrt(2.0);
    CHECK(cost_prime(c, is2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dual_prime(c, 1.0) == doctest::Approx(is2).epsilon(1e-15));
    // saturation: large slopes approach the light cone from inside; at r = 1e8
    // the float result rounds onto the cap itself, never beyond it
    CHECK(dual_prime(c, 1e8) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(dual_prime(c, -1e8) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(std::fabs(dual_prime(c, 1e8)) <= 1.0);
    CHECK(std::fabs(dual_prime(c, 1e6)) < 1.0);
}

TEST_CASE("derivatives match finite differences of the value") {
    std::mt19937_64 rng(20240817);
    const std::vector<CostModel> models = {CostModel::p_power(4.0 / 3.0), CostModel::p_power(2.0),
                                           CostModel::p_power(7.0), CostModel::relativistic(1.0),
                                           CostModel::relativistic(2.5)};
    for (const CostModel& c : models) {
        std::uniform_real_distribution<double> pick(
            c.kind == CostKind::Relativistic ? -0.9 * c.gamma : -3.0,
            c.kind == CostKind::Relativistic ? 0.9 * c.gamma : 3.0);
        for (int t = 0; t < 50; ++t) {
            double s = pick(rng);
            if (std::fabs(s) < 0.05) s = s < 0 ? s - 0.05 : s + 0.05;  // stay off the origin
            const double d1 = fd(&cost_value, c, s);
            CHECK(cost_prime(c, s) == doctest::Approx(d1).epsilon(1e-6));
            const double d2 = fd(&cost_prime, c, s);
            CHECK(cost_second(c, s) == doctest::Approx(d2).epsilon(1e-6));
        }
    }
}

TEST_CASE("dual slope map matches a bisection inverse of c'") {
    std::mt19937_64 rng(77002);
    std::uniform_real_distribution<double> pick(-4.0, 4.0);
    const std::vector<CostModel> models = {CostModel::p_power(4.0 / 3.0), CostModel::p_power(2.0),
                                           CostModel::p_power(7.0), CostModel::relativistic(1.0)};
    for (const CostModel& c : models) {
        for (int t = 0; t < 40; ++t) {
            const double r = pick(rng);
            const double hi = c.kind == CostKind::Relativistic
                                  ? c.gamma * (1.0 - 1e-14)
                                  : std::pow(std::fabs(r) + 1.0, 1.0 / (c.p - 1.0)) + 1.0;
            const double ref = invert_prime(c, r, -hi, hi);
            CHECK(dual_prime(c, r) == doctest::Approx(ref).epsilon(1e-10));
        }
    }
}

TEST_CASE("composing c' with its inverse returns the slope") {
    // log-spaced grid of both signs; the relativistic family is capped at
    // |r| <= 1e3: past that the recomposition is ill-conditioned in doubles
    // (the speed saturates at gamma and the slope information is destroyed
    // by rounding), while saturation itself is covered elsewhere
    const auto run = [](const CostModel& c, double r_max) {
        for (double r = 1e-6; r <= r_max * (1 + 1e-12); r *= 10.0) {
            for (double sgn : {-1.0, 1.0}) {
                const double rr = sgn * r;
                const double back = cost_prime(c, dual_prime(c, rr));
                CHECK(std::fabs(back - rr) <= 1e-9 * (1.0 + std::fabs(rr)));
            }
        }
    };
    run(CostModel::p_power(4.0 / 3.0), 1e6);
    run(CostModel::p_power(2.0), 1e6);
    run(CostModel::p_power(7.0), 1e6);
    run(CostModel::relativistic(1.0), 1e3);
    run(CostModel::relativistic(0.5), 1e3);
}

TEST_CASE("growth envelope brackets s*c'(s) on its window") {
    const auto check_envelope = [](const CostModel& c, const GrowthEnvelope& env, double s_max) {
        REQUIRE(env.alpha > 0.0);
        REQUIRE(env.beta >= env.alpha);
        for (int i = 1; i <= 10000; ++i) {
            const double s = s_max * static_cast<double>(i) / 10000.0;
            const double f = s * cost_prime(c, s);
            const double lo = env.alpha * std::pow(s, env.p);
            const double hi = env.beta * std::pow(s, env.p);
            CHECK(f >= lo * (1.0 - 1e-12));
            CHECK(f <= hi * (1.0 + 1e-12));
            // symmetric: s*c'(s) is even
            CHECK((-s) * cost_prime(c, -s) == f);
        }
    };
    const CostModel p7 = CostModel::p_power(7.0);
    const GrowthEnvelope e7 = growth_envelope(p7);
    CHECK(e7.alpha == 1.0);
    CHECK(e7.beta == 1.0);
    CHECK(e7.p == 7.0);
    check_envelope(p7, e7, 5.0);

    const CostModel rel = CostModel::relativistic(2.0);
    const GrowthEnvelope er = growth_envelope(rel, 0.9 * rel.gamma);
    CHECK(er.p == 2.0);
    CHECK(er.alpha == doctest::Approx(1.0 / rel.gamma).epsilon(1e-15));
    check_envelope(rel, er, 0.9 * rel.gamma);
    CHECK_THROWS_AS((void)growth_envelope(rel, 2.5), std::invalid_argument);
}

TEST_CASE("slope maps are odd and strictly increasing") {
    std::mt19937_64 rng(5150);
    const std::vector<CostModel> models = {CostModel::p_power(4.0 / 3.0), CostModel::p_power(7.0),
                                           CostModel::relativistic(1.0)};
    for (const CostModel& c : models) {
        std::uniform_real_distribution<double> pick(
            0.0, c.kind == CostKind::Relativistic ? 0.99 * c.gamma : 5.0);
        for (int t = 0; t < 100; ++t) {
            const double s = pick(rng);
            CHECK(cost_prime(c, -s) == -cost_prime(c, s));
            CHECK(dual_prime(c, -s) == -dual_prime(c, s));
        }
        // ordered pairs
        double prev = cost_prime(c, 0.0);
        const double top = c.kind == CostKind::Relativistic ? 0.999 * c.gamma : 6.0;
        for (int i = 1; i <= 64; ++i) {
            const double s = top * static_cast<double>(i) / 64.0;
            const double cur = cost_prime(c, s);
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("domain violations throw, infinities do not") {
    const CostModel rel = CostModel::relativistic(1.0);
    CHECK_THROWS_AS((void)cost_prime(rel, 1.0), std::domain_error);
    CHECK_THROWS_AS((void)cost_prime(rel, -1.5), std::domain_error);
    CHECK_THROWS_AS((void)cost_second(rel, 1.0), std::domain_error);
    CHECK(cost_value(rel, 1.0) == doctest::Approx(1.0));  // boundary value is finite
    CHECK(cost_value(rel, 1.0 + 1e-9) == kInf);

    const CostModel cq = CostModel::p_power(4.0 / 3.0);
    CHECK_THROWS_AS((void)cost_second(cq, 0.0), std::domain_error);
    CHECK(cost_prime(cq, 0.0) == 0.0);  // the slope itself is continuous

    CHECK_THROWS_AS((void)CostModel::p_power(1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)CostModel::relativistic(0.0), std::invalid_argument);
}
