#include "lagflow/cost.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lagflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1 - w^2 without cancellation for |w| near 1: 1 - |w| is exact for
// |w| in [0.5, 2] (Sterbenz), so the product keeps full relative accuracy.
double one_minus_sq(double w) {
    const double aw = std::fabs(w);
    return (1.0 - aw) * (1.0 + aw);
}

double sgn(double s) { return (s > 0.0) - (s < 0.0); }

}  // namespace

CostModel CostModel::p_power(double p) {
    if (!(p > 1.0))
        throw std::invalid_argument("cost: p_power exponent must satisfy p > 1, got " +
                                    std::to_string(p));
    CostModel c;
    c.kind = CostKind::PPower;
    c.p = p;
    return c;
}

CostModel CostModel::relativistic(double gamma) {
    if (!(gamma > 0.0))
        throw std::invalid_argument("cost: relativistic speed limit must be positive, got " +
                                    std::to_string(gamma));
    CostModel c;
    c.kind = CostKind::Relativistic;
    c.gamma = gamma;
    return c;
}

double cost_value(const CostModel& c, double s) {
    if (c.kind == CostKind::PPower) return std::pow(std::fabs(s), c.p) / c.p;
    const double w = s / c.gamma;
    if (std::fabs(w) > 1.0) return kInf;
    return c.gamma * (1.0 - std::sqrt(one_minus_sq(w)));
}

double cost_prime(const CostModel& c, double s) {
    if (c.kind == CostKind::PPower)
        return s == 0.0 ? 0.0 : std::pow(std::fabs(s), c.p - 1.0) * sgn(s);
    const double w = s / c.gamma;
    if (std::fabs(w) >= 1.0)
        throw std::domain_error("cost: c' undefined at |s| >= gamma (s = " + std::to_string(s) +
                                ", gamma = " + std::to_string(c.gamma) + ")");
    return w / std::sqrt(one_minus_sq(w));
}

double cost_second(const CostModel& c, double s) {
    if (c.kind == CostKind::PPower) {
        if (c.p < 2.0 && s == 0.0)
            throw std::domain_error("cost: c'' blows up at s = 0 for p < 2");
        return (c.p - 1.0) * std::pow(std::fabs(s), c.p - 2.0);
    }
    const double w = s / c.gamma;
    if (std::fabs(w) >= 1.0)
        throw std::domain_error("cost: c'' undefined at |s| >= gamma (s = " + std::to_string(s) +
                                ", gamma = " + std::to_string(c.gamma) + ")");
    const double q = one_minus_sq(w);
    return 1.0 / (c.gamma * q * std::sqrt(q));
}

double dual_prime(const CostModel& c, double r) {
    if (c.kind == CostKind::PPower)
        return r == 0.0 ? 0.0 : std::pow(std::fabs(r), 1.0 / (c.p - 1.0)) * sgn(r);
    // gamma * r / sqrt(1 + r^2), written to avoid overflow of r^2
    const double ar = std::fabs(r);
    if (ar <= 1.0) return c.gamma * r / std::sqrt(1.0 + r * r);
    const double inv = 1.0 / ar;
    return sgn(r) * c.gamma / std::sqrt(inv * inv + 1.0);
}

GrowthEnvelope growth_envelope(const CostModel& c, double s_max) {
    if (c.kind == CostKind::PPower) {
        // s*c'(s) = |s|^p exactly, on the whole line
        return {1.0, 1.0, c.p, kInf};
    }
    if (!(s_max > 0.0) || !(s_max < c.gamma))
        throw std::invalid_argument("cost: growth envelope window must satisfy 0 < s_max < gamma");
    // s*c'(s)/s^2 = (1/gamma) * (1-(s/gamma)^2)^{-1/2}, even and increasing in |s|
    const double beta = 1.0 / (c.gamma * std::sqrt(one_minus_sq(s_max / c.gamma)));
    return {1.0 / c.gamma, beta, 2.0, s_max};
}

GrowthEnvelope growth_envelope(const CostModel& c) {
    if (c.kind == CostKind::PPower) return growth_envelope(c, 1.0);
    return growth_envelope(c, 0.9 * c.gamma);
}

}  // namespace lagflow
