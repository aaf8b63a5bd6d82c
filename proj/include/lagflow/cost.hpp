#pragma once

#include <cstddef>

namespace lagflow {

enum class CostKind { PPower, Relativistic };

/// Convex transport cost c(s) acting on particle velocities.
///
/// Two families:
///  - PPower:       c(s) = |s|^p / p,  p > 1 (finite everywhere)
///  - Relativistic: c(s) = gamma * (1 - sqrt(1 - (s/gamma)^2)) for |s| <= gamma,
///                  +inf outside (finite speed limit gamma)
struct CostModel {
    CostKind kind = CostKind::PPower;
    double p = 2.0;      // PPower exponent, > 1
    double gamma = 1.0;  // Relativistic speed limit, > 0

    static CostModel p_power(double p);
    static CostModel relativistic(double gamma);
};

/// c(s); returns +inf outside the relativistic domain |s| <= gamma.
double cost_value(const CostModel& c, double s);

/// c'(s). Odd and strictly increasing on the interior of the domain.
/// Throws std::domain_error for relativistic |s| >= gamma.
double cost_prime(const CostModel& c, double s);

/// c''(s) > 0 on the interior of the domain.
/// Throws std::domain_error for relativistic |s| >= gamma and for
/// p_power with p < 2 at s = 0 (where c'' blows up).
double cost_second(const CostModel& c, double s);

/// (c*)'(r) = (c')^{-1}(r): velocity produced by a dual slope r.
/// Defined for every real r; maps into (-gamma, gamma) for relativistic.
double dual_prime(const CostModel& c, double r);

/// Two-sided power envelope of s*c'(s) on a symmetric window [-s_max, s_max]:
///   alpha * |s|^p <= s * c'(s) <= beta * |s|^p  for all |s| <= s_max.
struct GrowthEnvelope {
    double alpha;
    double beta;
    double p;
    double s_max;  // window half-width the bounds are valid on
};

/// Envelope on [-s_max, s_max]. PPower: alpha = beta = 1 globally (s_max
/// ignored, reported as +inf). Relativistic: alpha = 1/gamma, p = 2,
/// beta = (1/gamma) / sqrt(1 - (s_max/gamma)^2); requires s_max < gamma.
GrowthEnvelope growth_envelope(const CostModel& c, double s_max);

/// Default window: full line for PPower, s_max = 0.9 * gamma for relativistic.
GrowthEnvelope growth_envelope(const CostModel& c);

}  // namespace lagflow
