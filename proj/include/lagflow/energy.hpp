#pragma once

#include <span>
#include <vector>

#include "lagflow/grid.hpp"

namespace lagflow {

enum class PotentialKind { Constant, Quadratic, Polynomial };

/// External potential v(x), convex on the domain of interest.
class Potential {
  public:
    struct Eval {
        double v, v1, v2;  // value, first and second derivative
    };

    /// v(x) = value. Dynamically inert; shifts the energy only.
    static Potential constant(double value = 0.0);
    /// v(x) = (weight/2) * (x - center)^2, weight >= 0.
    static Potential quadratic(double weight, double center);
    /// v(x) = sum_i coeffs[i] * x^i; convexity checked by sampling v'' >= 0
    /// at 1025 points of [a, b].
    static Potential polynomial(std::vector<double> coeffs, double a, double b);

    Eval eval(double x) const;
    double value(double x) const { return eval(x).v; }
    double prime(double x) const { return eval(x).v1; }
    double second(double x) const { return eval(x).v2; }

    /// True when v' vanishes identically (constant potential, zero-weight
    /// quadratic, degree <= 0 polynomial).
    bool is_constant() const;
    PotentialKind kind() const { return kind_; }

    /// min of v over [a, b] (exact for constant/quadratic, sampled at 1025
    /// points plus the critical point pattern for polynomials).
    double min_on(double a, double b) const;

  private:
    Potential() = default;
    PotentialKind kind_ = PotentialKind::Constant;
    double c0_ = 0.0;                // Constant value
    double weight_ = 0.0, center_ = 0.0;  // Quadratic parameters
    std::vector<double> coeffs_;     // Polynomial coefficients
};

/// Internal energy exponent m plus the external potential. m = 1 selects the
/// logarithmic entropy, m > 1 the power entropy.
struct EnergyModel {
    double m = 1.0;  // >= 1
    Potential potential = Potential::constant();

    EnergyModel(double m, Potential v);
};

/// Cell entropy density h_X(s) = s * h(1/s) as a function of the scaled gap:
/// m = 1: -log(s) (additive constant dropped); m > 1: s^(1-m) / (m-1).
/// Requires s > 0.
double h_x(const EnergyModel& e, double s);

/// h_X'(s) = -s^{-m} for both families (continuous in m at m = 1).
double dh_x(const EnergyModel& e, double s);

/// h_X''(s) = m * s^{-m-1} > 0.
double ddh_x(const EnergyModel& e, double s);

/// Discrete free energy
///   H(x) = (1/k) sum_{i=0}^{k-1} h_X(delta_i) + (1/k) sum_{i=0}^{k} v(x_i).
/// Returns +inf when some gap is non-positive. The raw overload takes the
/// full coordinate vector x_0..x_k without monotonicity prevalidation.
double total_energy(const EnergyModel& e, const IdfVector& x);
double total_energy_raw(const EnergyModel& e, std::span<const double> x);

}  // namespace lagflow
