#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lagflow {

/// Strictly increasing particle positions x_0 = a < x_1 < ... < x_k = b
/// encoding a piecewise-constant inverse distribution function: the i-th
/// cell [x_i, x_{i+1}] carries mass 1/k. Immutable after construction.
class IdfVector {
  public:
    /// Validates: size >= 2, values.front() == a and values.back() == b
    /// (bitwise), strictly increasing, all finite.
    IdfVector(double a, double b, std::vector<double> values);

    static IdfVector equispaced(double a, double b, std::size_t k);

    std::size_t k() const { return values_.size() - 1; }
    double a() const { return a_; }
    double b() const { return b_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const { return values_; }

  private:
    double a_, b_;
    std::vector<double> values_;
};

/// Scaled forward gaps delta_i = k * (x_{i+1} - x_i), i = 0..k-1.
/// Proportional to the reciprocal density on cell i; all positive.
std::vector<double> delta(const IdfVector& x);

/// Scaled second differences, i = 1..k-1, computed as k * (delta_i -
/// delta_{i-1}) so the identity with delta() holds exactly in floats;
/// algebraically k^2 * (x_{i+1} - 2*x_i + x_{i-1}).
std::vector<double> delta2(const IdfVector& x);

/// Piecewise-constant density on [a, b]: u = cell_values[i] on
/// (breakpoints[i], breakpoints[i+1]).
struct PiecewiseDensity {
    std::vector<double> breakpoints;  // size k+1
    std::vector<double> cell_values;  // size k

    /// Total mass, compensated summation.
    double mass() const;
};

/// Density recovered from an IDF vector: u_i = 1 / (k * (x_{i+1} - x_i)).
PiecewiseDensity to_density(const IdfVector& x);

/// Probability density used to initialize an IDF vector: uniform on an
/// interval, piecewise linear through samples, or piecewise constant on
/// cells. Normalized to unit mass at construction.
class DensitySpec {
  public:
    static DensitySpec uniform(double lo, double hi);
    /// Piecewise linear through (xs, us); xs strictly increasing, us >= 0,
    /// positive total mass (normalized internally).
    static DensitySpec piecewise_linear(std::vector<double> xs, std::vector<double> us);
    /// Piecewise constant: cells[i] on (breaks[i], breaks[i+1]).
    static DensitySpec piecewise_constant(std::vector<double> breaks, std::vector<double> cells);
    static DensitySpec from_density(const PiecewiseDensity& d);

    double support_lo() const { return xs_.front(); }
    double support_hi() const { return xs_.back(); }

    /// Mass of (-inf, x]; 0 left of the support, 1 right of it.
    double cdf(double x) const;

  private:
    DensitySpec() = default;
    // cum_[i] = mass of (-inf, xs_[i]]; linear density us_ between knots
    // (piecewise-constant specs are stored as cell-wise linear with equal ends)
    std::vector<double> xs_;
    std::vector<double> us_lo_, us_hi_;  // density at left/right end of each cell
    std::vector<double> cum_;
};

/// Quantile initialization: positions whose IDF inverts the density u
/// blended with a uniform floor of total mass `floor` (re-normalized),
/// u_tilde = (u + floor/(b-a)) / (1 + floor). Endpoints pinned to a, b
/// exactly; interior quantiles solved by bisection to 1e-12 * (b - a).
/// Requires support(u) inside [a, b] and 0 <= floor <= 1e-3.
IdfVector from_density(const DensitySpec& u, std::size_t k, double a, double b, double floor);

/// (1/k) * sum_i |x_i - y_i|; requires matching k, a, b.
double l1_idf_distance(const IdfVector& x, const IdfVector& y);

/// Exact L1 distance between the recovered piecewise-constant densities,
/// by sweeping the merged breakpoint partition; k may differ, a and b not.
double l1_density_distance(const IdfVector& x, const IdfVector& y);

}  // namespace lagflow
