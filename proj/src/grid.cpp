#include "lagflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lagflow {

namespace {

double kahan_sum(std::span<const double> v) {
    double s = 0.0, comp = 0.0;
    for (double t : v) {
        const double y = t - comp;
        const double u = s + y;
        comp = (u - s) - y;
        s = u;
    }
    return s;
}

}  // namespace

IdfVector::IdfVector(double a, double b, std::vector<double> values)
    : a_(a), b_(b), values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("IdfVector: need at least 2 positions");
    if (!(a < b)) throw std::invalid_argument("IdfVector: domain must satisfy a < b");
    if (values_.front() != a || values_.back() != b)
        throw std::invalid_argument("IdfVector: endpoints must equal a and b exactly");
    for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || !(values_[i] < values_[i + 1]))
            throw std::invalid_argument("IdfVector: positions not strictly increasing at index " +
                                        std::to_string(i));
    }
}

IdfVector IdfVector::equispaced(double a, double b, std::size_t k) {
    if (k < 1) throw std::invalid_argument("IdfVector: k must be >= 1");
    std::vector<double> v(k + 1);
    for (std::size_t i = 0; i <= k; ++i)
        v[i] = a + (b - a) * (static_cast<double>(i) / static_cast<double>(k));
    v[0] = a;
    v[k] = b;
    return IdfVector(a, b, std::move(v));
}

std::vector<double> delta(const IdfVector& x) {
    const std::size_t k = x.k();
    const double kd = static_cast<double>(k);
    std::vector<double> d(k);
    for (std::size_t i = 0; i < k; ++i) d[i] = kd * (x[i + 1] - x[i]);
    return d;
}

std::vector<double> delta2(const IdfVector& x) {
    const std::size_t k = x.k();
    if (k < 2) throw std::invalid_argument("delta2: need k >= 2");
    const std::vector<double> d = delta(x);
    const double kd = static_cast<double>(k);
    std::vector<double> dd(k - 1);
    for (std::size_t i = 1; i < k; ++i) dd[i - 1] = kd * (d[i] - d[i - 1]);
    return dd;
}

double PiecewiseDensity::mass() const {
    std::vector<double> contrib(cell_values.size());
    for (std::size_t i = 0; i < cell_values.size(); ++i)
        contrib[i] = cell_values[i] * (breakpoints[i + 1] - breakpoints[i]);
    return kahan_sum(contrib);
}

PiecewiseDensity to_density(const IdfVector& x) {
    const std::size_t k = x.k();
    const double kd = static_cast<double>(k);
    PiecewiseDensity d;
    d.breakpoints.assign(x.values().begin(), x.values().end());
    d.cell_values.resize(k);
    for (std::size_t i = 0; i < k; ++i) d.cell_values[i] = 1.0 / (kd * (x[i + 1] - x[i]));
    return d;
}

// ---------------------------------------------------------------------------
// DensitySpec

namespace {

void normalize_cells(std::vector<double>& lo, std::vector<double>& hi,
                     const std::vector<double>& xs, std::vector<double>& cum) {
    const std::size_t n = lo.size();
    cum.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        cum[i + 1] = cum[i] + 0.5 * (lo[i] + hi[i]) * (xs[i + 1] - xs[i]);
    const double total = cum[n];
    if (!(total > 0.0) || !std::isfinite(total))
        throw std::invalid_argument("DensitySpec: total mass must be positive and finite");
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] /= total;
        hi[i] /= total;
    }
    for (std::size_t i = 0; i <= n; ++i) cum[i] /= total;
    cum[n] = 1.0;
}

void check_knots(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("DensitySpec: need at least 2 sample points");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (!std::isfinite(xs[i]) || !(xs[i] < xs[i + 1]))
            throw std::invalid_argument("DensitySpec: sample points must be strictly increasing");
}

}  // namespace

DensitySpec DensitySpec::uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("DensitySpec: uniform support must have lo < hi");
    DensitySpec d;
    d.xs_ = {lo, hi};
    d.us_lo_ = {1.0};
    d.us_hi_ = {1.0};
    normalize_cells(d.us_lo_, d.us_hi_, d.xs_, d.cum_);
    return d;
}

DensitySpec DensitySpec::piecewise_linear(std::vector<double> xs, std::vector<double> us) {
    check_knots(xs);
    if (us.size() != xs.size())
        throw std::invalid_argument("DensitySpec: need one density value per sample point");
    for (double u : us)
        if (!std::isfinite(u) || u < 0.0)
            throw std::invalid_argument("DensitySpec: density values must be finite and >= 0");
    DensitySpec d;
    const std::size_t n = xs.size() - 1;
    d.xs_ = std::move(xs);
    d.us_lo_.resize(n);
    d.us_hi_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.us_lo_[i] = us[i];
        d.us_hi_[i] = us[i + 1];
    }
    normalize_cells(d.us_lo_, d.us_hi_, d.xs_, d.cum_);
    return d;
}

DensitySpec DensitySpec::piecewise_constant(std::vector<double> breaks,
                                            std::vector<double> cells) {
    check_knots(breaks);
    if (cells.size() + 1 != breaks.size())
        throw std::invalid_argument("DensitySpec: need one cell value per cell");
    for (double u : cells)
        if (!std::isfinite(u) || u < 0.0)
            throw std::invalid_argument("DensitySpec: density values must be finite and >= 0");
    DensitySpec d;
    d.xs_ = std::move(breaks);
    d.us_lo_ = cells;
    d.us_hi_ = std::move(cells);
    normalize_cells(d.us_lo_, d.us_hi_, d.xs_, d.cum_);
    return d;
}

DensitySpec DensitySpec::from_density(const PiecewiseDensity& d) {
    return piecewise_constant(d.breakpoints, d.cell_values);
}

double DensitySpec::cdf(double x) const {
    if (x <= xs_.front()) return 0.0;
    if (x >= xs_.back()) return 1.0;
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
    const double x0 = xs_[i], x1 = xs_[i + 1];
    const double w = x1 - x0, t = x - x0;
    const double slope = (us_hi_[i] - us_lo_[i]) / w;
    return cum_[i] + us_lo_[i] * t + 0.5 * slope * t * t;
}

IdfVector from_density(const DensitySpec& u, std::size_t k, double a, double b, double floor) {
    if (k < 1) throw std::invalid_argument("from_density: k must be >= 1");
    if (!(a < b)) throw std::invalid_argument("from_density: domain must satisfy a < b");
    if (!(floor >= 0.0) || floor > 1e-3)
        throw std::invalid_argument("from_density: floor must lie in [0, 1e-3]");
    if (u.support_lo() < a || u.support_hi() > b)
        throw std::invalid_argument("from_density: density support must lie inside [a, b]");

    // blended CDF of u_tilde = (u + floor * uniform([a,b])) / (1 + floor)
    const auto cdf = [&](double x) {
        return (u.cdf(x) + floor * (x - a) / (b - a)) / (1.0 + floor);
    };

    const double tol = 1e-12 * (b - a);
    std::vector<double> v(k + 1);
    v[0] = a;
    v[k] = b;
    double lo_bound = a;
    for (std::size_t i = 1; i < k; ++i) {
        const double q = static_cast<double>(i) / static_cast<double>(k);
        double lo = lo_bound, hi = b;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (cdf(mid) >= q)
                hi = mid;
            else
                lo = mid;
        }
        v[i] = 0.5 * (lo + hi);
        lo_bound = lo;
    }
    for (std::size_t i = 0; i < k; ++i)
        if (!(v[i] < v[i + 1]))
            throw std::runtime_error(
                "from_density: quantiles collapsed (density has an interior mass gap); "
                "use a positive floor");
    return IdfVector(a, b, std::move(v));
}

double l1_idf_distance(const IdfVector& x, const IdfVector& y) {
    if (x.k() != y.k()) throw std::invalid_argument("l1_idf_distance: dimension mismatch");
    if (x.a() != y.a() || x.b() != y.b())
        throw std::invalid_argument("l1_idf_distance: domain mismatch");
    std::vector<double> terms(x.k() + 1);
    for (std::size_t i = 0; i <= x.k(); ++i) terms[i] = std::fabs(x[i] - y[i]);
    return kahan_sum(terms) / static_cast<double>(x.k());
}

double l1_density_distance(const IdfVector& x, const IdfVector& y) {
    if (x.a() != y.a() || x.b() != y.b())
        throw std::invalid_argument("l1_density_distance: domain mismatch");
    const PiecewiseDensity dx = to_density(x), dy = to_density(y);
    const std::size_t kx = dx.cell_values.size(), ky = dy.cell_values.size();
    std::size_t i = 0, j = 0;
    double prev = x.a();
    double total = 0.0, comp = 0.0;
    while (i < kx && j < ky) {
        const double nx = dx.breakpoints[i + 1], ny = dy.breakpoints[j + 1];
        const double nxt = std::min(nx, ny);
        const double term = std::fabs(dx.cell_values[i] - dy.cell_values[j]) * (nxt - prev);
        const double t = term - comp;
        const double s = total + t;
        comp = (s - total) - t;
        total = s;
        if (nx == nxt) ++i;
        if (ny == nxt) ++j;
        prev = nxt;
    }
    return total;
}

}  // namespace lagflow
