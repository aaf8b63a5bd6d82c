#include "lagflow/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lagflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Potential Potential::constant(double value) {
    Potential p;
    p.kind_ = PotentialKind::Constant;
    p.c0_ = value;
    return p;
}

Potential Potential::quadratic(double weight, double center) {
    if (!(weight >= 0.0))
        throw std::invalid_argument("Potential: quadratic weight must be >= 0 (convexity)");
    Potential p;
    p.kind_ = PotentialKind::Quadratic;
    p.weight_ = weight;
    p.center_ = center;
    return p;
}

Potential Potential::polynomial(std::vector<double> coeffs, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("Potential: need a < b for the convexity check");
    Potential p;
    p.kind_ = PotentialKind::Polynomial;
    p.coeffs_ = std::move(coeffs);
    if (p.coeffs_.empty()) p.coeffs_.push_back(0.0);
    for (int i = 0; i <= 1024; ++i) {
        const double x = a + (b - a) * (i / 1024.0);
        if (p.eval(x).v2 < 0.0)
            throw std::invalid_argument("Potential: polynomial is not convex on [a, b]");
    }
    return p;
}

Potential::Eval Potential::eval(double x) const {
    switch (kind_) {
        case PotentialKind::Constant:
            return {c0_, 0.0, 0.0};
        case PotentialKind::Quadratic: {
            const double d = x - center_;
            return {0.5 * weight_ * d * d, weight_ * d, weight_};
        }
        case PotentialKind::Polynomial: {
            // Horner for v, v', v'' simultaneously
            double v = 0.0, v1 = 0.0, v2 = 0.0;
            for (std::size_t j = coeffs_.size(); j-- > 0;) {
                v2 = v2 * x + 2.0 * v1;
                v1 = v1 * x + v;
                v = v * x + coeffs_[j];
            }
            return {v, v1, v2};
        }
    }
    return {0.0, 0.0, 0.0};
}

bool Potential::is_constant() const {
    switch (kind_) {
        case PotentialKind::Constant:
            return true;
        case PotentialKind::Quadratic:
            return weight_ == 0.0;
        case PotentialKind::Polynomial:
            return coeffs_.size() <= 1;
    }
    return false;
}

double Potential::min_on(double a, double b) const {
    switch (kind_) {
        case PotentialKind::Constant:
            return c0_;
        case PotentialKind::Quadratic:
            return value(std::clamp(center_, a, b));
        case PotentialKind::Polynomial: {
            double m = std::min(value(a), value(b));
            for (int i = 1; i < 1024; ++i) m = std::min(m, value(a + (b - a) * (i / 1024.0)));
            return m;
        }
    }
    return 0.0;
}

EnergyModel::EnergyModel(double m_in, Potential v) : m(m_in), potential(std::move(v)) {
    if (!(m >= 1.0)) throw std::invalid_argument("EnergyModel: entropy exponent must be >= 1");
}

double h_x(const EnergyModel& e, double s) {
    if (!(s > 0.0)) throw std::domain_error("h_x: scaled gap must be positive");
    if (e.m == 1.0) return -std::log(s);
    return std::pow(s, 1.0 - e.m) / (e.m - 1.0);
}

double dh_x(const EnergyModel& e, double s) {
    if (!(s > 0.0)) throw std::domain_error("dh_x: scaled gap must be positive");
    return -std::pow(s, -e.m);
}

double ddh_x(const EnergyModel& e, double s) {
    if (!(s > 0.0)) throw std::domain_error("ddh_x: scaled gap must be positive");
    return e.m * std::pow(s, -e.m - 1.0);
}

double total_energy_raw(const EnergyModel& e, std::span<const double> x) {
    const std::size_t k = x.size() - 1;
    const double kd = static_cast<double>(k);
    double entropy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double gap = x[i + 1] - x[i];
        if (!(gap > 0.0)) return kInf;
        const double s = kd * gap;
        entropy += (e.m == 1.0) ? -std::log(s) : std::pow(s, 1.0 - e.m) / (e.m - 1.0);
    }
    double pot = 0.0;
    if (!e.potential.is_constant()) {
        for (std::size_t i = 0; i <= k; ++i) pot += e.potential.value(x[i]);
    } else {
        pot = e.potential.value(x[0]) * static_cast<double>(k + 1);
    }
    return (entropy + pot) / kd;
}

double total_energy(const EnergyModel& e, const IdfVector& x) {
    return total_energy_raw(e, x.values());
}

}  // namespace lagflow
