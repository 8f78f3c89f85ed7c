#pragma once

// Cashflow intensities, their convolution semigroup, and gauge transforms.
//
// An intensity is a compactly supported weighting of maturities: Dirac atoms
// plus a density on [0, H]. Atoms are handled analytically. Densities are
// stored as piecewise polynomials so that convolution of the
// piecewise-constant input class (and anything it generates) stays closed
// form; convolving two degree-0 densities yields degree 1, and so on.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ga/errors.hpp"
#include "ga/market_model.hpp"

namespace ga {

// Polynomial in the global variable, monomial coefficients c[0] + c[1] t + ...
struct Poly {
    std::vector<double> c;

    double eval(double t) const {
        double v = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) v = v * t + c[i];
        return v;
    }
    std::size_t degree() const { return c.empty() ? 0 : c.size() - 1; }

    Poly operator+(const Poly& o) const;
    Poly operator*(const Poly& o) const;
    Poly scaled(double s) const;
    Poly antiderivative() const;
    // P(a + b t) as a polynomial in t.
    Poly composed_linear(double a, double b) const;
};

struct DensitySegment {
    double lo = 0.0;
    double hi = 0.0;
    Poly poly;  // value on [lo, hi)
};

class PiecewiseDensity {
public:
    PiecewiseDensity() = default;
    explicit PiecewiseDensity(std::vector<DensitySegment> segments);

    const std::vector<DensitySegment>& segments() const { return segments_; }
    bool empty() const { return segments_.empty(); }
    double support_end() const { return segments_.empty() ? 0.0 : segments_.back().hi; }

    double value_at(double t) const;
    double integral() const;

private:
    std::vector<DensitySegment> segments_;  // sorted, non-overlapping
};

struct CashflowIntensity {
    std::vector<std::pair<double, double>> atoms;  // (location >= 0, weight)
    PiecewiseDensity density;

    static CashflowIntensity dirac(double location, double weight = 1.0);
    // breakpoints.size() == values.size() + 1: cellwise-constant density;
    // breakpoints.size() == values.size(): nodal values, linear between.
    static CashflowIntensity piecewise(const std::vector<double>& breakpoints,
                                       const std::vector<double>& values);

    double support_end() const;
    void validate() const;
};

// Convolution product. Atom x atom gives an atom at the summed location,
// atom x density shifts the density, density x density is evaluated in
// closed form segment against segment.
CashflowIntensity convolve(const CashflowIntensity& a, const CashflowIntensity& b);

// Gauge transform: D^pi_t = D_t I(t,0), P^pi[t,u] = I(t,u)/I(t,0) with
// I(t,u) = sum_atoms w P[t,u+h] + int density(h) P[t,u+h] dh.
// The transformed surface keeps the offsets for which u + H fits in the
// stored maturity range. Throws TransformSingular when |I(t,0)| < 1e-12.
Gauge apply_gauge_transform(const Gauge& gauge, const CashflowIntensity& intensity);

// Renormalizes all deflators by the numeraire portfolio deflator; the
// numeraire portfolio's own deflator becomes identically 1.
MarketScenario numeraire_transform(const MarketScenario& scenario,
                                   std::span<const double> x_num);

} // namespace ga
