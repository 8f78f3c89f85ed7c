#pragma once

// Gauges, market scenarios and the portfolio-level deflator / forward-rate /
// short-rate formulas. A gauge is one asset's (deflator path, term-structure
// surface) pair; the term structure is stored on a rectangular
// (valuation time x maturity offset) grid with linear interpolation in the
// offset direction.

#include <cstddef>
#include <span>
#include <vector>

#include "ga/errors.hpp"
#include "ga/grid.hpp"

namespace ga {

// Rectangular surface over (time index, maturity offset). Used both for
// term structures P[t, t+u] and instantaneous forward surfaces f[t, t+u].
struct MaturitySurface {
    std::vector<double> offsets;  // u_0 = 0 < u_1 < ... (years)
    std::vector<double> values;   // row-major: values[t * offsets.size() + k]
    std::size_t n_times = 0;

    std::size_t n_offsets() const { return offsets.size(); }

    double at_node(std::size_t t, std::size_t k) const {
        return values[t * offsets.size() + k];
    }
    double& at_node(std::size_t t, std::size_t k) {
        return values[t * offsets.size() + k];
    }

    // Linear interpolation in the offset direction.
    double at(std::size_t t, double offset) const;

    bool empty() const { return values.empty(); }
};

struct Gauge {
    std::vector<double> deflator;    // D_t on the scenario time grid
    MaturitySurface term_structure;  // P[t, t+u], positive, P[t,0] = 1

    // Checks P > 0 and P[t,0] = 1 at every stored node.
    void validate() const;
};

struct MarketScenario {
    std::vector<double> time_grid;               // strictly increasing, years
    std::vector<Gauge> assets;
    std::vector<std::vector<double>> short_rates;  // [asset][time], 1/year
    Box portfolio_domain;

    std::size_t n_assets() const { return assets.size(); }
    std::size_t n_times() const { return time_grid.size(); }

    // Per-asset instantaneous forward surfaces derived from the term
    // structures; filled by validate().
    std::vector<MaturitySurface> forward_surfaces;

    void validate();
};

struct PortfolioPoint {
    std::vector<double> nominals;
    std::size_t time_index = 0;

    // nominals inside the portfolio domain, index on the grid
    void validate(const MarketScenario& scenario) const;
};

// Relative floor under which D^x is treated as singular: divisions by D^x
// downstream would blow up. The floor scales with the largest deflator
// magnitude at that time.
inline constexpr double kDeflatorFloorRel = 1e-8;

double deflator_floor(const MarketScenario& scenario, std::size_t t);

// D^x_t = sum_j x_j D^j_t. Throws DeflatorSingular below the floor.
double portfolio_deflator(const MarketScenario& scenario, std::span<const double> x,
                          std::size_t t);

// r^x_t = sum_j (x_j D^j_t / D^x_t) r^j_t.
double portfolio_short_rate(const MarketScenario& scenario, std::span<const double> x,
                            std::size_t t);

// f^x_{t,u} = sum_j (x_j D^j_t / D^x_t) f^j_{t,u}.
double portfolio_forward_rate(const MarketScenario& scenario, std::span<const double> x,
                              std::size_t t, double maturity_offset);

// P^x_{t,t+u} = exp(-int_0^u f^x_{t,h} dh), trapezoid over the stored
// maturity nodes inside [0, u].
double portfolio_term_structure(const MarketScenario& scenario, std::span<const double> x,
                                std::size_t t, double maturity_offset);

// f = -d/du log P, centered differences in the offset direction with
// second-order one-sided stencils at the ends.
MaturitySurface forward_from_term_structure(const MaturitySurface& term);

// P[t,u] = exp(-int_0^u f dh), trapezoid in the exponent; P[t,0] = 1 exact.
MaturitySurface term_structure_from_forward(const MaturitySurface& forward);

// Flat-in-maturity surface built from a short-rate path: f[t,u] = r_t.
MaturitySurface flat_forward_surface(const std::vector<double>& short_rate,
                                     double max_offset, std::size_t n_offsets);

} // namespace ga
