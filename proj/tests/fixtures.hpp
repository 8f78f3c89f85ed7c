#pragma once

// Shared deterministic fixtures for the test suites.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ga/market_model.hpp"

namespace fixtures {

inline ga::Box unit_box(std::size_t dim, double lo = 0.5, double hi = 1.5) {
    ga::Box box;
    box.lo.assign(dim, lo);
    box.hi.assign(dim, hi);
    return box;
}

// D^j_t = scale_j * exp(g_j t), constant short rates; term structures are the
// flat-in-maturity ones implied by the rates.
inline ga::MarketScenario exp_scenario(const std::vector<double>& growths,
                                       const std::vector<double>& rates,
                                       std::size_t n_times = 33, double horizon = 1.0,
                                       const std::vector<double>& scales = {}) {
    ga::MarketScenario s;
    const std::size_t n = growths.size();
    s.time_grid.resize(n_times);
    for (std::size_t i = 0; i < n_times; ++i) {
        s.time_grid[i] = horizon * static_cast<double>(i) / static_cast<double>(n_times - 1);
    }
    s.portfolio_domain = unit_box(n);
    for (std::size_t j = 0; j < n; ++j) {
        ga::Gauge g;
        const double scale = scales.empty() ? 1.0 : scales[j];
        g.deflator.resize(n_times);
        for (std::size_t i = 0; i < n_times; ++i) {
            g.deflator[i] = scale * std::exp(growths[j] * s.time_grid[i]);
        }
        s.assets.push_back(std::move(g));
        s.short_rates.emplace_back(n_times, rates[j]);
    }
    s.validate();
    return s;
}

inline ga::MarketScenario flat_scenario(std::size_t n_assets, std::size_t n_times = 33,
                                        double horizon = 1.0) {
    return exp_scenario(std::vector<double>(n_assets, 0.0), std::vector<double>(n_assets, 0.0),
                        n_times, horizon);
}

// The two-asset growth fixture with zero rates: curvature is nonzero and the
// Laplacian kernel is empty.
inline ga::MarketScenario arbitrage_scenario(std::size_t n_times = 33, double horizon = 1.0) {
    return exp_scenario({0.01, 0.03}, {0.0, 0.0}, n_times, horizon);
}

// Single asset D = e^{gt} with r = -g: the no-arbitrage condition holds with
// beta = 1 and harmonic section 1/D^x.
inline ga::MarketScenario free_scenario(std::size_t n_times = 33, double horizon = 1.0,
                                        double growth = 0.01) {
    return exp_scenario({growth}, {-growth}, n_times, horizon);
}

} // namespace fixtures
