#include "ga/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ga {

double MaturitySurface::at(std::size_t t, double offset) const {
    if (offsets.empty()) {
        throw Error(ErrorCode::maturity_out_of_range, "surface has no maturity nodes");
    }
    const double tol = 1e-12 * std::max(1.0, offsets.back());
    if (offset < offsets.front() - tol || offset > offsets.back() + tol) {
        throw Error(ErrorCode::maturity_out_of_range,
                    "offset " + std::to_string(offset) + " outside [" +
                        std::to_string(offsets.front()) + ", " +
                        std::to_string(offsets.back()) + "]");
    }
    offset = std::clamp(offset, offsets.front(), offsets.back());
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), offset);
    std::size_t hi = static_cast<std::size_t>(it - offsets.begin());
    if (hi == 0) hi = 1;
    if (hi == offsets.size()) hi = offsets.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = (offset - offsets[lo]) / (offsets[hi] - offsets[lo]);
    return at_node(t, lo) * (1.0 - w) + at_node(t, hi) * w;
}

void Gauge::validate() const {
    const auto& ts = term_structure;
    if (ts.empty()) return;
    if (ts.offsets.empty() || ts.offsets.front() != 0.0) {
        throw Error(ErrorCode::config_invalid, "term structure must start at offset 0");
    }
    for (std::size_t k = 1; k < ts.offsets.size(); ++k) {
        if (!(ts.offsets[k] > ts.offsets[k - 1])) {
            throw Error(ErrorCode::config_invalid, "maturity offsets must be increasing");
        }
    }
    for (std::size_t t = 0; t < ts.n_times; ++t) {
        if (ts.at_node(t, 0) != 1.0) {
            throw Error(ErrorCode::non_positive_term_structure,
                        "P[t,t] != 1 at time index " + std::to_string(t));
        }
        for (std::size_t k = 0; k < ts.offsets.size(); ++k) {
            if (!(ts.at_node(t, k) > 0.0)) {
                throw Error(ErrorCode::non_positive_term_structure,
                            "P <= 0 at time index " + std::to_string(t));
            }
        }
    }
}

void MarketScenario::validate() {
    if (assets.empty()) throw Error(ErrorCode::config_invalid, "scenario has no assets");
    if (time_grid.size() < 2) {
        throw Error(ErrorCode::config_invalid, "time grid needs at least 2 points");
    }
    for (std::size_t i = 1; i < time_grid.size(); ++i) {
        if (!(time_grid[i] > time_grid[i - 1])) {
            throw Error(ErrorCode::config_invalid, "time grid must be strictly increasing");
        }
    }
    if (short_rates.size() != assets.size()) {
        throw Error(ErrorCode::config_invalid, "short_rates must match asset count");
    }
    if (portfolio_domain.dim() != assets.size()) {
        throw Error(ErrorCode::config_invalid, "portfolio domain dimension != asset count");
    }
    for (const auto& a : assets) {
        if (a.deflator.size() != time_grid.size()) {
            throw Error(ErrorCode::grid_mismatch, "deflator path length != time grid");
        }
        if (!a.term_structure.empty() && a.term_structure.n_times != time_grid.size()) {
            throw Error(ErrorCode::grid_mismatch, "term structure rows != time grid");
        }
        a.validate();
    }
    for (const auto& r : short_rates) {
        if (r.size() != time_grid.size()) {
            throw Error(ErrorCode::grid_mismatch, "short rate path length != time grid");
        }
    }

    // Assets without an explicit term structure get the flat-in-maturity
    // surface implied by their short-rate path, so r_t = f_{t,0} holds.
    const double horizon = time_grid.back() - time_grid.front();
    const double max_offset = std::max(horizon, 1.0) * 2.0;
    forward_surfaces.clear();
    forward_surfaces.reserve(assets.size());
    for (std::size_t j = 0; j < assets.size(); ++j) {
        if (assets[j].term_structure.empty()) {
            auto fwd = flat_forward_surface(short_rates[j], max_offset, 9);
            assets[j].term_structure = term_structure_from_forward(fwd);
            forward_surfaces.push_back(std::move(fwd));
        } else {
            forward_surfaces.push_back(forward_from_term_structure(assets[j].term_structure));
        }
    }
}

void PortfolioPoint::validate(const MarketScenario& scenario) const {
    if (time_index >= scenario.n_times()) {
        throw Error(ErrorCode::config_invalid, "portfolio point time index out of range");
    }
    if (!scenario.portfolio_domain.contains(nominals)) {
        throw Error(ErrorCode::config_invalid, "nominals outside the portfolio domain");
    }
}

double deflator_floor(const MarketScenario& scenario, std::size_t t) {
    double max_abs = 0.0;
    for (const auto& a : scenario.assets) max_abs = std::max(max_abs, std::abs(a.deflator[t]));
    return kDeflatorFloorRel * max_abs;
}

double portfolio_deflator(const MarketScenario& scenario, std::span<const double> x,
                          std::size_t t) {
    if (x.size() != scenario.n_assets()) {
        throw Error(ErrorCode::dimension_mismatch, "nominal vector size != asset count");
    }
    double dx = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) dx += x[j] * scenario.assets[j].deflator[t];
    if (std::abs(dx) < deflator_floor(scenario, t)) {
        throw Error(ErrorCode::deflator_singular,
                    "|D^x| below floor at time index " + std::to_string(t));
    }
    return dx;
}

double portfolio_short_rate(const MarketScenario& scenario, std::span<const double> x,
                            std::size_t t) {
    const double dx = portfolio_deflator(scenario, x, t);
    double r = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        r += x[j] * scenario.assets[j].deflator[t] / dx * scenario.short_rates[j][t];
    }
    return r;
}

double portfolio_forward_rate(const MarketScenario& scenario, std::span<const double> x,
                              std::size_t t, double maturity_offset) {
    const double dx = portfolio_deflator(scenario, x, t);
    double f = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        f += x[j] * scenario.assets[j].deflator[t] / dx *
             scenario.forward_surfaces[j].at(t, maturity_offset);
    }
    return f;
}

double portfolio_term_structure(const MarketScenario& scenario, std::span<const double> x,
                                std::size_t t, double maturity_offset) {
    if (maturity_offset < 0.0) {
        throw Error(ErrorCode::maturity_out_of_range, "offset must be >= 0");
    }
    if (maturity_offset == 0.0) return 1.0;
    // integration nodes: stored offsets inside (0, u) plus the endpoint
    std::vector<double> nodes{0.0};
    for (double u : scenario.forward_surfaces.front().offsets) {
        if (u > 0.0 && u < maturity_offset) nodes.push_back(u);
    }
    nodes.push_back(maturity_offset);
    double integral = 0.0;
    double prev = portfolio_forward_rate(scenario, x, t, nodes[0]);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double cur = portfolio_forward_rate(scenario, x, t, nodes[i]);
        integral += 0.5 * (prev + cur) * (nodes[i] - nodes[i - 1]);
        prev = cur;
    }
    return std::exp(-integral);
}

MaturitySurface forward_from_term_structure(const MaturitySurface& term) {
    const std::size_t n = term.offsets.size();
    if (n < 3) {
        throw Error(ErrorCode::config_invalid,
                    "need at least 3 maturity nodes to differentiate");
    }
    for (double v : term.values) {
        if (!(v > 0.0)) {
            throw Error(ErrorCode::non_positive_term_structure, "P <= 0 on the grid");
        }
    }
    MaturitySurface fwd;
    fwd.offsets = term.offsets;
    fwd.n_times = term.n_times;
    fwd.values.resize(term.values.size());
    std::vector<double> logp(n);
    for (std::size_t t = 0; t < term.n_times; ++t) {
        for (std::size_t k = 0; k < n; ++k) logp[k] = std::log(term.at_node(t, k));
        const auto& u = term.offsets;
        // f = -d(logP)/du, second order everywhere (assumes locally uniform
        // spacing for the one-sided ends; interior stencil handles nonuniform).
        fwd.at_node(t, 0) =
            -(-3.0 * logp[0] + 4.0 * logp[1] - logp[2]) / (u[2] - u[0]);
        for (std::size_t k = 1; k + 1 < n; ++k) {
            fwd.at_node(t, k) = -(logp[k + 1] - logp[k - 1]) / (u[k + 1] - u[k - 1]);
        }
        fwd.at_node(t, n - 1) =
            -(3.0 * logp[n - 1] - 4.0 * logp[n - 2] + logp[n - 3]) / (u[n - 1] - u[n - 3]);
    }
    return fwd;
}

MaturitySurface term_structure_from_forward(const MaturitySurface& forward) {
    for (double v : forward.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::config_invalid, "forward surface has non-finite values");
        }
    }
    MaturitySurface term;
    term.offsets = forward.offsets;
    term.n_times = forward.n_times;
    term.values.resize(forward.values.size());
    const std::size_t n = forward.offsets.size();
    for (std::size_t t = 0; t < forward.n_times; ++t) {
        double integral = 0.0;
        term.at_node(t, 0) = 1.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double du = forward.offsets[k] - forward.offsets[k - 1];
            integral += 0.5 * (forward.at_node(t, k - 1) + forward.at_node(t, k)) * du;
            term.at_node(t, k) = std::exp(-integral);
        }
    }
    return term;
}

MaturitySurface flat_forward_surface(const std::vector<double>& short_rate,
                                     double max_offset, std::size_t n_offsets) {
    MaturitySurface fwd;
    fwd.n_times = short_rate.size();
    fwd.offsets.resize(n_offsets);
    for (std::size_t k = 0; k < n_offsets; ++k) {
        fwd.offsets[k] = max_offset * static_cast<double>(k) / static_cast<double>(n_offsets - 1);
    }
    fwd.values.resize(short_rate.size() * n_offsets);
    for (std::size_t t = 0; t < short_rate.size(); ++t) {
        for (std::size_t k = 0; k < n_offsets; ++k) fwd.at_node(t, k) = short_rate[t];
    }
    return fwd;
}

} // namespace ga
