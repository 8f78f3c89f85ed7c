#pragma once

// Curvature of the market connection, the range condition for the Ito
// dynamics, the least-squares market price of risk, and the Novikov
// integrability diagnostic.
//
// The curvature 2-form at (x, t) is stored through its dx_j ^ dt component
// vector R_j = d/dx_j [ D log D^x_t + r^x_t ] at fibre factor g = 1: the
// fibre coordinate only scales R, so verdicts do not depend on it.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ga/exec.hpp"
#include "ga/grid.hpp"
#include "ga/market_model.hpp"
#include "ga/nelson.hpp"
#include "ga/simulation.hpp"

namespace ga {

// s(x,t) = D log D^x_t + r^x_t for a deterministic scenario: centered time
// differences of log|D^x| (second-order one-sided at the ends) plus the
// portfolio short rate. This is also the synthetic-bond instantaneous
// return, shared with the utility module.
double instantaneous_return(const MarketScenario& scenario, std::span<const double> x,
                            std::size_t t);

// Binned estimate of s(x,t) from an ensemble: per-path mean quotient of
// log D^x plus the pathwise r^x, conditioned on equal-count bins of the
// reference state (asset 0). All x-nodes share the bin memberships so that
// x-differences stay meaningful per bin.
std::vector<DerivativeBin> instantaneous_return_bins(const PathEnsemble& ensemble,
                                                     std::span<const double> x, std::size_t t,
                                                     const NelsonOptions& options = {});

struct CurvatureField {
    std::vector<double> times;
    XGrid x_grid;
    std::size_t n_components = 0;
    // components[(t * nodes + node) * N + j]; valid where usable
    std::vector<double> components;
    std::vector<unsigned char> usable;  // per (t, node)
    double sup_norm = 0.0;              // max over usable nodes of |R(x,t)|_2

    double component(std::size_t t, std::size_t node, std::size_t j) const {
        return components[(t * x_grid.size() + node) * n_components + j];
    }
};

CurvatureField curvature_field(const MarketScenario& scenario, const XGrid& x_grid,
                               Exec exec = Exec::parallel);

// Stochastic variant: sup-norm over usable bins only; bins with fewer than
// min_bin_count samples are excluded.
CurvatureField curvature_field(const PathEnsemble& ensemble, const XGrid& x_grid,
                               const NelsonOptions& options = {}, Exec exec = Exec::parallel);

struct RangeTestEntry {
    double time = 0.0;
    double residual = 0.0;           // |(I - Pi_sigma)(alpha - c/2 + r)|
    double target_norm = 0.0;        // |alpha - c/2 + r|
    std::vector<double> lambda;      // least-squares market price of risk
    bool rank_deficient = false;
    bool zero_curvature = false;     // residual < zc_tol_rel * target_norm
};

struct RangeTestReport {
    std::vector<RangeTestEntry> entries;
    bool all_zero_curvature = true;
    double zc_tol_rel = 1e-6;
};

inline constexpr double kZcTolRel = 1e-6;
inline constexpr double kRankTolRel = 1e-10;

// Single-time range test: v = alpha - bracket_correction/2 + r, residual of
// the component of v orthogonal to the column space of sigma (N x K,
// row-major), rank tolerance 1e-10 relative to the largest singular value.
RangeTestEntry zc_range_test(std::span<const double> alpha, std::span<const double> sigma,
                             std::size_t brownian_dim, std::span<const double> short_rate,
                             std::span<const double> bracket_correction, double time = 0.0);

struct MarketPriceOfRisk {
    std::vector<double> lambda;  // minimum-norm least-squares solution
    double residual = 0.0;
    bool rank_deficient = false;
};

MarketPriceOfRisk market_price_of_risk(std::span<const double> alpha,
                                       std::span<const double> sigma, std::size_t brownian_dim,
                                       std::span<const double> short_rate,
                                       std::span<const double> bracket_correction);

struct NovikovReport {
    double estimate = 0.0;        // MC mean of exp( int (alpha^x / |sigma^x|)^2 / 2 )
    double std_error = 0.0;
    double max_exponent = 0.0;
    std::vector<double> prefix_max_exponent;  // over M/4, M/2, M paths
    double tail_slope = 0.0;                  // log-sample-max growth per doubling
    std::string verdict;                      // "consistent with finite" | "diverging"
};

// Finiteness cannot be proven by sampling; the verdict is a diagnostic based
// on the growth of the sample max across doubling prefixes.
NovikovReport novikov_diagnostic(const ItoModelSpec& spec, std::span<const double> x,
                                 double horizon, const PathEnsemble& ensemble,
                                 Exec exec = Exec::parallel);

} // namespace ga
