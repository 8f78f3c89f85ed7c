#pragma once

// Glue between simulated ensembles and the deterministic spectral pipeline.
// The section Hilbert space integrates over scenarios; the operator is
// block-diagonal across them, so stochastic runs are handled by building
// representative deterministic scenarios (binned conditional means of the
// ensemble) and aggregating per-block verdicts.

#include <cstddef>
#include <vector>

#include "ga/grid.hpp"
#include "ga/laplacian.hpp"
#include "ga/market_model.hpp"
#include "ga/simulation.hpp"

namespace ga {

// One sampled path as a deterministic scenario (deflator = asset path,
// short rate = rate path, flat-in-maturity term structure).
MarketScenario scenario_from_path(const PathEnsemble& ensemble, std::size_t path,
                                  const Box& domain);

// Conditional-mean scenario over a subset of paths (all paths when the
// group is empty): the smoothed coefficient fields the spectral pipeline
// consumes.
MarketScenario mean_scenario(const PathEnsemble& ensemble, const Box& domain,
                             const std::vector<std::size_t>& group = {});

// Partition paths into quantile groups by terminal asset-0 value and build
// one conditional-mean scenario per group.
std::vector<MarketScenario> quantile_scenarios(const PathEnsemble& ensemble, const Box& domain,
                                               std::size_t n_groups);

struct SpectrumAnalysis {
    SpectralResult spectral;
    double epsilon_kernel = 0.0;
    std::size_t kernel_dim = 0;
    NflvrVerdict verdict = NflvrVerdict::inconclusive;
};

// Assemble, solve, and judge one deterministic scenario block.
// epsilon_kernel <= 0 selects the resolution-scaled default.
SpectrumAnalysis analyze_spectrum(const MarketScenario& scenario, std::size_t grid_nodes,
                                  std::size_t k, double tol, double epsilon_kernel,
                                  uint64_t seed = 0,
                                  TimeDerivativeMode mode = TimeDerivativeMode::classical_centered);

// Verdict over scenario blocks: ARBITRAGE if any block is, else
// INCONCLUSIVE if any block is, else ARBITRAGE-FREE.
NflvrVerdict aggregate_verdicts(const std::vector<NflvrVerdict>& verdicts);

} // namespace ga
