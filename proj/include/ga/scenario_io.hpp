#pragma once

// Scenario ingestion from JSON and the CSV/report writers used by the CLI.
//
// Scenario document:
//   time_grid          shared array (years)
//   portfolio_domain   per-axis [lo, hi]
//   assets             per-asset {deflator, short_rate, optional
//                      term_structure {maturity_offsets, values row-major}}
//   ito_model          optional coefficient block for simulation
//   simulation         optional {horizon, steps, paths, seed}
// All reals in decimal notation, times in years.

#include <json.hpp>

#include <optional>
#include <string>

#include "ga/arbitrage.hpp"
#include "ga/gauge_algebra.hpp"
#include "ga/laplacian.hpp"
#include "ga/market_model.hpp"
#include "ga/nelson.hpp"
#include "ga/simulation.hpp"

namespace ga {

struct SimulationConfig {
    double horizon = 1.0;
    std::size_t steps = 64;
    std::size_t paths = 1000;
    uint64_t seed = 0;
};

struct ScenarioFile {
    std::optional<MarketScenario> scenario;
    std::optional<ItoModelSpec> ito;
    std::optional<SimulationConfig> simulation;
    Box domain;
    nlohmann::json raw;
};

ScenarioFile load_scenario_file(const std::string& path);

MarketScenario scenario_from_json(const nlohmann::json& doc);
ItoModelSpec ito_from_json(const nlohmann::json& doc);
CashflowIntensity intensity_from_json(const nlohmann::json& doc);

void write_ensemble_csv(const PathEnsemble& ensemble, const std::string& path);
void write_estimate_csv(const DerivativeEstimate& estimate, const std::string& path);
void write_curvature_csv(const CurvatureField& field, const std::string& path);
void write_section_csv(const SectionGrid& section, const std::string& path);

// FNV-1a over the canonical dump; embedded in every report.
std::string config_hash(const nlohmann::json& config);

void write_text_file(const std::string& path, const std::string& content);

} // namespace ga
