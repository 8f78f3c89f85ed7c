#include "ga/pipeline.hpp"

#include <algorithm>
#include <numeric>

namespace ga {

namespace {

MarketScenario scenario_from_paths(const PathEnsemble& ensemble, const Box& domain,
                                   const std::vector<std::size_t>& group) {
    const std::size_t n_times = ensemble.n_steps() + 1;
    const std::size_t n = ensemble.n_assets();
    MarketScenario s;
    s.time_grid = ensemble.times();
    s.portfolio_domain = domain;
    s.assets.resize(n);
    s.short_rates.assign(n, std::vector<double>(n_times, 0.0));
    const double inv = 1.0 / static_cast<double>(group.size());
    for (std::size_t j = 0; j < n; ++j) {
        s.assets[j].deflator.assign(n_times, 0.0);
        for (std::size_t t = 0; t < n_times; ++t) {
            double acc_s = 0.0, acc_r = 0.0;
            for (std::size_t p : group) {
                acc_s += ensemble.asset(p, t, j);
                acc_r += ensemble.rate(p, t, j);
            }
            s.assets[j].deflator[t] = acc_s * inv;
            s.short_rates[j][t] = acc_r * inv;
        }
    }
    s.validate();
    return s;
}

} // namespace

MarketScenario scenario_from_path(const PathEnsemble& ensemble, std::size_t path,
                                  const Box& domain) {
    return scenario_from_paths(ensemble, domain, {path});
}

MarketScenario mean_scenario(const PathEnsemble& ensemble, const Box& domain,
                             const std::vector<std::size_t>& group) {
    if (!group.empty()) return scenario_from_paths(ensemble, domain, group);
    std::vector<std::size_t> all(ensemble.n_paths());
    std::iota(all.begin(), all.end(), 0);
    return scenario_from_paths(ensemble, domain, all);
}

std::vector<MarketScenario> quantile_scenarios(const PathEnsemble& ensemble, const Box& domain,
                                               std::size_t n_groups) {
    const std::size_t m = ensemble.n_paths();
    n_groups = std::max<std::size_t>(1, std::min(n_groups, m));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t last = ensemble.n_steps();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ensemble.asset(a, last, 0) < ensemble.asset(b, last, 0);
    });
    std::vector<MarketScenario> out;
    out.reserve(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::size_t lo = g * m / n_groups;
        const std::size_t hi = (g + 1) * m / n_groups;
        std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                       order.begin() + static_cast<std::ptrdiff_t>(hi));
        out.push_back(scenario_from_paths(ensemble, domain, group));
    }
    return out;
}

SpectrumAnalysis analyze_spectrum(const MarketScenario& scenario, std::size_t grid_nodes,
                                  std::size_t k, double tol, double epsilon_kernel,
                                  uint64_t seed, TimeDerivativeMode mode) {
    const XGrid grid(scenario.portfolio_domain, grid_nodes);
    const auto covariant = assemble_covariant(scenario, grid, mode);
    const auto laplacian = assemble_laplacian(covariant);
    SpectrumAnalysis out;
    out.spectral = smallest_eigenpairs(laplacian, k, tol, 600, seed);
    out.epsilon_kernel = epsilon_kernel > 0.0 ? epsilon_kernel : default_epsilon_kernel(grid_nodes);
    out.kernel_dim = kernel_dimension(out.spectral, out.epsilon_kernel);
    out.verdict = is_nflvr(out.spectral, out.epsilon_kernel);
    return out;
}

NflvrVerdict aggregate_verdicts(const std::vector<NflvrVerdict>& verdicts) {
    bool any_inconclusive = false;
    for (const auto v : verdicts) {
        if (v == NflvrVerdict::arbitrage) return NflvrVerdict::arbitrage;
        any_inconclusive = any_inconclusive || v == NflvrVerdict::inconclusive;
    }
    return any_inconclusive ? NflvrVerdict::inconclusive : NflvrVerdict::arbitrage_free;
}

} // namespace ga
