#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "ga/pipeline.hpp"

using namespace ga;

namespace {

ItoModelSpec gbm(double alpha, double sigma) {
    ItoModelSpec m;
    m.n_assets = 1;
    m.brownian_dim = 1;
    m.drift.kind = VectorCoefficient::Kind::constant;
    m.drift.value = {alpha};
    m.volatility.kind = MatrixCoefficient::Kind::constant;
    m.volatility.rows = 1;
    m.volatility.cols = 1;
    m.volatility.value = {sigma};
    m.rate_drift.kind = VectorCoefficient::Kind::constant;
    m.rate_drift.value = {0.0};
    m.s0 = {1.0};
    m.r0 = {0.01};
    return m;
}

} // namespace

TEST_CASE("single-path scenario replays the path") {
    auto ens = simulate(gbm(0.05, 0.2), 1.0, 16, 20, 3);
    const auto s = scenario_from_path(ens, 7, fixtures::unit_box(1));
    REQUIRE(s.n_times() == 17);
    for (std::size_t t = 0; t < s.n_times(); ++t) {
        CHECK(s.assets[0].deflator[t] == ens.asset(7, t, 0));
        CHECK(s.short_rates[0][t] == ens.rate(7, t, 0));
    }
}

TEST_CASE("mean scenario averages the ensemble") {
    auto ens = simulate(gbm(0.05, 0.2), 1.0, 8, 500, 5);
    const auto s = mean_scenario(ens, fixtures::unit_box(1));
    for (std::size_t t : {0ul, 4ul, 8ul}) {
        double acc = 0.0;
        for (std::size_t p = 0; p < ens.n_paths(); ++p) acc += ens.asset(p, t, 0);
        CHECK(s.assets[0].deflator[t] ==
              doctest::Approx(acc / static_cast<double>(ens.n_paths())).epsilon(1e-12));
    }
}

TEST_CASE("quantile blocks partition the paths and order by terminal value") {
    auto ens = simulate(gbm(0.05, 0.25), 1.0, 8, 1000, 9);
    const auto blocks = quantile_scenarios(ens, fixtures::unit_box(1), 4);
    REQUIRE(blocks.size() == 4);
    const std::size_t last = ens.n_steps();
    for (std::size_t b = 1; b < blocks.size(); ++b) {
        CHECK(blocks[b].assets[0].deflator[last] > blocks[b - 1].assets[0].deflator[last]);
    }
}

TEST_CASE("stochastic spectrum pipeline: smoothed GBM blocks are arbitrage-free") {
    // a single-asset market always admits a pricing kernel; every quantile
    // block of conditional means must read arbitrage-free
    auto ens = simulate(gbm(0.04, 0.2), 1.0, 16, 2000, 11);
    const auto blocks = quantile_scenarios(ens, fixtures::unit_box(1), 3);
    std::vector<NflvrVerdict> verdicts;
    for (const auto& block : blocks) {
        const auto analysis = analyze_spectrum(block, 17, 2, 1e-10, 0.0, 0,
                                               TimeDerivativeMode::nelson_smoothed);
        REQUIRE(analysis.spectral.converged);
        CHECK(analysis.kernel_dim == 1);
        verdicts.push_back(analysis.verdict);
    }
    CHECK(aggregate_verdicts(verdicts) == NflvrVerdict::arbitrage_free);
}

TEST_CASE("verdict aggregation across scenario blocks") {
    using V = NflvrVerdict;
    CHECK(aggregate_verdicts({V::arbitrage_free, V::arbitrage_free}) == V::arbitrage_free);
    CHECK(aggregate_verdicts({V::arbitrage_free, V::arbitrage}) == V::arbitrage);
    CHECK(aggregate_verdicts({V::inconclusive, V::arbitrage_free}) == V::inconclusive);
    CHECK(aggregate_verdicts({V::inconclusive, V::arbitrage}) == V::arbitrage);
}

TEST_CASE("analyze_spectrum applies the resolution-scaled default threshold") {
    auto s = fixtures::free_scenario(17);
    const auto analysis = analyze_spectrum(s, 17, 2, 1e-10, 0.0);
    CHECK(analysis.epsilon_kernel == doctest::Approx(default_epsilon_kernel(17)));
    CHECK(analysis.verdict == NflvrVerdict::arbitrage_free);

    const auto pinned = analyze_spectrum(s, 17, 2, 1e-10, 1e-3);
    CHECK(pinned.epsilon_kernel == 1e-3);
}
