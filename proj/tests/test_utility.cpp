#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "ga/arbitrage.hpp"
#include "ga/utility.hpp"

using namespace ga;

TEST_CASE("utility function shapes") {
    CHECK(UtilityFunction::log_form()(1.0) == 0.0);
    CHECK(UtilityFunction::power_form(2.0)(2.0) == doctest::Approx(0.5));
    CHECK(UtilityFunction::exponential_form(1.0)(0.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)UtilityFunction::power_form(1.0), Error);
    CHECK_THROWS_AS((void)UtilityFunction::power_form(-0.5), Error);
    CHECK_THROWS_AS((void)UtilityFunction::exponential_form(0.0), Error);
}

TEST_CASE("instantaneous return") {
    SUBCASE("flat market returns zero") {
        auto s = fixtures::flat_scenario(1, 17);
        const std::vector<double> x{1.0};
        for (std::size_t t = 0; t < s.n_times(); ++t) {
            CHECK(instantaneous_return(s, x, t) == doctest::Approx(0.0).epsilon(1e-14));
        }
    }

    SUBCASE("exponential deflator with constant rate: g + rho, closed form") {
        const double g = 0.02, rho = 0.03;
        auto s = fixtures::exp_scenario({g}, {rho}, 33);
        const std::vector<double> x{1.2};
        // log D^x is linear in t, so the centered quotient is exact
        for (std::size_t t : {0ul, 5ul, 16ul, 32ul}) {
            CHECK(instantaneous_return(s, x, t) == doctest::Approx(g + rho).epsilon(1e-10));
        }
    }

    SUBCASE("stochastic binned estimate agrees with the nelson-module estimator") {
        ItoModelSpec m;
        m.n_assets = 1;
        m.brownian_dim = 1;
        m.drift.kind = VectorCoefficient::Kind::constant;
        m.drift.value = {0.05};
        m.volatility.kind = MatrixCoefficient::Kind::constant;
        m.volatility.rows = 1;
        m.volatility.cols = 1;
        m.volatility.value = {0.2};
        m.rate_drift.kind = VectorCoefficient::Kind::constant;
        m.rate_drift.value = {0.0};
        m.s0 = {1.0};
        m.r0 = {0.0};
        auto ens = simulate(m, 1.0, 32, 20000, 77);

        // oracle: the nelson mean derivative of log S binned on S (same bins,
        // since log is monotone; r = 0 so the return is the drift part alone)
        SeriesMatrix logs;
        logs.n_paths = ens.n_paths();
        logs.n_times = ens.n_steps() + 1;
        logs.dt = ens.dt();
        logs.values.resize(logs.n_paths * logs.n_times);
        for (std::size_t p = 0; p < logs.n_paths; ++p) {
            for (std::size_t t = 0; t < logs.n_times; ++t) {
                logs.at(p, t) = std::log(ens.asset(p, t, 0));
            }
        }
        const auto oracle = mean_derivative(logs);
        const std::vector<double> x{1.0};
        const auto bins = instantaneous_return_bins(ens, x, 16);
        const auto& oracle_bins = oracle.bins[15];  // same grid time 0.5
        REQUIRE(bins.size() == oracle_bins.size());
        for (std::size_t b = 0; b < bins.size(); ++b) {
            const double se = std::sqrt(bins[b].std_error * bins[b].std_error +
                                        oracle_bins[b].std_error * oracle_bins[b].std_error);
            CHECK(std::abs(bins[b].value - oracle_bins[b].value) < 3.0 * se + 1e-12);
        }
    }
}

TEST_CASE("foc residual equals the curvature component norm exactly") {
    auto s = fixtures::arbitrage_scenario(17);
    const XGrid grid(s.portfolio_domain, 9);
    const auto field = curvature_field(s, grid);
    for (std::size_t t : {0ul, 4ul, 8ul, 16ul}) {
        for (std::size_t m : {0ul, 12ul, 40ul, 80ul}) {
            const auto x = grid.point(m);
            double norm2 = 0.0;
            for (std::size_t d = 0; d < grid.dim(); ++d) {
                norm2 += field.component(t, m, d) * field.component(t, m, d);
            }
            CHECK(foc_residual(s, grid, x, t) == std::sqrt(norm2));
        }
    }
}

TEST_CASE("foc residual on the growth fixture matches the symbolic gradient") {
    auto s = fixtures::arbitrage_scenario(33);
    const XGrid grid(s.portfolio_domain, 17);
    const std::vector<double> x{1.0, 1.0};
    // oracle at t=0, x=(1,1): gradient components (0.01-0.02)/2, (0.03-0.02)/2
    const double oracle = std::hypot(0.005, 0.005);
    CHECK(foc_residual(s, grid, x, 0) == doctest::Approx(oracle).epsilon(1e-4));

    SUBCASE("homogeneous market has zero residual") {
        auto h = fixtures::exp_scenario({0.02, 0.02}, {0.01, 0.01}, 17);
        const XGrid hgrid(h.portfolio_domain, 9);
        CHECK(foc_residual(h, hgrid, x, 4) < 1e-10);
    }

    SUBCASE("off-grid nominals are rejected") {
        const std::vector<double> off{1.01, 1.0};
        CHECK_THROWS_AS((void)foc_residual(s, grid, off, 0), Error);
    }
}

TEST_CASE("expected utility maximization") {
    const auto log_u = UtilityFunction::log_form();

    SUBCASE("homogeneous market: objective flat, any allocation optimal") {
        auto s = fixtures::exp_scenario({0.02, 0.02}, {0.0, 0.0}, 17);
        const XGrid grid(s.portfolio_domain, 5);
        const auto opt = maximize_expected_utility(s, log_u, 2, 14, grid);
        CHECK(opt.flat);
        CHECK(opt.verdict != "interior");

        // oracle: exhaustive evaluation of the per-step returns
        double max_ret = -1e300, min_ret = 1e300;
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double r = instantaneous_return(s, grid.point(m), 5);
            max_ret = std::max(max_ret, r);
            min_ret = std::min(min_ret, r);
        }
        CHECK(max_ret - min_ret < 1e-12);
    }

    SUBCASE("growth fixture pushes to the boundary") {
        auto s = fixtures::arbitrage_scenario(17);
        const XGrid grid(s.portfolio_domain, 5);
        const auto opt = maximize_expected_utility(s, log_u, 0, 16, grid);
        CHECK(opt.boundary);
        CHECK(opt.verdict == "arbitrage-consistent");
        for (double r : opt.foc_along_optimum) CHECK(r > 1e-4);

        // oracle: exhaustive grid search per step (objective is separable)
        for (std::size_t i = 0; i < opt.step_indices.size(); ++i) {
            const std::size_t t = opt.step_indices[i];
            double best = -1e300;
            std::size_t best_node = 0;
            for (std::size_t m = 0; m < grid.size(); ++m) {
                const double r = instantaneous_return(s, grid.point(m), t);
                if (r > best) {
                    best = r;
                    best_node = m;
                }
            }
            CHECK(opt.strategy[i] == grid.point(best_node));
        }
        // higher-growth asset maxed, lower-growth minimized
        CHECK(opt.strategy[0][1] == doctest::Approx(1.5));
        CHECK(opt.strategy[0][0] == doctest::Approx(0.5));
    }

    SUBCASE("zero-curvature fixture with nonflat beta: interior FOC vanishes") {
        // same growth, different scales, constant rate: s = g + rho for every
        // allocation while beta = e^{-(g+rho)t} is nonflat
        auto s = fixtures::exp_scenario({0.02, 0.02}, {0.03, 0.03}, 17, 1.0, {2.0, 0.5});
        const XGrid grid(s.portfolio_domain, 5);
        const auto opt = maximize_expected_utility(s, log_u, 2, 14, grid);
        CHECK_FALSE(opt.verdict == "arbitrage-consistent");
        for (double r : opt.foc_along_optimum) CHECK(r < 1e-6);
    }

    SUBCASE("argmax invariant under positive affine transformations of u") {
        auto s = fixtures::arbitrage_scenario(9);
        const XGrid grid(s.portfolio_domain, 5);
        const auto base = UtilityFunction::power_form(3.0);
        const auto a = maximize_expected_utility(s, base, 0, 8, grid);
        const auto b = maximize_expected_utility(s, base.rescaled(2.5, -7.0), 0, 8, grid);
        CHECK(a.strategy == b.strategy);
        CHECK(a.value != b.value);  // the value itself is not invariant
    }

    SUBCASE("argmax invariant across utility families for a separable objective") {
        auto s = fixtures::arbitrage_scenario(9);
        const XGrid grid(s.portfolio_domain, 5);
        const auto a = maximize_expected_utility(s, log_u, 0, 8, grid);
        const auto b = maximize_expected_utility(s, UtilityFunction::power_form(3.0), 0, 8, grid);
        const auto c =
            maximize_expected_utility(s, UtilityFunction::exponential_form(0.5), 0, 8, grid);
        CHECK(a.strategy == b.strategy);
        CHECK(a.strategy == c.strategy);
    }

    SUBCASE("stochastic objective runs and stays deterministic") {
        ItoModelSpec m;
        m.n_assets = 2;
        m.brownian_dim = 2;
        m.drift.kind = VectorCoefficient::Kind::constant;
        m.drift.value = {0.01, 0.05};
        m.volatility.kind = MatrixCoefficient::Kind::constant;
        m.volatility.rows = 2;
        m.volatility.cols = 2;
        m.volatility.value = {0.15, 0.0, 0.0, 0.15};
        m.rate_drift.kind = VectorCoefficient::Kind::constant;
        m.rate_drift.value = {0.0, 0.0};
        m.s0 = {1.0, 1.0};
        m.r0 = {0.0, 0.0};
        auto ens = simulate(m, 0.5, 8, 2000, 7);
        auto scenario = fixtures::flat_scenario(2, 9, 0.5);

        const XGrid grid(scenario.portfolio_domain, 3);
        const auto a = maximize_expected_utility(scenario, log_u, 0, 8, grid, &ens);
        const auto b = maximize_expected_utility(scenario, log_u, 0, 8, grid, &ens,
                                                 Exec::serial);
        CHECK(a.value == b.value);
        CHECK(a.strategy == b.strategy);
        // drift spread pushes toward the higher-drift asset at most steps
        // (single steps are 2-sigma MC coin flips near the shared start)
        std::size_t favors_high_drift = 0;
        for (const auto& x : a.strategy) {
            if (x[1] > x[0]) ++favors_high_drift;
        }
        CHECK(favors_high_drift >= 6);
    }

    SUBCASE("invalid windows rejected") {
        auto s = fixtures::flat_scenario(1, 9);
        const XGrid grid(s.portfolio_domain, 3);
        CHECK_THROWS_AS((void)maximize_expected_utility(s, log_u, 5, 5, grid), Error);
        CHECK_THROWS_AS((void)maximize_expected_utility(s, log_u, 0, 9, grid), Error);
    }
}
