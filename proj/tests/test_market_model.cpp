#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "ga/errors.hpp"
#include "ga/market_model.hpp"
#include "ga/philox.hpp"

using namespace ga;

namespace {

MarketScenario two_asset_at(const std::vector<double>& deflators,
                            const std::vector<double>& rates) {
    MarketScenario s;
    s.time_grid = {0.0, 0.5, 1.0};
    s.portfolio_domain = fixtures::unit_box(deflators.size(), -10.0, 10.0);
    for (std::size_t j = 0; j < deflators.size(); ++j) {
        Gauge g;
        g.deflator = {deflators[j], deflators[j], deflators[j]};
        s.assets.push_back(std::move(g));
        s.short_rates.push_back({rates[j], rates[j], rates[j]});
    }
    s.validate();
    return s;
}

MaturitySurface surface_from(const std::vector<double>& offsets, std::size_t n_times,
                             double (*f)(double)) {
    MaturitySurface p;
    p.offsets = offsets;
    p.n_times = n_times;
    p.values.resize(n_times * offsets.size());
    for (std::size_t t = 0; t < n_times; ++t) {
        for (std::size_t k = 0; k < offsets.size(); ++k) p.at_node(t, k) = f(offsets[k]);
    }
    return p;
}

} // namespace

TEST_CASE("portfolio deflator basics") {
    auto s = two_asset_at({1.0, 1.0}, {0.0, 0.0});
    const std::vector<double> x{1.0, 1.0};
    CHECK(portfolio_deflator(s, x, 0) == doctest::Approx(2.0));

    auto s2 = two_asset_at({100.0, 102.0}, {0.0, 0.0});
    const std::vector<double> mid{0.5, 0.5};
    CHECK(portfolio_deflator(s2, mid, 1) == doctest::Approx(101.0));

    // exact cancellation trips the singularity guard
    auto s3 = two_asset_at({3.0, 6.0}, {0.0, 0.0});
    const std::vector<double> bad{2.0, -1.0};
    CHECK_THROWS_AS((void)portfolio_deflator(s3, bad, 0), Error);
    try {
        (void)portfolio_deflator(s3, bad, 0);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::deflator_singular);
    }
}

TEST_CASE("portfolio short rate weighting") {
    auto s = two_asset_at({1.0, 1.0}, {0.01, 0.03});
    const std::vector<double> x{1.0, 1.0};
    CHECK(portfolio_short_rate(s, x, 0) == doctest::Approx(0.02));

    const std::vector<double> e1{1.0, 0.0};
    CHECK(portfolio_short_rate(s, e1, 2) == doctest::Approx(0.01));

    // oracle: exact rational weighted average (2*0.02 + 3*0.04)/5
    auto s2 = two_asset_at({2.0, 1.0}, {0.02, 0.04});
    const std::vector<double> x2{1.0, 3.0};
    CHECK(portfolio_short_rate(s2, x2, 0) == doctest::Approx(0.032).epsilon(1e-12));
}

TEST_CASE("portfolio forward rate weighting") {
    auto s = two_asset_at({1.0, 2.0}, {0.03, 0.03});
    const std::vector<double> x{0.7, 1.3};
    // flat identical curves: any admissible x sees 0.03
    CHECK(portfolio_forward_rate(s, x, 0, 0.5) == doctest::Approx(0.03).epsilon(1e-10));

    auto s2 = two_asset_at({1.0, 1.0}, {0.02, 0.04});
    const std::vector<double> e1{1.0, 0.0};
    CHECK(portfolio_forward_rate(s2, e1, 1, 0.25) == doctest::Approx(0.02).epsilon(1e-10));
    const std::vector<double> x11{1.0, 1.0};
    CHECK(portfolio_forward_rate(s2, x11, 1, 0.25) == doctest::Approx(0.03).epsilon(1e-10));
}

TEST_CASE("forward from term structure") {
    std::vector<double> offsets;
    for (int k = 0; k <= 20; ++k) offsets.push_back(0.1 * k);

    SUBCASE("flat curve is exact") {
        auto p = surface_from(offsets, 2, [](double u) { return std::exp(-0.03 * u); });
        auto f = forward_from_term_structure(p);
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            CHECK(f.at_node(0, k) == doctest::Approx(0.03).epsilon(1e-12));
        }
    }

    SUBCASE("linear forward curve, symbolic oracle") {
        // P = exp(-(0.02 u + 0.005 u^2)) => f(u) = 0.02 + 0.01 u
        auto p = surface_from(offsets, 2,
                              [](double u) { return std::exp(-(0.02 * u + 0.005 * u * u)); });
        auto f = forward_from_term_structure(p);
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            CHECK(f.at_node(1, k) ==
                  doctest::Approx(0.02 + 0.01 * offsets[k]).epsilon(1e-9));
        }
    }

    SUBCASE("non-positive surface rejected") {
        auto p = surface_from(offsets, 1, [](double u) { return 1.0 - 0.6 * u; });
        CHECK_THROWS_AS((void)forward_from_term_structure(p), Error);
    }
}

TEST_CASE("term structure from forward") {
    std::vector<double> offsets;
    for (int k = 0; k <= 10; ++k) offsets.push_back(0.2 * k);

    SUBCASE("zero forward gives flat P=1") {
        auto f = surface_from(offsets, 1, [](double) { return 0.0; });
        auto p = term_structure_from_forward(f);
        for (std::size_t k = 0; k < offsets.size(); ++k) CHECK(p.at_node(0, k) == 1.0);
    }

    SUBCASE("constant forward exact") {
        auto f = surface_from(offsets, 1, [](double) { return 0.03; });
        auto p = term_structure_from_forward(f);
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            CHECK(p.at_node(0, k) == doctest::Approx(std::exp(-0.03 * offsets[k])).epsilon(1e-14));
        }
    }

    SUBCASE("linear forward, closed-form integral oracle") {
        auto f = surface_from(offsets, 1, [](double u) { return 0.02 + 0.01 * u; });
        auto p = term_structure_from_forward(f);
        // P[0,2] = exp(-(0.02*2 + 0.005*4)) = exp(-0.06); trapezoid exact for linear f
        CHECK(p.at(0, 2.0) == doctest::Approx(std::exp(-0.06)).epsilon(1e-14));
    }
}

TEST_CASE("conversion roundtrip is second order") {
    // non-polynomial curve: f(u) = 0.03 + 0.01 sin u
    const auto exact_p = [](double u) {
        return std::exp(-(0.03 * u + 0.01 * (1.0 - std::cos(u))));
    };
    std::vector<double> errors;
    for (std::size_t n : {20, 40, 80}) {
        std::vector<double> offsets(n + 1);
        for (std::size_t k = 0; k <= n; ++k) {
            offsets[k] = 2.0 * static_cast<double>(k) / static_cast<double>(n);
        }
        MaturitySurface p;
        p.offsets = offsets;
        p.n_times = 1;
        p.values.resize(offsets.size());
        for (std::size_t k = 0; k <= n; ++k) p.at_node(0, k) = exact_p(offsets[k]);
        auto round = term_structure_from_forward(forward_from_term_structure(p));
        double err = 0.0;
        for (std::size_t k = 1; k + 1 < offsets.size(); ++k) {
            err = std::max(err, std::abs(round.at_node(0, k) - p.at_node(0, k)));
        }
        errors.push_back(err);
    }
    const double slope1 = std::log2(errors[0] / errors[1]);
    const double slope2 = std::log2(errors[1] / errors[2]);
    CHECK(slope1 >= 1.9);
    CHECK(slope2 >= 1.9);
}

TEST_CASE("invariants on random scenarios") {
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const double g1 = 0.08 * (philox_uniform(7, trial, 0, 0) - 0.5);
        const double g2 = 0.08 * (philox_uniform(7, trial, 1, 0) - 0.5);
        const double r1 = 0.05 * philox_uniform(7, trial, 2, 0);
        const double r2 = 0.05 * philox_uniform(7, trial, 3, 0);
        auto s = fixtures::exp_scenario({g1, g2}, {r1, r2}, 17);

        // P[t,t] = 1 and P > 0 after construction
        for (const auto& asset : s.assets) {
            for (std::size_t t = 0; t < s.n_times(); ++t) {
                CHECK(asset.term_structure.at_node(t, 0) == 1.0);
                for (std::size_t k = 0; k < asset.term_structure.offsets.size(); ++k) {
                    CHECK(asset.term_structure.at_node(t, k) > 0.0);
                }
            }
        }

        // basis-vector projection of the short rate
        const std::vector<double> e1{1.0, 0.0};
        CHECK(portfolio_short_rate(s, e1, 3) == doctest::Approx(r1).epsilon(1e-12));

        // linearity of the portfolio deflator
        const std::vector<double> xa{0.7, 0.4}, xb{-0.2, 0.9};
        const double a = 1.3, b = -0.5;
        std::vector<double> mix{a * xa[0] + b * xb[0], a * xa[1] + b * xb[1]};
        const double lhs = portfolio_deflator(s, mix, 5);
        const double rhs =
            a * portfolio_deflator(s, xa, 5) + b * portfolio_deflator(s, xb, 5);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("portfolio point validation") {
    auto s = fixtures::flat_scenario(2, 9);
    PortfolioPoint good{{1.0, 1.0}, 3};
    good.validate(s);
    PortfolioPoint outside{{3.0, 1.0}, 3};
    CHECK_THROWS_AS(outside.validate(s), Error);
    PortfolioPoint late{{1.0, 1.0}, 99};
    CHECK_THROWS_AS(late.validate(s), Error);
}

TEST_CASE("maturity range errors") {
    auto s = fixtures::flat_scenario(1, 9);
    const std::vector<double> x{1.0};
    CHECK_THROWS_AS((void)portfolio_forward_rate(s, x, 0, 1e9), Error);
    try {
        (void)portfolio_forward_rate(s, x, 0, 1e9);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::maturity_out_of_range);
    }
}
