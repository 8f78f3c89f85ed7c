// Wall-time comparison of the serial reference kernels against the OpenMP
// ones, with an equality check on the outputs (they must match bitwise).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include "ga/arbitrage.hpp"
#include "ga/laplacian.hpp"
#include "ga/nelson.hpp"
#include "ga/simulation.hpp"
#include "ga/utility.hpp"

using namespace ga;
using clock_type = std::chrono::steady_clock;

namespace {

double time_of(const std::function<void()>& fn) {
    const auto t0 = clock_type::now();
    fn();
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

void row(const char* name, double serial_ms, double parallel_ms, bool equal) {
    std::printf("%-28s %10.1f ms %10.1f ms   x%.2f   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, equal ? "outputs equal" : "OUTPUT MISMATCH");
}

ItoModelSpec gbm2() {
    ItoModelSpec m;
    m.n_assets = 2;
    m.brownian_dim = 2;
    m.drift.kind = VectorCoefficient::Kind::constant;
    m.drift.value = {0.03, 0.05};
    m.volatility.kind = MatrixCoefficient::Kind::constant;
    m.volatility.rows = 2;
    m.volatility.cols = 2;
    m.volatility.value = {0.2, 0.05, 0.0, 0.25};
    m.rate_drift.kind = VectorCoefficient::Kind::constant;
    m.rate_drift.value = {0.0, 0.0};
    m.s0 = {1.0, 1.0};
    m.r0 = {0.0, 0.0};
    return m;
}

MarketScenario growth_scenario(std::size_t n) {
    MarketScenario s;
    s.time_grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.time_grid[i] = static_cast<double>(i) / (n - 1.0);
    s.portfolio_domain.lo = {0.5, 0.5};
    s.portfolio_domain.hi = {1.5, 1.5};
    for (double g : {0.01, 0.03}) {
        Gauge gauge;
        gauge.deflator.resize(n);
        for (std::size_t i = 0; i < n; ++i) gauge.deflator[i] = std::exp(g * s.time_grid[i]);
        s.assets.push_back(std::move(gauge));
        s.short_rates.emplace_back(n, 0.0);
    }
    s.validate();
    return s;
}

} // namespace

int main() {
    std::printf("%-28s %13s %13s %7s\n", "kernel", "serial", "openmp", "speedup");

    {
        PathEnsemble a, b;
        const double ts = time_of([&] { a = simulate(gbm2(), 1.0, 256, 20000, 9, Exec::serial); });
        const double tp =
            time_of([&] { b = simulate(gbm2(), 1.0, 256, 20000, 9, Exec::parallel); });
        bool equal = a.n_paths() == b.n_paths();
        for (std::size_t p = 0; equal && p < a.n_paths(); p += 97) {
            for (std::size_t s = 0; s <= a.n_steps(); ++s) {
                equal = equal && a.asset(p, s, 0) == b.asset(p, s, 0) &&
                        a.asset(p, s, 1) == b.asset(p, s, 1);
            }
        }
        row("simulate 20k x 256 x 2", ts, tp, equal);

        DerivativeEstimate ea, eb;
        NelsonOptions ser, par;
        ser.exec = Exec::serial;
        const double ns = time_of([&] { ea = forward_derivative(a, 0, ser); });
        const double np = time_of([&] { eb = forward_derivative(a, 0, par); });
        bool nelson_equal = true;
        for (std::size_t i = 0; i < ea.bins.size(); ++i) {
            for (std::size_t k = 0; k < ea.bins[i].size(); ++k) {
                nelson_equal = nelson_equal && ea.bins[i][k].value == eb.bins[i][k].value;
            }
        }
        row("nelson bins 20k x 256", ns, np, nelson_equal);
    }

    {
        const auto s = growth_scenario(65);
        const XGrid grid(s.portfolio_domain, 33);
        CovariantOperator ca, cb;
        const double ts = time_of([&] {
            ca = assemble_covariant(s, grid, TimeDerivativeMode::classical_centered, Exec::serial);
        });
        const double tp = time_of([&] {
            cb = assemble_covariant(s, grid, TimeDerivativeMode::classical_centered,
                                    Exec::parallel);
        });
        Eigen::SparseMatrix<double> diff = ca.gradient - cb.gradient;
        row("covariant assembly 65x33^2", ts, tp, diff.norm() == 0.0);

        CurvatureField fa, fb;
        const double cs = time_of([&] { fa = curvature_field(s, grid, Exec::serial); });
        const double cp = time_of([&] { fb = curvature_field(s, grid, Exec::parallel); });
        row("curvature field 65x33^2", cs, cp, fa.sup_norm == fb.sup_norm);
    }

    {
        const auto s = growth_scenario(17);
        const auto ens = simulate(gbm2(), 1.0, 16, 20000, 5);
        const XGrid grid(s.portfolio_domain, 5);
        const auto u = UtilityFunction::log_form();
        UtilityOptimum oa, ob;
        const double ts =
            time_of([&] { oa = maximize_expected_utility(s, u, 0, 16, grid, &ens, Exec::serial); });
        const double tp = time_of(
            [&] { ob = maximize_expected_utility(s, u, 0, 16, grid, &ens, Exec::parallel); });
        row("utility sweep 20k paths", ts, tp, oa.value == ob.value && oa.strategy == ob.strategy);
    }

    return 0;
}
