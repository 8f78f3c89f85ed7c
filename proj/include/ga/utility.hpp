#pragma once

// Synthetic-bond instantaneous return, the expected-utility objective over
// piecewise-constant grid-valued strategies, and the first-order-condition
// residual that ties utility maximization to zero curvature.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ga/arbitrage.hpp"
#include "ga/exec.hpp"
#include "ga/grid.hpp"
#include "ga/market_model.hpp"
#include "ga/simulation.hpp"

namespace ga {

enum class UtilityForm { log_utility, power, exponential };

class UtilityFunction {
public:
    static UtilityFunction log_form();
    static UtilityFunction power_form(double gamma);       // (w^(1-g) - 1)/(1-g)
    static UtilityFunction exponential_form(double a);     // (1 - e^{-a w})/a

    // a*u + b with a > 0: same preferences, different value scale
    UtilityFunction rescaled(double scale, double shift) const;

    double operator()(double wealth) const;
    UtilityForm form() const { return form_; }
    double parameter() const { return param_; }

private:
    UtilityFunction(UtilityForm form, double param);
    void check_shape() const;  // u' > 0, u'' < 0 at sample points

    UtilityForm form_ = UtilityForm::log_utility;
    double param_ = 0.0;
    double scale_ = 1.0;
    double shift_ = 0.0;
};

// |d/dx (D log D^x + r^x)| at a grid node, by the same centered stencil the
// curvature field uses; the two agree exactly on shared nodes.
double foc_residual(const MarketScenario& scenario, const XGrid& x_grid,
                    std::span<const double> x, std::size_t t);

struct UtilityOptimum {
    std::vector<std::vector<double>> strategy;  // per step in [start, horizon)
    std::vector<std::size_t> step_indices;
    double value = 0.0;
    std::vector<double> foc_along_optimum;
    bool boundary = false;   // some optimal allocation sits on the domain face
    bool flat = false;       // objective indifferent to the allocation
    std::string verdict;     // "interior" | "arbitrage-consistent" | "flat"
};

// Maximizes E[ u( exp(int_s^T Ret^{x_t} dt) W_0 ) ] over piecewise-constant
// strategies valued on the grid nodes, by coordinate ascent with multiple
// starts; W_0 is the time-s budget of the fixed initial allocation (the
// domain center), which the first-order conditions never touch. Deterministic
// scenarios evaluate the single path; pass an ensemble for stochastic ones.
UtilityOptimum maximize_expected_utility(const MarketScenario& scenario,
                                         const UtilityFunction& utility, std::size_t start,
                                         std::size_t horizon, const XGrid& x_grid,
                                         const PathEnsemble* ensemble = nullptr,
                                         Exec exec = Exec::parallel);

} // namespace ga
