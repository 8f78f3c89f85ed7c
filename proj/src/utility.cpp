#include "ga/utility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ga/detail/parallel.hpp"
#include "ga/detail/stencil.hpp"

namespace ga {

UtilityFunction::UtilityFunction(UtilityForm form, double param) : form_(form), param_(param) {
    check_shape();
}

UtilityFunction UtilityFunction::log_form() { return {UtilityForm::log_utility, 0.0}; }

UtilityFunction UtilityFunction::power_form(double gamma) {
    if (!(gamma > 0.0) || gamma == 1.0) {
        throw Error(ErrorCode::config_invalid, "power utility needs gamma > 0, gamma != 1");
    }
    return {UtilityForm::power, gamma};
}

UtilityFunction UtilityFunction::exponential_form(double a) {
    if (!(a > 0.0)) throw Error(ErrorCode::config_invalid, "exponential utility needs a > 0");
    return {UtilityForm::exponential, a};
}

UtilityFunction UtilityFunction::rescaled(double scale, double shift) const {
    if (!(scale > 0.0)) {
        throw Error(ErrorCode::config_invalid, "utility rescale factor must be > 0");
    }
    UtilityFunction out = *this;
    out.scale_ *= scale;
    out.shift_ = scale * out.shift_ + shift;
    return out;
}

double UtilityFunction::operator()(double wealth) const {
    double base = 0.0;
    switch (form_) {
        case UtilityForm::log_utility: base = std::log(wealth); break;
        case UtilityForm::power:
            base = (std::pow(wealth, 1.0 - param_) - 1.0) / (1.0 - param_);
            break;
        case UtilityForm::exponential: base = (1.0 - std::exp(-param_ * wealth)) / param_; break;
    }
    return scale_ * base + shift_;
}

void UtilityFunction::check_shape() const {
    const double samples[] = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    const double h = 1e-5;
    for (double w : samples) {
        const double up = ((*this)(w + h) - (*this)(w - h)) / (2.0 * h);
        const double upp = ((*this)(w + h) - 2.0 * (*this)(w) + (*this)(w - h)) / (h * h);
        if (!(up > 0.0) || !(upp < 0.0)) {
            throw Error(ErrorCode::config_invalid,
                        "utility must be strictly increasing and concave");
        }
    }
}

double foc_residual(const MarketScenario& scenario, const XGrid& x_grid,
                    std::span<const double> x, std::size_t t) {
    // locate the grid node carrying x
    std::array<std::size_t, 3> idx{0, 0, 0};
    for (std::size_t d = 0; d < x_grid.dim(); ++d) {
        const double pos = (x[d] - x_grid.coordinate(d, 0)) / x_grid.step(d);
        const double rounded = std::round(pos);
        if (std::abs(pos - rounded) > 1e-6 || rounded < 0.0 ||
            rounded >= static_cast<double>(x_grid.nodes(d))) {
            throw Error(ErrorCode::config_invalid, "x must sit on the evaluation grid");
        }
        idx[d] = static_cast<std::size_t>(rounded);
    }
    const std::size_t node = x_grid.flatten(idx);
    std::array<double, 3> grad{0.0, 0.0, 0.0};
    detail::axis_gradient(
        x_grid, node,
        [&](std::size_t m) { return instantaneous_return(scenario, x_grid.point(m), t); },
        grad.data());
    double norm2 = 0.0;
    for (std::size_t d = 0; d < x_grid.dim(); ++d) norm2 += grad[d] * grad[d];
    return std::sqrt(norm2);
}

namespace {

struct Contribution {
    // ret contribution of allocating `node` over step i, per path (one row
    // for deterministic scenarios)
    std::vector<double> per_path;
};

} // namespace

UtilityOptimum maximize_expected_utility(const MarketScenario& scenario,
                                         const UtilityFunction& utility, std::size_t start,
                                         std::size_t horizon, const XGrid& x_grid,
                                         const PathEnsemble* ensemble, Exec exec) {
    const std::size_t n_times = scenario.n_times();
    if (start >= horizon || horizon >= n_times) {
        throw Error(ErrorCode::config_invalid, "need start < horizon < n_times");
    }
    const std::size_t n_nodes = x_grid.size();
    const std::size_t n_steps = horizon - start;
    const auto& tg = scenario.time_grid;

    // fixed time-s budget of the domain-center allocation; the decision
    // variables never enter it
    std::vector<double> x_init(x_grid.dim());
    for (std::size_t d = 0; d < x_grid.dim(); ++d) {
        x_init[d] = 0.5 * (x_grid.coordinate(d, 0) + x_grid.coordinate(d, x_grid.nodes(d) - 1));
    }
    const double budget =
        portfolio_deflator(scenario, x_init, start) *
        portfolio_term_structure(scenario, x_init, start, tg[horizon] - tg[start]);
    if (!(budget > 0.0)) {
        throw Error(ErrorCode::config_invalid, "initial budget must be positive");
    }

    const std::size_t n_paths = ensemble ? ensemble->n_paths() : 1;

    // contributions c[i][node][path]: integral of Ret over step i for that
    // allocation. Deterministic: centered instantaneous return times dt.
    // Ensemble: forward log-increment of D^x plus r^x dt, pathwise.
    std::vector<std::vector<Contribution>> contrib(n_steps);
    const auto fill_step = [&](std::size_t i) {
        const std::size_t t = start + i;
        const double dt = tg[t + 1] - tg[t];
        auto& row = contrib[i];
        row.resize(n_nodes);
        for (std::size_t m = 0; m < n_nodes; ++m) {
            const auto x = x_grid.point(m);
            auto& c = row[m].per_path;
            c.resize(n_paths);
            if (!ensemble) {
                c[0] = instantaneous_return(scenario, x, t) * dt;
            } else {
                for (std::size_t p = 0; p < n_paths; ++p) {
                    double d_now = 0.0, d_next = 0.0, rx = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        d_now += x[j] * ensemble->asset(p, t, j);
                        d_next += x[j] * ensemble->asset(p, t + 1, j);
                        rx += x[j] * ensemble->asset(p, t, j) * ensemble->rate(p, t, j);
                    }
                    c[p] = std::log(std::abs(d_next / d_now)) + rx / d_now * dt;
                }
            }
        }
    };
    detail::parallel_for(n_steps, exec, [&](std::size_t i) { fill_step(i); });

    const auto objective_from_sums = [&](const std::vector<double>& path_sums) {
        double acc = 0.0;
        for (double s : path_sums) acc += utility(std::exp(s) * budget);
        return acc / static_cast<double>(n_paths);
    };

    struct AscentResult {
        std::vector<std::size_t> choice;
        double value = 0.0;
        bool flat = true;
    };

    const auto run_ascent = [&](std::size_t start_node) {
        AscentResult res;
        res.choice.assign(n_steps, start_node);
        std::vector<double> path_sums(n_paths, 0.0);
        for (std::size_t i = 0; i < n_steps; ++i) {
            const auto& c = contrib[i][res.choice[i]].per_path;
            for (std::size_t p = 0; p < n_paths; ++p) path_sums[p] += c[p];
        }
        double best_value = objective_from_sums(path_sums);
        const std::size_t max_sweeps = 10;
        for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
            bool changed = false;
            res.flat = true;
            for (std::size_t i = 0; i < n_steps; ++i) {
                const auto& cur = contrib[i][res.choice[i]].per_path;
                std::vector<double> candidate_values(n_nodes);
                const auto eval_candidate = [&](std::size_t m) {
                    const auto& cand = contrib[i][m].per_path;
                    double acc = 0.0;
                    for (std::size_t p = 0; p < n_paths; ++p) {
                        acc += utility(std::exp(path_sums[p] - cur[p] + cand[p]) * budget);
                    }
                    candidate_values[m] = acc / static_cast<double>(n_paths);
                };
                detail::parallel_for(n_nodes, n_paths > 1 ? exec : Exec::serial,
                                     [&](std::size_t m) { eval_candidate(m); });
                std::size_t best_node = res.choice[i];
                double step_best = candidate_values[best_node];
                double step_min = step_best;
                for (std::size_t m = 0; m < n_nodes; ++m) {
                    step_min = std::min(step_min, candidate_values[m]);
                    if (candidate_values[m] > step_best) {
                        step_best = candidate_values[m];
                        best_node = m;
                    }
                }
                if (step_best - step_min > 1e-10 * (1.0 + std::abs(step_best))) res.flat = false;
                if (best_node != res.choice[i]) {
                    const auto& cand = contrib[i][best_node].per_path;
                    for (std::size_t p = 0; p < n_paths; ++p) {
                        path_sums[p] += cand[p] - cur[p];
                    }
                    res.choice[i] = best_node;
                    best_value = step_best;
                    changed = true;
                } else {
                    best_value = step_best;
                }
            }
            if (!changed) break;
        }
        res.value = best_value;
        return res;
    };

    const std::size_t center = n_nodes / 2;
    const std::size_t starts[3] = {center, 0, n_nodes - 1};
    std::vector<AscentResult> runs;
    for (std::size_t s : starts) runs.push_back(run_ascent(s));
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i].value > runs[best].value) best = i;
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const double gap = runs[best].value - runs[i].value;
        if (gap > 1e-9 * (1.0 + std::abs(runs[best].value)) && runs[i].choice != runs[best].choice) {
            throw Error(ErrorCode::non_concave,
                        "coordinate ascent found distinct local optima with value gap " +
                            std::to_string(gap));
        }
    }

    UtilityOptimum out;
    out.value = runs[best].value;
    out.flat = runs[best].flat;
    for (std::size_t i = 0; i < n_steps; ++i) {
        out.step_indices.push_back(start + i);
        out.strategy.push_back(x_grid.point(runs[best].choice[i]));
        const auto idx = x_grid.unflatten(runs[best].choice[i]);
        for (std::size_t d = 0; d < x_grid.dim(); ++d) {
            if (idx[d] == 0 || idx[d] + 1 == x_grid.nodes(d)) out.boundary = true;
        }
        if (!ensemble) {
            out.foc_along_optimum.push_back(
                foc_residual(scenario, x_grid, out.strategy.back(), start + i));
        }
    }
    // an indifferent objective reports flat even when the tie-broken argmax
    // sits on a face; only informative boundary optima count as arbitrage
    out.verdict = out.flat ? "flat" : (out.boundary ? "arbitrage-consistent" : "interior");
    return out;
}

} // namespace ga
