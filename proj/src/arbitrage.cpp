#include "ga/arbitrage.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "ga/detail/parallel.hpp"
#include "ga/detail/stencil.hpp"

namespace ga {

namespace {

double log_deflator(const MarketScenario& scenario, std::span<const double> x, std::size_t t,
                    int& sign) {
    const double d = portfolio_deflator(scenario, x, t);
    sign = (d > 0.0) ? 1 : -1;
    return std::log(std::abs(d));
}

} // namespace

double instantaneous_return(const MarketScenario& scenario, std::span<const double> x,
                            std::size_t t) {
    const auto& tg = scenario.time_grid;
    const std::size_t n = tg.size();
    if (t >= n) throw Error(ErrorCode::config_invalid, "time index out of range");
    int s0 = 0, s1 = 0, s2 = 0;
    double dlog = 0.0;
    if (t == 0) {
        const double l0 = log_deflator(scenario, x, 0, s0);
        const double l1 = log_deflator(scenario, x, 1, s1);
        const double l2 = log_deflator(scenario, x, 2, s2);
        dlog = (-3.0 * l0 + 4.0 * l1 - l2) / (tg[2] - tg[0]);
    } else if (t + 1 == n) {
        const double l0 = log_deflator(scenario, x, n - 3, s0);
        const double l1 = log_deflator(scenario, x, n - 2, s1);
        const double l2 = log_deflator(scenario, x, n - 1, s2);
        dlog = (3.0 * l2 - 4.0 * l1 + l0) / (tg[n - 1] - tg[n - 3]);
    } else {
        const double lm = log_deflator(scenario, x, t - 1, s0);
        const double lp = log_deflator(scenario, x, t + 1, s2);
        s1 = s0;
        dlog = (lp - lm) / (tg[t + 1] - tg[t - 1]);
    }
    if (s0 != s1 || s1 != s2) {
        throw Error(ErrorCode::deflator_singular, "D^x changes sign inside the stencil");
    }
    return dlog + portfolio_short_rate(scenario, x, t);
}

std::vector<DerivativeBin> instantaneous_return_bins(const PathEnsemble& ensemble,
                                                     std::span<const double> x, std::size_t t,
                                                     const NelsonOptions& opt) {
    const std::size_t m = ensemble.n_paths();
    const std::size_t n_times = ensemble.n_steps() + 1;
    if (t >= n_times) throw Error(ErrorCode::config_invalid, "time index out of range");
    if (x.size() != ensemble.n_assets()) {
        throw Error(ErrorCode::dimension_mismatch, "nominal size != asset count");
    }
    const double dt = ensemble.dt();

    const auto portfolio_at = [&](std::size_t p, std::size_t step) {
        double v = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) v += x[j] * ensemble.asset(p, step, j);
        return v;
    };

    // shared conditioning state: asset 0
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ensemble.asset(a, t, 0) < ensemble.asset(b, t, 0);
    });

    const std::size_t n_bins = std::min(opt.n_bins, m);
    std::vector<DerivativeBin> bins(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * m / n_bins;
        const std::size_t hi = (b + 1) * m / n_bins;
        double sum_state = 0.0, sum = 0.0, sum2 = 0.0;
        bool finite = true;
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t p = order[i];
            const double d_now = portfolio_at(p, t);
            double dlog;
            if (t == 0) {
                dlog = std::log(std::abs(portfolio_at(p, 1) / d_now)) / dt;
            } else if (t + 1 == n_times) {
                dlog = std::log(std::abs(d_now / portfolio_at(p, t - 1))) / dt;
            } else {
                dlog = std::log(std::abs(portfolio_at(p, t + 1) / portfolio_at(p, t - 1))) /
                       (2.0 * dt);
            }
            double rx = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                rx += x[j] * ensemble.asset(p, t, j) * ensemble.rate(p, t, j);
            }
            rx /= d_now;
            const double v = dlog + rx;
            if (!std::isfinite(v)) finite = false;
            sum_state += ensemble.asset(p, t, 0);
            sum += v;
            sum2 += v * v;
        }
        const std::size_t count = hi - lo;
        DerivativeBin& bin = bins[b];
        bin.count = count;
        bin.center = sum_state / static_cast<double>(count);
        bin.value = sum / static_cast<double>(count);
        if (count > 1) {
            const double var =
                std::max(0.0, (sum2 - sum * bin.value) / static_cast<double>(count - 1));
            bin.std_error = std::sqrt(var / static_cast<double>(count));
        }
        bin.usable = finite && count >= opt.min_bin_count;
    }
    return bins;
}

namespace {

void field_gradient(const XGrid& grid, const std::vector<double>& field, std::size_t node,
                    double* out) {
    detail::axis_gradient(grid, node, [&field](std::size_t i) { return field[i]; }, out);
}

} // namespace

CurvatureField curvature_field(const MarketScenario& scenario, const XGrid& x_grid, Exec exec) {
    for (std::size_t d = 0; d < x_grid.dim(); ++d) {
        if (x_grid.nodes(d) < 3) {
            throw Error(ErrorCode::config_invalid, "curvature grid needs >= 3 nodes per axis");
        }
    }
    CurvatureField out;
    out.times = scenario.time_grid;
    out.x_grid = x_grid;
    out.n_components = x_grid.dim();
    const std::size_t n_nodes = x_grid.size();
    const std::size_t n_times = scenario.n_times();
    out.components.assign(n_times * n_nodes * out.n_components, 0.0);
    out.usable.assign(n_times * n_nodes, 1);

    // s(x,t) over the grid, then x-differences of s
    std::vector<double> field(n_times * n_nodes);
    detail::parallel_for(n_times, exec, [&](std::size_t t) {
        for (std::size_t m = 0; m < n_nodes; ++m) {
            const auto x = x_grid.point(m);
            field[t * n_nodes + m] = instantaneous_return(scenario, x, t);
        }
    });

    double sup = 0.0;
    for (std::size_t t = 0; t < n_times; ++t) {
        const std::vector<double> slice(field.begin() + t * n_nodes,
                                        field.begin() + (t + 1) * n_nodes);
        for (std::size_t m = 0; m < n_nodes; ++m) {
            double* r = out.components.data() + (t * n_nodes + m) * out.n_components;
            field_gradient(x_grid, slice, m, r);
            double norm2 = 0.0;
            for (std::size_t j = 0; j < out.n_components; ++j) norm2 += r[j] * r[j];
            sup = std::max(sup, std::sqrt(norm2));
        }
    }
    out.sup_norm = sup;
    return out;
}

CurvatureField curvature_field(const PathEnsemble& ensemble, const XGrid& x_grid,
                               const NelsonOptions& opt, Exec exec) {
    const std::size_t n_nodes = x_grid.size();
    const std::size_t n_times = ensemble.n_steps() + 1;
    if (n_times < 3) throw Error(ErrorCode::grid_mismatch, "ensemble too short");

    CurvatureField out;
    out.x_grid = x_grid;
    out.n_components = x_grid.dim();
    for (std::size_t t = 1; t + 1 < n_times; ++t) {
        out.times.push_back(ensemble.times()[t]);
    }
    const std::size_t nt = out.times.size();
    out.components.assign(nt * n_nodes * out.n_components, 0.0);
    out.usable.assign(nt * n_nodes, 0);

    std::vector<double> sup_per_time(nt, 0.0);
    const std::size_t n_bins = std::min(opt.n_bins, ensemble.n_paths());

    const auto process_time = [&](std::size_t ti) {
        const std::size_t t = ti + 1;
        // s(node, bin) with one shared binning per time slice
        std::vector<std::vector<DerivativeBin>> per_node(n_nodes);
        for (std::size_t m = 0; m < n_nodes; ++m) {
            per_node[m] = instantaneous_return_bins(ensemble, x_grid.point(m), t, opt);
        }
        double local_sup = 0.0;
        std::vector<double> bin_field(n_nodes);
        std::vector<double> grad(out.n_components);
        std::vector<double> accum(n_nodes * out.n_components, 0.0);
        std::vector<double> weight(n_nodes, 0.0);
        for (std::size_t b = 0; b < n_bins; ++b) {
            bool bin_usable = true;
            for (std::size_t m = 0; m < n_nodes; ++m) {
                bin_usable = bin_usable && per_node[m][b].usable;
                bin_field[m] = per_node[m][b].value;
            }
            if (!bin_usable) continue;
            const double w = static_cast<double>(per_node[0][b].count);
            for (std::size_t m = 0; m < n_nodes; ++m) {
                field_gradient(x_grid, bin_field, m, grad.data());
                double norm2 = 0.0;
                for (std::size_t j = 0; j < out.n_components; ++j) {
                    accum[m * out.n_components + j] += w * grad[j];
                    norm2 += grad[j] * grad[j];
                }
                local_sup = std::max(local_sup, std::sqrt(norm2));
                weight[m] += w;
            }
        }
        for (std::size_t m = 0; m < n_nodes; ++m) {
            if (weight[m] > 0.0) {
                out.usable[ti * n_nodes + m] = 1;
                for (std::size_t j = 0; j < out.n_components; ++j) {
                    out.components[(ti * n_nodes + m) * out.n_components + j] =
                        accum[m * out.n_components + j] / weight[m];
                }
            }
        }
        sup_per_time[ti] = local_sup;
    };

    detail::parallel_for(nt, exec, [&](std::size_t ti) { process_time(ti); });
    out.sup_norm = *std::max_element(sup_per_time.begin(), sup_per_time.end());
    return out;
}

namespace {

Eigen::MatrixXd sigma_matrix(std::span<const double> sigma, std::size_t n, std::size_t k) {
    Eigen::MatrixXd s(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) s(i, j) = sigma[i * k + j];
    }
    return s;
}

} // namespace

RangeTestEntry zc_range_test(std::span<const double> alpha, std::span<const double> sigma,
                             std::size_t brownian_dim, std::span<const double> short_rate,
                             std::span<const double> bracket_correction, double time) {
    const auto mpr =
        market_price_of_risk(alpha, sigma, brownian_dim, short_rate, bracket_correction);
    RangeTestEntry entry;
    entry.time = time;
    entry.residual = mpr.residual;
    entry.lambda = mpr.lambda;
    entry.rank_deficient = mpr.rank_deficient;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double c = bracket_correction.empty() ? 0.0 : bracket_correction[i];
        const double v = alpha[i] - 0.5 * c + short_rate[i];
        norm2 += v * v;
    }
    entry.target_norm = std::sqrt(norm2);
    entry.zero_curvature = entry.residual <= kZcTolRel * entry.target_norm;
    return entry;
}

MarketPriceOfRisk market_price_of_risk(std::span<const double> alpha,
                                       std::span<const double> sigma, std::size_t brownian_dim,
                                       std::span<const double> short_rate,
                                       std::span<const double> bracket_correction) {
    const std::size_t n = alpha.size();
    if (short_rate.size() != n || sigma.size() != n * brownian_dim ||
        (!bracket_correction.empty() && bracket_correction.size() != n)) {
        throw Error(ErrorCode::dimension_mismatch, "coefficient dimensions disagree");
    }
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = bracket_correction.empty() ? 0.0 : bracket_correction[i];
        v(static_cast<Eigen::Index>(i)) = alpha[i] - 0.5 * c + short_rate[i];
    }
    const Eigen::MatrixXd s = sigma_matrix(sigma, n, brownian_dim);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankTolRel);
    const Eigen::VectorXd lambda = svd.solve(v);  // minimum-norm least squares

    MarketPriceOfRisk out;
    out.lambda.assign(lambda.data(), lambda.data() + lambda.size());
    out.residual = (s * lambda - v).norm();
    out.rank_deficient =
        svd.rank() < static_cast<Eigen::Index>(std::min(n, brownian_dim));
    return out;
}

NovikovReport novikov_diagnostic(const ItoModelSpec& spec, std::span<const double> x,
                                 double horizon, const PathEnsemble& ensemble, Exec exec) {
    spec.validate();
    if (x.size() != spec.n_assets) {
        throw Error(ErrorCode::dimension_mismatch, "nominal size != asset count");
    }
    const double dt = ensemble.dt();
    const std::size_t n_use =
        std::min(ensemble.n_steps(), static_cast<std::size_t>(std::llround(horizon / dt)));
    if (n_use == 0) throw Error(ErrorCode::config_invalid, "horizon shorter than one step");

    const std::size_t m = ensemble.n_paths();
    const std::size_t n = spec.n_assets;
    const std::size_t k = spec.brownian_dim;
    std::vector<double> exponents(m, 0.0);
    std::atomic<bool> vanishing{false};

    const auto path_exponent = [&](std::size_t p, std::vector<double>& scratch) {
        double* state = scratch.data();
        double* alpha = state + n;
        double* sigma = alpha + n;
        double* sharpe2 = sigma + n * k;  // integrand samples at grid times
        for (std::size_t step = 0; step <= n_use; ++step) {
            for (std::size_t j = 0; j < n; ++j) state[j] = ensemble.asset(p, step, j);
            const double t = dt * static_cast<double>(step);
            spec.drift.eval(t, {state, n}, {alpha, n});
            spec.volatility.eval(t, {state, n}, {sigma, n * k});
            double value = 0.0;
            for (std::size_t j = 0; j < n; ++j) value += x[j] * state[j];
            double ax = 0.0;
            double sx2 = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                double sk = 0.0;
                for (std::size_t j = 0; j < n; ++j) sk += x[j] * state[j] * sigma[j * k + kk];
                sx2 += sk * sk;
            }
            for (std::size_t j = 0; j < n; ++j) ax += x[j] * state[j] * alpha[j];
            // alpha^x and |sigma^x| share the 1/value factor; it cancels in
            // the ratio, so the value itself never divides.
            const double sx = std::sqrt(sx2);
            if (sx < 1e-10 * std::abs(value)) {
                vanishing.store(true);
                return 0.0;
            }
            sharpe2[step] = 0.5 * (ax / sx) * (ax / sx);
        }
        double integral = 0.0;
        for (std::size_t step = 0; step < n_use; ++step) {
            integral += 0.5 * (sharpe2[step] + sharpe2[step + 1]) * dt;
        }
        return integral;
    };

    const std::size_t scratch_size = 2 * n + n * k + (n_use + 1);
    if (exec == Exec::parallel) {
#pragma omp parallel
        {
            std::vector<double> scratch(scratch_size);
#pragma omp for schedule(static)
            for (long long p = 0; p < static_cast<long long>(m); ++p) {
                exponents[static_cast<std::size_t>(p)] =
                    path_exponent(static_cast<std::size_t>(p), scratch);
            }
        }
    } else {
        std::vector<double> scratch(scratch_size);
        for (std::size_t p = 0; p < m; ++p) exponents[p] = path_exponent(p, scratch);
    }
    if (vanishing.load()) {
        throw Error(ErrorCode::vanishing_volatility, "|sigma^x| < 1e-10 on a sampled path");
    }

    NovikovReport report;
    double sum = 0.0, sum2 = 0.0;
    for (double e : exponents) {
        const double v = std::exp(e);
        sum += v;
        sum2 += v * v;
    }
    report.estimate = sum / static_cast<double>(m);
    if (m > 1) {
        const double var =
            std::max(0.0, (sum2 - sum * report.estimate) / static_cast<double>(m - 1));
        report.std_error = std::sqrt(var / static_cast<double>(m));
    }
    const std::size_t quarters[3] = {std::max<std::size_t>(1, m / 4),
                                     std::max<std::size_t>(1, m / 2), m};
    double running_max = -1e300;
    std::size_t cursor = 0;
    for (std::size_t q = 0; q < 3; ++q) {
        for (; cursor < quarters[q]; ++cursor) running_max = std::max(running_max, exponents[cursor]);
        report.prefix_max_exponent.push_back(running_max);
    }
    report.max_exponent = report.prefix_max_exponent.back();
    report.tail_slope = 0.5 * (report.prefix_max_exponent[2] - report.prefix_max_exponent[0]);
    report.verdict = (report.tail_slope > 0.35) ? "diverging" : "consistent with finite";
    return report;
}

} // namespace ga
