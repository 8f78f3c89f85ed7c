#include "ga/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace ga {

namespace {

std::size_t table_cell(const std::vector<double>& times, double t) {
    if (times.size() < 2 || t <= times.front()) return 0;
    if (t >= times.back()) return times.size() - 2;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return static_cast<std::size_t>(it - times.begin()) - 1;
}

} // namespace

void VectorCoefficient::eval(double t, std::span<const double> state,
                             std::span<double> out) const {
    switch (kind) {
        case Kind::constant:
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = value[j];
            return;
        case Kind::affine:
            for (std::size_t j = 0; j < out.size(); ++j) out[j] = value[j] + scale[j] * state[j];
            return;
        case Kind::table: {
            const std::size_t i = table_cell(table_times, t);
            const double w =
                std::clamp((t - table_times[i]) / (table_times[i + 1] - table_times[i]), 0.0, 1.0);
            for (std::size_t j = 0; j < out.size(); ++j) {
                out[j] = table_values[i][j] * (1.0 - w) + table_values[i + 1][j] * w;
            }
            return;
        }
    }
}

void MatrixCoefficient::eval(double t, std::span<const double> state,
                             std::span<double> out) const {
    switch (kind) {
        case Kind::constant:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = value[i];
            return;
        case Kind::affine:
            for (std::size_t j = 0; j < rows; ++j) {
                for (std::size_t k = 0; k < cols; ++k) {
                    out[j * cols + k] = value[j * cols + k] + scale[j * cols + k] * state[j];
                }
            }
            return;
        case Kind::table: {
            const std::size_t i = table_cell(table_times, t);
            const double w =
                std::clamp((t - table_times[i]) / (table_times[i + 1] - table_times[i]), 0.0, 1.0);
            for (std::size_t e = 0; e < out.size(); ++e) {
                out[e] = table_values[i][e] * (1.0 - w) + table_values[i + 1][e] * w;
            }
            return;
        }
    }
}

void ItoModelSpec::validate() const {
    if (n_assets == 0) throw Error(ErrorCode::config_invalid, "model needs at least one asset");
    if (brownian_dim == 0) throw Error(ErrorCode::config_invalid, "brownian_dim must be >= 1");
    if (s0.size() != n_assets || r0.size() != n_assets) {
        throw Error(ErrorCode::dimension_mismatch, "s0/r0 size != asset count");
    }
    if (volatility.rows != n_assets || volatility.cols != brownian_dim) {
        throw Error(ErrorCode::dimension_mismatch, "volatility must be N x K");
    }
    if (rate_brownian_dim > 0 &&
        (rate_volatility.rows != n_assets || rate_volatility.cols != rate_brownian_dim)) {
        throw Error(ErrorCode::dimension_mismatch, "rate volatility must be N x L");
    }
}

std::vector<double> PathEnsemble::asset_path(std::size_t path, std::size_t j) const {
    std::vector<double> out(times_.size());
    for (std::size_t s = 0; s < times_.size(); ++s) out[s] = asset(path, s, j);
    return out;
}

std::vector<double> PathEnsemble::rate_path(std::size_t path, std::size_t j) const {
    std::vector<double> out(times_.size());
    for (std::size_t s = 0; s < times_.size(); ++s) out[s] = rate(path, s, j);
    return out;
}

namespace {

constexpr double kExplosionBound = 1e12;

// One full path; writes into the ensemble slices. Returns false on explosion.
bool run_path(const ItoModelSpec& spec, std::size_t path, std::size_t steps, double dt,
              uint64_t seed, std::size_t n_states, double* asset_out, double* rate_out,
              std::vector<double>& scratch) {
    const std::size_t n = spec.n_assets;
    const std::size_t k_dim = spec.brownian_dim;
    const std::size_t l_dim = spec.rate_brownian_dim;
    double* s = scratch.data();
    double* r = s + n;
    double* alpha = r + n;
    double* a = alpha + n;
    double* sigma = a + n;
    double* b = sigma + n * k_dim;
    double* dw = b + n * l_dim;

    for (std::size_t j = 0; j < n; ++j) {
        s[j] = spec.s0[j];
        r[j] = spec.r0[j];
        asset_out[j] = s[j];
        rate_out[j] = r[j];
    }
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t step = 0; step < steps; ++step) {
        const double t = dt * static_cast<double>(step);
        spec.drift.eval(t, {s, n}, {alpha, n});
        spec.volatility.eval(t, {s, n}, {sigma, n * k_dim});
        spec.rate_drift.eval(t, {r, n}, {a, n});
        if (l_dim > 0) spec.rate_volatility.eval(t, {r, n}, {b, n * l_dim});
        for (std::size_t d = 0; d < k_dim + l_dim; ++d) {
            dw[d] = sqrt_dt * philox_normal(seed, path, static_cast<uint32_t>(step),
                                            static_cast<uint32_t>(d));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double diffusion = 0.0;
            for (std::size_t k = 0; k < k_dim; ++k) diffusion += sigma[j * k_dim + k] * dw[k];
            s[j] += s[j] * (alpha[j] * dt + diffusion);
            double rate_diffusion = 0.0;
            for (std::size_t l = 0; l < l_dim; ++l) {
                rate_diffusion += b[j * l_dim + l] * dw[k_dim + l];
            }
            r[j] += a[j] * dt + rate_diffusion;
            if (!(std::abs(s[j]) < kExplosionBound)) return false;
        }
        double* asset_row = asset_out + (step + 1) * n_states;
        double* rate_row = rate_out + (step + 1) * n_states;
        for (std::size_t j = 0; j < n; ++j) {
            asset_row[j] = s[j];
            rate_row[j] = r[j];
        }
    }
    return true;
}

} // namespace

PathEnsemble simulate(const ItoModelSpec& spec, double horizon, std::size_t steps,
                      std::size_t paths, uint64_t seed, Exec exec) {
    spec.validate();
    if (steps < 2) throw Error(ErrorCode::config_invalid, "steps must be >= 2");
    if (paths < 1) throw Error(ErrorCode::config_invalid, "paths must be >= 1");
    if (!(horizon > 0.0)) throw Error(ErrorCode::config_invalid, "horizon must be > 0");

    PathEnsemble ens;
    ens.dt_ = horizon / static_cast<double>(steps);
    ens.times_.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) ens.times_[i] = ens.dt_ * static_cast<double>(i);
    ens.n_paths_ = paths;
    ens.n_assets_ = spec.n_assets;
    ens.k_dim_ = spec.brownian_dim;
    ens.l_dim_ = spec.rate_brownian_dim;
    ens.seed_ = seed;
    ens.assets_.resize(paths * (steps + 1) * spec.n_assets);
    ens.rates_.resize(paths * (steps + 1) * spec.n_assets);

    const std::size_t n = spec.n_assets;
    const std::size_t scratch_size =
        4 * n + n * spec.brownian_dim + n * spec.rate_brownian_dim +
        (spec.brownian_dim + spec.rate_brownian_dim);
    const std::size_t stride = (steps + 1) * n;

    std::atomic<long long> first_bad{-1};
    if (exec == Exec::parallel) {
#pragma omp parallel
        {
            std::vector<double> scratch(scratch_size);
#pragma omp for schedule(static)
            for (long long p = 0; p < static_cast<long long>(paths); ++p) {
                const auto pu = static_cast<std::size_t>(p);
                if (!run_path(spec, pu, steps, ens.dt_, seed, n, ens.assets_.data() + pu * stride,
                              ens.rates_.data() + pu * stride, scratch)) {
                    long long expected = first_bad.load();
                    while ((expected == -1 || p < expected) &&
                           !first_bad.compare_exchange_weak(expected, p)) {
                    }
                }
            }
        }
    } else {
        std::vector<double> scratch(scratch_size);
        for (std::size_t p = 0; p < paths; ++p) {
            if (!run_path(spec, p, steps, ens.dt_, seed, n, ens.assets_.data() + p * stride,
                          ens.rates_.data() + p * stride, scratch)) {
                first_bad.store(static_cast<long long>(p));
                break;
            }
        }
    }
    if (first_bad.load() >= 0) {
        throw Error(ErrorCode::exploded_path,
                    "|S| exceeded 1e12 on path " + std::to_string(first_bad.load()));
    }
    return ens;
}

std::vector<double> quadratic_covariation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::grid_mismatch, "paths live on different grids");
    }
    std::vector<double> bracket(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        bracket[i] = bracket[i - 1] + (x[i] - x[i - 1]) * (y[i] - y[i - 1]);
    }
    return bracket;
}

double self_financing_residual(const std::vector<std::vector<double>>& strategy,
                               const std::vector<std::vector<double>>& deflators, double dt) {
    if (strategy.size() != deflators.size() || strategy.size() < 3) {
        throw Error(ErrorCode::grid_mismatch, "strategy/deflator grids differ or too short");
    }
    const std::size_t n_times = strategy.size();
    const std::size_t n = strategy[0].size();
    for (std::size_t t = 0; t < n_times; ++t) {
        if (strategy[t].size() != n || deflators[t].size() != n) {
            throw Error(ErrorCode::grid_mismatch, "row width mismatch");
        }
    }
    // cumulative bracket sum_j <x_j, D_j>
    std::vector<double> bracket(n_times, 0.0);
    for (std::size_t t = 1; t < n_times; ++t) {
        double inc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            inc += (strategy[t][j] - strategy[t - 1][j]) * (deflators[t][j] - deflators[t - 1][j]);
        }
        bracket[t] = bracket[t - 1] + inc;
    }
    double sup = 0.0;
    for (std::size_t t = 1; t + 1 < n_times; ++t) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lhs += (strategy[t + 1][j] - strategy[t - 1][j]) / (2.0 * dt) * deflators[t][j];
        }
        const double rhs = -0.5 * (bracket[t + 1] - bracket[t - 1]) / (2.0 * dt);
        sup = std::max(sup, std::abs(lhs - rhs));
    }
    return sup;
}

} // namespace ga
