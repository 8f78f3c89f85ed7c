#include "ga/nelson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ga/detail/parallel.hpp"

namespace ga {

namespace {

enum class Quotient { forward, backward, mean };

// Bins paths on Q_t and averages the requested quotient per bin. Mean
// quotients are per-path averages of the one-sided ones, so the bin means
// satisfy the (D + D*)/2 identity exactly; standard errors for the mean
// kind are combined in quadrature from the one-sided ones instead.
std::vector<DerivativeBin> estimate_slice(const SeriesMatrix& series, std::size_t t,
                                          Quotient kind, const NelsonOptions& opt) {
    const std::size_t m = series.n_paths;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return series.at(a, t) < series.at(b, t);
    });

    const std::size_t n_bins = std::min(opt.n_bins, m);
    std::vector<DerivativeBin> bins(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t lo = b * m / n_bins;
        const std::size_t hi = (b + 1) * m / n_bins;
        const std::size_t count = hi - lo;
        double sum_state = 0.0;
        double sum_f = 0.0, sum_f2 = 0.0;
        double sum_b = 0.0, sum_b2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t p = order[i];
            sum_state += series.at(p, t);
            if (kind != Quotient::backward) {
                const double q = (series.at(p, t + 1) - series.at(p, t)) / series.dt;
                sum_f += q;
                sum_f2 += q * q;
            }
            if (kind != Quotient::forward) {
                const double q = (series.at(p, t) - series.at(p, t - 1)) / series.dt;
                sum_b += q;
                sum_b2 += q * q;
            }
        }
        DerivativeBin& bin = bins[b];
        bin.count = count;
        bin.center = sum_state / static_cast<double>(count);
        const auto mean_se = [count](double s, double s2) {
            const double mean = s / static_cast<double>(count);
            double se = 0.0;
            if (count > 1) {
                const double var =
                    std::max(0.0, (s2 - s * mean) / static_cast<double>(count - 1));
                se = std::sqrt(var / static_cast<double>(count));
            }
            return std::pair<double, double>{mean, se};
        };
        if (kind == Quotient::forward) {
            std::tie(bin.value, bin.std_error) = mean_se(sum_f, sum_f2);
        } else if (kind == Quotient::backward) {
            std::tie(bin.value, bin.std_error) = mean_se(sum_b, sum_b2);
        } else {
            const auto [fv, fse] = mean_se(sum_f, sum_f2);
            const auto [bv, bse] = mean_se(sum_b, sum_b2);
            bin.value = 0.5 * (fv + bv);
            bin.std_error = 0.5 * std::sqrt(fse * fse + bse * bse);
        }
        bin.usable = count >= opt.min_bin_count;
    }
    return bins;
}

DerivativeEstimate estimate(const SeriesMatrix& series, Quotient kind,
                            const NelsonOptions& opt) {
    if (series.n_times < 2) {
        throw Error(ErrorCode::grid_mismatch, "series needs at least 2 time points");
    }
    const std::size_t first = (kind == Quotient::forward) ? 0 : 1;
    const std::size_t last = (kind == Quotient::backward) ? series.n_times - 1
                                                          : series.n_times - 2;
    DerivativeEstimate out;
    for (std::size_t t = first; t <= last; ++t) {
        out.time_indices.push_back(t);
        out.times.push_back(series.dt * static_cast<double>(t));
    }
    out.bins.resize(out.time_indices.size());

    detail::parallel_for(out.time_indices.size(), opt.exec, [&](std::size_t i) {
        out.bins[i] = estimate_slice(series, out.time_indices[i], kind, opt);
    });
    return out;
}

} // namespace

SeriesMatrix series_from_ensemble(const PathEnsemble& ensemble, std::size_t component) {
    if (component >= 2 * ensemble.n_assets()) {
        throw Error(ErrorCode::dimension_mismatch, "component index out of range");
    }
    SeriesMatrix s;
    s.n_paths = ensemble.n_paths();
    s.n_times = ensemble.n_steps() + 1;
    s.dt = ensemble.dt();
    s.values.resize(s.n_paths * s.n_times);
    const bool is_rate = component >= ensemble.n_assets();
    const std::size_t j = is_rate ? component - ensemble.n_assets() : component;
    for (std::size_t p = 0; p < s.n_paths; ++p) {
        for (std::size_t t = 0; t < s.n_times; ++t) {
            s.at(p, t) = is_rate ? ensemble.rate(p, t, j) : ensemble.asset(p, t, j);
        }
    }
    return s;
}

DerivativeEstimate forward_derivative(const SeriesMatrix& series, const NelsonOptions& opt) {
    return estimate(series, Quotient::forward, opt);
}
DerivativeEstimate backward_derivative(const SeriesMatrix& series, const NelsonOptions& opt) {
    return estimate(series, Quotient::backward, opt);
}
DerivativeEstimate mean_derivative(const SeriesMatrix& series, const NelsonOptions& opt) {
    return estimate(series, Quotient::mean, opt);
}

DerivativeEstimate forward_derivative(const PathEnsemble& ensemble, std::size_t component,
                                      const NelsonOptions& opt) {
    return forward_derivative(series_from_ensemble(ensemble, component), opt);
}
DerivativeEstimate backward_derivative(const PathEnsemble& ensemble, std::size_t component,
                                       const NelsonOptions& opt) {
    return backward_derivative(series_from_ensemble(ensemble, component), opt);
}
DerivativeEstimate mean_derivative(const PathEnsemble& ensemble, std::size_t component,
                                   const NelsonOptions& opt) {
    return mean_derivative(series_from_ensemble(ensemble, component), opt);
}

} // namespace ga
