#pragma once

// Forward, backward, and mean stochastic derivative estimates from path
// ensembles. The conditional expectation is approximated by binning paths on
// the current state (the Markov reduction: conditioning on the present
// instead of the full past/future) and averaging one-step difference
// quotients per bin.

#include <cstddef>
#include <vector>

#include "ga/exec.hpp"
#include "ga/simulation.hpp"

namespace ga {

struct NelsonOptions {
    std::size_t n_bins = 32;        // equal-count state bins
    std::size_t min_bin_count = 50; // below this a bin is flagged unusable
    Exec exec = Exec::parallel;
};

struct DerivativeBin {
    double center = 0.0;  // mean state in the bin
    double value = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
    bool usable = false;
};

struct DerivativeEstimate {
    std::vector<double> times;                    // where the quotient is defined
    std::vector<std::size_t> time_indices;        // into the ensemble grid
    std::vector<std::vector<DerivativeBin>> bins; // [time][bin]
};

// Row-major [path][time] series extracted from an ensemble or built by the
// caller (e.g. log-deflators of a portfolio).
struct SeriesMatrix {
    std::vector<double> values;
    std::size_t n_paths = 0;
    std::size_t n_times = 0;
    double dt = 0.0;

    double at(std::size_t path, std::size_t t) const { return values[path * n_times + t]; }
    double& at(std::size_t path, std::size_t t) { return values[path * n_times + t]; }
};

SeriesMatrix series_from_ensemble(const PathEnsemble& ensemble, std::size_t component);

// D Q_t: bins on Q_t, averages (Q_{t+h} - Q_t)/h. Defined for t = 0..T-1.
DerivativeEstimate forward_derivative(const SeriesMatrix& series,
                                      const NelsonOptions& options = {});

// D* Q_t: bins on Q_t, averages (Q_t - Q_{t-h})/h. Defined for t = 1..T.
DerivativeEstimate backward_derivative(const SeriesMatrix& series,
                                       const NelsonOptions& options = {});

// (D + D*)/2, bin by bin on the shared binning of Q_t; standard errors
// combined in quadrature. Defined for t = 1..T-1.
DerivativeEstimate mean_derivative(const SeriesMatrix& series,
                                   const NelsonOptions& options = {});

// Component indexing: 0..N-1 are asset paths, N..2N-1 short-rate paths.
DerivativeEstimate forward_derivative(const PathEnsemble& ensemble, std::size_t component,
                                      const NelsonOptions& options = {});
DerivativeEstimate backward_derivative(const PathEnsemble& ensemble, std::size_t component,
                                       const NelsonOptions& options = {});
DerivativeEstimate mean_derivative(const PathEnsemble& ensemble, std::size_t component,
                                   const NelsonOptions& options = {});

} // namespace ga
