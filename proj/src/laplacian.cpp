#include "ga/laplacian.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ga/detail/parallel.hpp"
#include "ga/philox.hpp"

namespace ga {

namespace {

struct GridLayout {
    std::size_t n_times = 0;
    std::size_t n_xnodes = 0;
    std::size_t node(std::size_t t, std::size_t m) const { return t * n_xnodes + m; }
};

double axis_stride(const XGrid& grid, std::size_t axis) {
    std::size_t stride = 1;
    for (std::size_t j = grid.dim(); j-- > axis + 1;) stride *= grid.nodes(j);
    return static_cast<double>(stride);
}

// trapezoid weight in the time direction
double time_weight(const std::vector<double>& tg, std::size_t i) {
    if (i == 0) return 0.5 * (tg[1] - tg[0]);
    if (i + 1 == tg.size()) return 0.5 * (tg[i] - tg[i - 1]);
    return 0.5 * (tg[i + 1] - tg[i - 1]);
}

// x-weight of node m with the axis-d factor removed (transverse measure of
// an edge along axis d)
double transverse_weight(const XGrid& grid, std::size_t m, std::size_t d) {
    const auto idx = grid.unflatten(m);
    double w = 1.0;
    for (std::size_t j = 0; j < grid.dim(); ++j) {
        if (j == d) continue;
        const bool face = idx[j] == 0 || idx[j] + 1 == grid.nodes(j);
        w *= grid.step(j) * (face ? 0.5 : 1.0);
    }
    return w;
}

} // namespace

CovariantOperator assemble_covariant(const MarketScenario& scenario, const XGrid& x_grid,
                                     TimeDerivativeMode mode, Exec exec) {
    if (x_grid.dim() != scenario.n_assets()) {
        throw Error(ErrorCode::dimension_mismatch,
                    "x-grid dimension must equal the asset count");
    }
    const std::size_t n_times = scenario.n_times();
    const std::size_t n_x = x_grid.size();
    const GridLayout layout{n_times, n_x};
    const std::size_t n_nodes = n_times * n_x;
    const auto& tg = scenario.time_grid;

    // Node coefficient fields; portfolio_deflator throws DeflatorSingular if
    // the grid touches the singular region.
    std::vector<double> short_rate_field(n_nodes);
    std::vector<double> deflator_field(n_nodes);
    detail::parallel_for(n_times, exec, [&](std::size_t t) {
        for (std::size_t m = 0; m < n_x; ++m) {
            const auto x = x_grid.point(m);
            deflator_field[layout.node(t, m)] = portfolio_deflator(scenario, x, t);
            short_rate_field[layout.node(t, m)] = portfolio_short_rate(scenario, x, t);
        }
    });

    const std::size_t n_time_edges = (n_times - 1) * n_x;
    std::size_t n_x_edges = 0;
    std::vector<std::size_t> axis_edge_offset(x_grid.dim());
    for (std::size_t d = 0; d < x_grid.dim(); ++d) {
        axis_edge_offset[d] = n_time_edges + n_x_edges;
        std::size_t per_time = 1;
        for (std::size_t j = 0; j < x_grid.dim(); ++j) {
            per_time *= (j == d) ? x_grid.nodes(j) - 1 : x_grid.nodes(j);
        }
        n_x_edges += n_times * per_time;
    }
    const std::size_t n_edges = n_time_edges + n_x_edges;

    std::vector<Eigen::Triplet<double>> triplets(2 * n_edges);
    Eigen::VectorXd weights(n_edges);

    // time edges: (f(t+1) - f(t))/dt - r^x(mid) (f(t)+f(t+1))/2
    const auto fill_time_edge = [&](std::size_t i) {
        for (std::size_t m = 0; m < n_x; ++m) {
            const std::size_t row = i * n_x + m;
            const double dt = tg[i + 1] - tg[i];
            const double k0 =
                -0.5 * (short_rate_field[layout.node(i, m)] + short_rate_field[layout.node(i + 1, m)]);
            const std::size_t a = layout.node(i, m);
            const std::size_t b = layout.node(i + 1, m);
            triplets[2 * row] = {static_cast<int>(row), static_cast<int>(a), -1.0 / dt + 0.5 * k0};
            triplets[2 * row + 1] = {static_cast<int>(row), static_cast<int>(b), 1.0 / dt + 0.5 * k0};
            weights(static_cast<Eigen::Index>(row)) = dt * x_grid.node_weight(m);
        }
    };

    // x edges along axis d at time t: (f(B) - f(A))/h + K_d(mid)(f(A)+f(B))/2
    // with K_d = D^d_t / D^{x_mid}_t evaluated exactly at the edge midpoint
    const auto fill_x_edges_at = [&](std::size_t d, std::size_t t, std::size_t& row_cursor) {
        const auto stride = static_cast<std::size_t>(axis_stride(x_grid, d));
        const double h = x_grid.step(d);
        for (std::size_t m = 0; m < n_x; ++m) {
            const auto idx = x_grid.unflatten(m);
            if (idx[d] + 1 == x_grid.nodes(d)) continue;
            const std::size_t row = row_cursor++;
            auto x_mid = x_grid.point(m);
            x_mid[d] += 0.5 * h;
            const double d_mid = portfolio_deflator(scenario, x_mid, t);
            const double k = scenario.assets[d].deflator[t] / d_mid;
            const std::size_t a = layout.node(t, m);
            const std::size_t b = layout.node(t, m + stride);
            triplets[2 * row] = {static_cast<int>(row), static_cast<int>(a), -1.0 / h + 0.5 * k};
            triplets[2 * row + 1] = {static_cast<int>(row), static_cast<int>(b), 1.0 / h + 0.5 * k};
            weights(static_cast<Eigen::Index>(row)) =
                h * transverse_weight(x_grid, m, d) * time_weight(tg, t);
        }
    };

    detail::parallel_for(n_times - 1, exec, [&](std::size_t i) { fill_time_edge(i); });
    for (std::size_t d = 0; d < x_grid.dim(); ++d) {
        std::size_t per_time = 1;
        for (std::size_t j = 0; j < x_grid.dim(); ++j) {
            per_time *= (j == d) ? x_grid.nodes(j) - 1 : x_grid.nodes(j);
        }
        detail::parallel_for(n_times, exec, [&](std::size_t t) {
            std::size_t cursor = axis_edge_offset[d] + t * per_time;
            fill_x_edges_at(d, t, cursor);
        });
    }

    CovariantOperator op;
    op.times = tg;
    op.x_grid = x_grid;
    op.mode = mode;
    op.gradient.resize(static_cast<Eigen::Index>(n_edges), static_cast<Eigen::Index>(n_nodes));
    op.gradient.setFromTriplets(triplets.begin(), triplets.end());
    op.edge_weights = std::move(weights);
    op.node_volumes.resize(static_cast<Eigen::Index>(n_nodes));
    for (std::size_t t = 0; t < n_times; ++t) {
        const double wt = time_weight(tg, t);
        for (std::size_t m = 0; m < n_x; ++m) {
            op.node_volumes(static_cast<Eigen::Index>(layout.node(t, m))) =
                wt * x_grid.node_weight(m);
        }
    }
    return op;
}

AssembledLaplacian assemble_laplacian(const CovariantOperator& grad,
                                      std::span<const double> edge_weights) {
    Eigen::VectorXd w = grad.edge_weights;
    if (!edge_weights.empty()) {
        if (edge_weights.size() != static_cast<std::size_t>(w.size())) {
            throw Error(ErrorCode::dimension_mismatch, "edge weight override size mismatch");
        }
        for (std::size_t i = 0; i < edge_weights.size(); ++i) {
            w(static_cast<Eigen::Index>(i)) = edge_weights[i];
        }
    }
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!(w(i) > 0.0)) throw Error(ErrorCode::config_invalid, "quadrature weights must be > 0");
    }

    AssembledLaplacian out;
    out.times = grad.times;
    out.x_grid = grad.x_grid;
    out.sqrt_volume = grad.node_volumes.cwiseSqrt();
    const Eigen::VectorXd inv_sqrt = out.sqrt_volume.cwiseInverse();

    Eigen::SparseMatrix<double> weighted = w.asDiagonal() * grad.gradient;
    Eigen::SparseMatrix<double> a = grad.gradient.transpose() * weighted;
    a = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
    // force exact symmetry; the product is symmetric only up to roundoff
    Eigen::SparseMatrix<double> at = a.transpose();
    out.matrix = 0.5 * (a + at);
    out.matrix.makeCompressed();
    return out;
}

namespace {

Eigen::VectorXd start_vector(Eigen::Index n, uint64_t seed) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = philox_uniform(seed, static_cast<uint64_t>(i), 0, 0) - 0.5;
    }
    v.normalize();
    return v;
}

} // namespace

SpectralResult smallest_eigenpairs(const AssembledLaplacian& laplacian, std::size_t k,
                                   double tol, std::size_t max_iterations, uint64_t seed) {
    const auto& a = laplacian.matrix;
    const Eigen::Index n = a.rows();
    if (k == 0 || static_cast<Eigen::Index>(k) > n) {
        throw Error(ErrorCode::config_invalid, "requested eigenpair count out of range");
    }

    SpectralResult result;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(a.coeff(i, i)));
    result.operator_scale = scale;

    // shift-invert at zero: factor A + mu I with a small positive shift so
    // the factorization stays definite when 0 is (numerically) an eigenvalue.
    // The shift also caps the dominance 1/mu of a kernel mode in the inverted
    // spectrum; much smaller shifts let that mode's Ritz component swamp the
    // precision of the clustered higher pairs.
    double mu = std::max(1e-300, 1e-6 * scale);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    Eigen::SparseMatrix<double> shifted;
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();
    for (int attempt = 0; attempt < 4; ++attempt) {
        shifted = a + mu * identity;
        solver.compute(shifted);
        if (solver.info() == Eigen::Success) break;
        mu *= 100.0;
    }
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::no_convergence, "shift-invert factorization failed");
    }

    const double residual_bound = tol * std::max(scale, 1e-30);
    std::size_t m_steps = std::min<std::size_t>(static_cast<std::size_t>(n),
                                                std::max<std::size_t>(60, 4 * k + 20));

    Eigen::MatrixXd ritz_vectors;
    Eigen::VectorXd ritz_values;
    std::vector<double> residuals;
    bool converged = false;

    while (true) {
        // Lanczos with full reorthogonalization on (A + mu I)^{-1}
        Eigen::MatrixXd basis(n, m_steps);
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_steps));
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_steps));
        Eigen::VectorXd v = start_vector(n, seed);
        basis.col(0) = v;
        std::size_t built = 0;
        for (std::size_t j = 0; j < m_steps; ++j) {
            Eigen::VectorXd w = solver.solve(basis.col(static_cast<Eigen::Index>(j)));
            alpha(static_cast<Eigen::Index>(j)) = basis.col(static_cast<Eigen::Index>(j)).dot(w);
            // two passes of explicit reorthogonalization
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i <= j; ++i) {
                    w -= basis.col(static_cast<Eigen::Index>(i)).dot(w) *
                         basis.col(static_cast<Eigen::Index>(i));
                }
            }
            built = j + 1;
            if (j + 1 == m_steps) break;
            const double nb = w.norm();
            if (nb < 1e-13) {
                // invariant subspace found; restart direction
                Eigen::VectorXd fresh = start_vector(n, seed + built + 1);
                for (int pass = 0; pass < 2; ++pass) {
                    for (std::size_t i = 0; i <= j; ++i) {
                        fresh -= basis.col(static_cast<Eigen::Index>(i)).dot(fresh) *
                                 basis.col(static_cast<Eigen::Index>(i));
                    }
                }
                const double nf = fresh.norm();
                if (nf < 1e-13) break;  // space exhausted
                beta(static_cast<Eigen::Index>(j)) = 0.0;
                basis.col(static_cast<Eigen::Index>(j + 1)) = fresh / nf;
            } else {
                beta(static_cast<Eigen::Index>(j)) = nb;
                basis.col(static_cast<Eigen::Index>(j + 1)) = w / nb;
            }
        }

        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(built),
                                                    static_cast<Eigen::Index>(built));
        for (std::size_t j = 0; j < built; ++j) {
            tri(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) =
                alpha(static_cast<Eigen::Index>(j));
            if (j + 1 < built) {
                tri(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) =
                    beta(static_cast<Eigen::Index>(j));
                tri(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) =
                    beta(static_cast<Eigen::Index>(j));
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri_eig(tri);

        // largest theta of the inverted operator <=> smallest lambda of A
        const std::size_t take = std::min(k, built);
        ritz_values.resize(static_cast<Eigen::Index>(take));
        ritz_vectors.resize(n, static_cast<Eigen::Index>(take));
        residuals.assign(take, 0.0);
        for (std::size_t j = 0; j < take; ++j) {
            const Eigen::Index col = static_cast<Eigen::Index>(built - 1 - j);
            const double theta = tri_eig.eigenvalues()(col);
            const double lambda = 1.0 / theta - mu;
            Eigen::VectorXd y =
                basis.leftCols(static_cast<Eigen::Index>(built)) * tri_eig.eigenvectors().col(col);
            y.normalize();
            ritz_values(static_cast<Eigen::Index>(j)) = lambda;
            ritz_vectors.col(static_cast<Eigen::Index>(j)) = y;
            residuals[j] = (a * y - lambda * y).norm();
        }
        converged = take == k;
        for (double r : residuals) converged = converged && r <= residual_bound;
        if (converged || m_steps >= std::min<std::size_t>(static_cast<std::size_t>(n),
                                                          max_iterations)) {
            break;
        }
        m_steps = std::min<std::size_t>(
            std::min<std::size_t>(static_cast<std::size_t>(n), max_iterations), 2 * m_steps);
    }

    // ascending in lambda
    std::vector<std::size_t> order(static_cast<std::size_t>(ritz_values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return ritz_values(static_cast<Eigen::Index>(i)) < ritz_values(static_cast<Eigen::Index>(j));
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t j = order[rank];
        result.eigenvalues.push_back(ritz_values(static_cast<Eigen::Index>(j)));
        result.residuals.push_back(residuals[j]);
        Eigen::VectorXd u = ritz_vectors.col(static_cast<Eigen::Index>(j));
        // section recovery f = u / sqrt(V), sign pinned at the largest entry
        Eigen::VectorXd f = u.cwiseQuotient(laplacian.sqrt_volume);
        Eigen::Index max_idx = 0;
        double max_abs = 0.0;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            if (std::abs(f(i)) > max_abs) {
                max_abs = std::abs(f(i));
                max_idx = i;
            }
        }
        if (f(max_idx) < 0.0) f = -f;
        SectionGrid section;
        section.times = laplacian.times;
        section.x_grid = laplacian.x_grid;
        section.values.assign(f.data(), f.data() + f.size());
        result.eigensections.push_back(std::move(section));
    }
    result.converged = converged;
    return result;
}

NflvrVerdict is_nflvr(const SpectralResult& result, double epsilon_kernel) {
    if (!result.converged || result.eigenvalues.empty()) {
        throw Error(ErrorCode::no_convergence, "spectral result did not converge");
    }
    const double lambda_min = result.eigenvalues.front();
    if (lambda_min < epsilon_kernel) return NflvrVerdict::arbitrage_free;
    if (lambda_min < 10.0 * epsilon_kernel) return NflvrVerdict::inconclusive;
    return NflvrVerdict::arbitrage;
}

const char* to_string(NflvrVerdict verdict) {
    switch (verdict) {
        case NflvrVerdict::arbitrage_free: return "ARBITRAGE-FREE";
        case NflvrVerdict::arbitrage: return "ARBITRAGE";
        case NflvrVerdict::inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

std::size_t kernel_dimension(const SpectralResult& result, double epsilon_kernel) {
    std::size_t dim = 0;
    for (double lambda : result.eigenvalues) {
        if (lambda < epsilon_kernel) ++dim;
    }
    return dim;
}

PricingKernel extract_pricing_kernel(const SectionGrid& section, const MarketScenario& scenario,
                                     std::span<const double> x_ref, uint64_t seed) {
    const std::size_t n_times = section.times.size();
    const std::size_t n_x = section.x_grid.size();
    bool any_pos = false, any_neg = false;
    for (double v : section.values) {
        any_pos = any_pos || v > 0.0;
        any_neg = any_neg || v < 0.0;
    }
    if (any_pos && any_neg) {
        throw Error(ErrorCode::sign_change, "section changes sign: not a kernel candidate");
    }
    const double sign = any_neg ? -1.0 : 1.0;

    // multilinear interpolation of the section at x_ref
    const auto section_at = [&](std::size_t t) {
        const XGrid& g = section.x_grid;
        std::array<std::size_t, 3> base{0, 0, 0};
        std::array<double, 3> frac{0.0, 0.0, 0.0};
        for (std::size_t d = 0; d < g.dim(); ++d) {
            const double pos = (x_ref[d] - g.coordinate(d, 0)) / g.step(d);
            if (pos < -1e-9 || pos > static_cast<double>(g.nodes(d) - 1) + 1e-9) {
                throw Error(ErrorCode::config_invalid, "x_ref outside the grid");
            }
            const double clamped =
                std::clamp(pos, 0.0, static_cast<double>(g.nodes(d) - 1) - 1e-12);
            base[d] = static_cast<std::size_t>(clamped);
            frac[d] = clamped - static_cast<double>(base[d]);
        }
        double value = 0.0;
        const std::size_t corners = std::size_t{1} << g.dim();
        for (std::size_t c = 0; c < corners; ++c) {
            double w = 1.0;
            std::array<std::size_t, 3> idx = base;
            for (std::size_t d = 0; d < g.dim(); ++d) {
                if (c & (std::size_t{1} << d)) {
                    idx[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            value += w * section.at(t, g.flatten(idx));
        }
        return sign * value;
    };

    PricingKernel kernel;
    kernel.beta.resize(n_times);
    for (std::size_t t = 0; t < n_times; ++t) {
        const double f_ref = section_at(t);
        if (!(f_ref > 0.0)) {
            throw Error(ErrorCode::sign_change, "section vanishes at the reference nominals");
        }
        kernel.beta[t] = 1.0 / (f_ref * portfolio_deflator(scenario, x_ref, t));
    }
    const double beta0 = kernel.beta[0];
    for (double& b : kernel.beta) b /= beta0;

    // spot-check D log(beta D^x) + r^x ~ 0 at seeded random interior nodes
    double worst = 0.0;
    const std::size_t n_checks = 100;
    for (std::size_t c = 0; c < n_checks; ++c) {
        const auto u1 = philox_uniform(seed, c, 1, 0);
        const auto u2 = philox_uniform(seed, c, 2, 0);
        const std::size_t t = 1 + static_cast<std::size_t>(u1 * static_cast<double>(n_times - 2));
        const std::size_t m = static_cast<std::size_t>(u2 * static_cast<double>(n_x));
        const auto x = section.x_grid.point(std::min(m, n_x - 1));
        const double dt2 = section.times[t + 1] - section.times[t - 1];
        const double lp = std::log(kernel.beta[t + 1] *
                                   std::abs(portfolio_deflator(scenario, x, t + 1)));
        const double lm = std::log(kernel.beta[t - 1] *
                                   std::abs(portfolio_deflator(scenario, x, t - 1)));
        const double res = (lp - lm) / dt2 + portfolio_short_rate(scenario, x, t);
        worst = std::max(worst, std::abs(res));
    }
    kernel.check_residual = worst;
    return kernel;
}

double radon_nikodym(const SectionGrid& section, const MarketScenario& scenario, std::size_t t) {
    const std::size_t n_x = section.x_grid.size();
    if (t >= section.times.size()) {
        throw Error(ErrorCode::config_invalid, "time index out of range");
    }
    double vmin = 0.0, vmax = 0.0, sum = 0.0;
    for (std::size_t m = 0; m < n_x; ++m) {
        const auto x = section.x_grid.point(m);
        const double d_t = portfolio_deflator(scenario, x, t);
        const double d_0 = portfolio_deflator(scenario, x, 0);
        const double f_0 = section.at(0, m);
        const double f_t = section.at(t, m);
        if (f_t == 0.0) throw Error(ErrorCode::sign_change, "section vanishes on the grid");
        // beta_t/beta_0 with f = 1/(beta D^x); independent of the column x
        const double v = d_0 / d_t * f_0 / f_t;
        if (m == 0) {
            vmin = vmax = v;
        } else {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        sum += v;
    }
    const double mean = sum / static_cast<double>(n_x);
    const double spread = (vmax - vmin) / std::max(std::abs(mean), 1e-300);
    if (spread > 1e-3) {
        throw Error(ErrorCode::x_dependence,
                    "Radon-Nikodym cross-column spread " + std::to_string(spread));
    }
    return mean;
}

CompletenessVerdict is_complete(const SpectralResult& result, double epsilon_kernel,
                                bool deterministic_model) {
    if (!deterministic_model) {
        throw Error(ErrorCode::not_applicable,
                    "completeness verdict only applies to deterministic single-scenario models");
    }
    const std::size_t dim = kernel_dimension(result, epsilon_kernel);
    if (dim == 0) return CompletenessVerdict::no_kernel;
    if (dim == 1) return CompletenessVerdict::complete;
    return CompletenessVerdict::incomplete;
}

const char* to_string(CompletenessVerdict verdict) {
    switch (verdict) {
        case CompletenessVerdict::complete: return "COMPLETE";
        case CompletenessVerdict::incomplete: return "INCOMPLETE";
        case CompletenessVerdict::no_kernel: return "NO-KERNEL";
    }
    return "?";
}

double default_epsilon_kernel(std::size_t nodes_per_axis) {
    if (nodes_per_axis < 2) throw Error(ErrorCode::config_invalid, "grid too small");
    const double ratio = 64.0 / static_cast<double>(nodes_per_axis - 1);
    return 1e-8 * ratio * ratio;
}

} // namespace ga
