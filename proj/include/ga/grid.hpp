#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ga/errors.hpp"

namespace ga {

// Axis-aligned box in nominal space.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }

    bool contains(const std::vector<double>& x, double slack = 0.0) const {
        if (x.size() != lo.size()) return false;
        for (std::size_t j = 0; j < lo.size(); ++j) {
            if (x[j] < lo[j] - slack || x[j] > hi[j] + slack) return false;
        }
        return true;
    }
};

// Uniform tensor grid over a Box. At most 3 axes: node counts explode
// beyond that and the spectral pipeline targets desk-scale problems.
class XGrid {
public:
    XGrid() = default;

    XGrid(const Box& domain, std::size_t nodes_per_axis) {
        if (domain.dim() == 0 || domain.dim() > 3) {
            throw Error(ErrorCode::dimension_mismatch,
                        "x-grid supports 1 to 3 axes, got " + std::to_string(domain.dim()));
        }
        if (nodes_per_axis < 2) {
            throw Error(ErrorCode::config_invalid, "x-grid needs at least 2 nodes per axis");
        }
        dim_ = domain.dim();
        total_ = 1;
        for (std::size_t j = 0; j < dim_; ++j) {
            nodes_[j] = nodes_per_axis;
            lo_[j] = domain.lo[j];
            step_[j] = (domain.hi[j] - domain.lo[j]) / static_cast<double>(nodes_per_axis - 1);
            total_ *= nodes_per_axis;
        }
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return total_; }
    std::size_t nodes(std::size_t axis) const { return nodes_[axis]; }
    double step(std::size_t axis) const { return step_[axis]; }

    std::size_t flatten(const std::array<std::size_t, 3>& idx) const {
        std::size_t flat = 0;
        for (std::size_t j = 0; j < dim_; ++j) flat = flat * nodes_[j] + idx[j];
        return flat;
    }

    std::array<std::size_t, 3> unflatten(std::size_t flat) const {
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (std::size_t j = dim_; j-- > 0;) {
            idx[j] = flat % nodes_[j];
            flat /= nodes_[j];
        }
        return idx;
    }

    double coordinate(std::size_t axis, std::size_t i) const {
        return lo_[axis] + step_[axis] * static_cast<double>(i);
    }

    std::vector<double> point(std::size_t flat) const {
        const auto idx = unflatten(flat);
        std::vector<double> x(dim_);
        for (std::size_t j = 0; j < dim_; ++j) x[j] = coordinate(j, idx[j]);
        return x;
    }

    bool on_boundary(std::size_t flat, std::size_t axis) const {
        const auto idx = unflatten(flat);
        return idx[axis] == 0 || idx[axis] + 1 == nodes_[axis];
    }

    // Trapezoid quadrature weight of the node's cell (half-cells at faces).
    double node_weight(std::size_t flat) const {
        const auto idx = unflatten(flat);
        double w = 1.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const bool edge = idx[j] == 0 || idx[j] + 1 == nodes_[j];
            w *= step_[j] * (edge ? 0.5 : 1.0);
        }
        return w;
    }

private:
    std::size_t dim_ = 0;
    std::size_t total_ = 0;
    std::array<std::size_t, 3> nodes_{0, 0, 0};
    std::array<double, 3> lo_{0.0, 0.0, 0.0};
    std::array<double, 3> step_{0.0, 0.0, 0.0};
};

} // namespace ga
