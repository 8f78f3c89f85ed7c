#pragma once

// Shared centered-difference stencil for x-gradients of node fields. The
// curvature field and the FOC residual both go through this, so they agree
// bitwise on shared nodes.

#include <cstddef>

#include "ga/grid.hpp"

namespace ga::detail {

// value_at(flat_node) -> double; out must hold grid.dim() entries.
template <class Getter>
void axis_gradient(const XGrid& grid, std::size_t node, Getter&& value_at, double* out) {
    const auto idx = grid.unflatten(node);
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        std::size_t stride = 1;
        for (std::size_t j = grid.dim(); j-- > d + 1;) stride *= grid.nodes(j);
        const double h = grid.step(d);
        const std::size_t nd = grid.nodes(d);
        if (idx[d] == 0) {
            out[d] = (-3.0 * value_at(node) + 4.0 * value_at(node + stride) -
                      value_at(node + 2 * stride)) /
                     (2.0 * h);
        } else if (idx[d] + 1 == nd) {
            out[d] = (3.0 * value_at(node) - 4.0 * value_at(node - stride) +
                      value_at(node - 2 * stride)) /
                     (2.0 * h);
        } else {
            out[d] = (value_at(node + stride) - value_at(node - stride)) / (2.0 * h);
        }
    }
}

} // namespace ga::detail
