#pragma once

// OpenMP loop helper that captures the first exception thrown by any
// iteration and rethrows it after the join; exceptions must not escape a
// parallel region.

#include <cstddef>
#include <exception>
#include <mutex>

#include "ga/exec.hpp"

namespace ga::detail {

template <class Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

} // namespace ga::detail
