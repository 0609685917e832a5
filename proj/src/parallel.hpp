#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

namespace hcx::detail {

/// OpenMP loop over [0, n) that carries the first thrown exception out of
/// the parallel region. Iterations must be independent.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
    std::exception_ptr error;
    std::mutex guard;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(guard);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

} // namespace hcx::detail
