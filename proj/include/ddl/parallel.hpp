#ifndef DDL_PARALLEL_HPP
#define DDL_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>

namespace ddl {

/// Caps the OpenMP worker pool. Values < 1 restore the runtime default.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n) on the worker pool. Each index must write only
/// to its own output slot; with that discipline results do not depend on the
/// thread count. The first exception thrown by any body is rethrown here.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ddl

#endif  // DDL_PARALLEL_HPP
