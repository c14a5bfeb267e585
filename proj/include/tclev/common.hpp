#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tclev {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double inf = std::numeric_limits<double>::infinity();

// Thrown when a Laplace exponent is evaluated outside its analyticity strip,
// i.e. the exponential moment does not exist.
class strip_error : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Adaptive integration ran out of its evaluation budget.
class budget_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An integrand came too close to a pole (exponential-mark reduction).
class pole_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The truncation radius could not be grown enough to meet the tolerance.
class truncation_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  return out;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(begin, end) over a fixed chunking of [0, count). The chunk layout
// does not depend on the worker count, so any per-chunk accumulation is
// deterministic regardless of threading.
template <typename Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (count == 0) return;
  const std::size_t chunk = std::max<std::size_t>(1, (count + 4 * threads - 1) / (4 * threads));
  if (threads <= 1 || count <= chunk) {
    for (std::size_t b = 0; b < count; b += chunk) fn(b, std::min(count, b + chunk));
    return;
  }
  std::vector<std::size_t> starts;
  for (std::size_t b = 0; b < count; b += chunk) starts.push_back(b);
  std::mutex mtx;
  std::size_t next = 0;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t idx;
        {
          std::lock_guard<std::mutex> lk(mtx);
          if (next >= starts.size() || first_error) return;
          idx = next++;
        }
        const std::size_t b = starts[idx];
        try {
          fn(b, std::min(count, b + chunk));
        } catch (...) {
          std::lock_guard<std::mutex> lk(mtx);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tclev
