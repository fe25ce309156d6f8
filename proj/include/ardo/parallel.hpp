#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace ardo {

namespace detail {

inline std::atomic<std::size_t>& lane_override() {
  static std::atomic<std::size_t> lanes{0};
  return lanes;
}

inline thread_local bool inside_parallel_region = false;

}  // namespace detail

/// Number of worker lanes: set_lane_count() if called, else ARDO_THREADS,
/// else the hardware concurrency.
inline std::size_t lane_count() {
  if (const std::size_t forced = detail::lane_override().load()) return forced;
  if (const char* env = std::getenv("ARDO_THREADS")) {
    try {
      const long parsed = std::stol(env);
      if (parsed > 0) return static_cast<std::size_t>(parsed);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Overrides the lane count for this process; 0 restores the default lookup.
inline void set_lane_count(std::size_t lanes) { detail::lane_override().store(lanes); }

/// Runs fn(i) for i in [0, tasks). Tasks must write to disjoint outputs; the
/// task decomposition never depends on the lane count. Nested calls run
/// sequentially on the calling lane.
template <class Fn>
void parallel_for(std::size_t tasks, Fn&& fn) {
  const std::size_t lanes = std::min(lane_count(), tasks);
  if (lanes <= 1 || detail::inside_parallel_region) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    detail::inside_parallel_region = true;
    for (std::size_t i = next.fetch_add(1); i < tasks; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    detail::inside_parallel_region = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(lanes - 1);
  for (std::size_t lane = 1; lane < lanes; ++lane) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) summation with a fixed association order.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Tree reduction of a list of vector-like partials (in place, returns the root).
template <class V>
V pairwise_reduce(std::vector<V> parts) {
  if (parts.empty()) return V{};
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) parts[i] += parts[i + stride];
  }
  return std::move(parts.front());
}

}  // namespace ardo
