#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fraccap {

/// Sums terms[0..n) with an index-ascending pairwise tree reduction.
/// The result depends only on the term values and their order, never on
/// chunking or worker count, so parallel callers that fill `terms` by
/// index and then reduce get bit-identical output.
inline double pairwise_sum(const double* terms, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += terms[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(terms, half) + pairwise_sum(terms + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& terms) {
  return pairwise_sum(terms.data(), terms.size());
}

/// Global worker count for parallel_for. 1 = fully serial.
inline int& worker_count() {
  static int n = 1;
  return n;
}

/// Runs fn(i) for i in [0,n). Tasks write only to their own slots, so the
/// outcome is identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int workers = worker_count();
  if (workers <= 1 || n < 16) {  // thread spawn dwarfs tiny loops
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<std::size_t>(workers, n));
  pool.reserve(spawn);
  for (int t = 1; t < spawn; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

/// Formats a double with 17 significant digits, enough for an exact
/// parse round trip of any IEEE-754 double.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// FNV-1a over raw bytes; used for content hashes of spaces and cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t seed = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), seed);
}

inline std::uint64_t hash_mix(std::uint64_t h, double v) {
  return fnv1a(&v, sizeof(v), h);
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  return fnv1a(&v, sizeof(v), h);
}

struct invalid_argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace fraccap
