#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <thread>
#include <vector>

namespace spiralir {

using cplx = std::complex<double>;
using cplxf = std::complex<float>;

inline constexpr double kPi = std::numbers::pi;

// FNV-1a 64-bit; used for schedule identity and manifest content hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One global seed fans out to per-stage seeds; an extra index separates
// per-epoch streams so resumed runs replay the same draws.
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view stage,
                                 std::uint64_t index = 0) {
  return splitmix64(global ^ fnv1a64(stage) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
}

template <typename T>
struct Grid {
  int h = 0, w = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int h_, int w_, T fill = T{}) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  T& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  const T& at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const { return v.size(); }
};

// Column-stacked dynamic series: one complex image per time frame.
struct FrameStack {
  int n = 0, h = 0, w = 0;
  std::vector<cplx> v;

  FrameStack() = default;
  FrameStack(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * h_ * w_) {}

  cplx* frame(int i) { return v.data() + static_cast<std::size_t>(i) * h * w; }
  const cplx* frame(int i) const { return v.data() + static_cast<std::size_t>(i) * h * w; }
  std::size_t frame_size() const { return static_cast<std::size_t>(h) * w; }
};

inline double mean_of(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline double variance_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need two equal-length series of length >= 2");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) throw std::invalid_argument("pearson: zero-variance input");
  return sab / std::sqrt(saa * sbb);
}

// Z-score in place; zero-variance series are mapped to all zeros.
inline void zscore(std::vector<double>& x) {
  const double m = mean_of(x);
  const double sd = std::sqrt(variance_of(x));
  for (double& v : x) v = sd > 1e-12 ? (v - m) / sd : 0.0;
}

// Static-partition parallel map over [0, n). Each index writes only its own
// outputs, so results are independent of the thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int n_threads = 0) {
  if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  n_threads = std::min(n_threads, n);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace spiralir
