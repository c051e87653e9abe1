#pragma once
// Small shared utilities: errors, deterministic formatting, hashing,
// a minimal parallel_for, and geometry helpers on the torus.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kamlab {

struct KamError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapacityError : KamError {
  using KamError::KamError;
};
struct ResolutionError : KamError {
  using KamError::KamError;
};
struct ConvergenceError : KamError {
  using KamError::KamError;
};
struct ConfigError : KamError {
  using KamError::KamError;
};
struct GeometryError : KamError {
  using KamError::KamError;
};

inline constexpr double TWO_PI = 6.283185307179586476925286766559;

// Wrap into [0,1).
inline double wrap01(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;
  return y;
}

// Signed distance on the unit circle, in (-1/2, 1/2].
inline double circ_diff(double a, double b) {
  double d = wrap01(a - b);
  if (d > 0.5) d -= 1.0;
  return d;
}

inline double circ_dist(double a, double b) { return std::fabs(circ_diff(a, b)); }

// Deterministic shortest-round-trip-safe formatting for reports.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// FNV-1a 64-bit content hash, used for output manifests.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(const std::string& s) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)fnv1a(s));
  return buf;
}

// Global worker count for data-parallel loops (set by the CLI --threads flag).
int& worker_count();

// Static-partition parallel for over [0, n). Falls back to a serial loop for
// one worker. The body must not touch shared mutable state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

// Uniform torus grid points j/n, j=0..n-1.
inline std::vector<double> torus_grid(int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = double(i) / n;
  return v;
}

using Rng = std::mt19937_64;

}  // namespace kamlab
