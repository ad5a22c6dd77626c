#pragma once

// Small numerical toolbox shared by every module: bisection, quadrature
// wrappers, finite differences, symmetric eigenvalues, deterministic hashing
// and a chunked parallel loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dbell/errors.hpp"

namespace dbell::num {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BisectionOptions {
  double rel_tol = 1e-12;
  int max_iter = 200;
  /// Use the geometric midpoint (both endpoints must be positive).
  bool geometric = false;
};

struct BisectionResult {
  double x;
  int iterations;
};

/// Root of a function with a sign change on [lo, hi].
template <class F>
BisectionResult bisect(F&& f, double lo, double hi, const BisectionOptions& opt = {}) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, 0};
  if (fhi == 0.0) return {hi, 0};
  if ((flo > 0.0) == (fhi > 0.0)) {
    std::ostringstream os;
    os << "bisection bracket has no sign change: f(" << lo << ")=" << flo << ", f(" << hi
       << ")=" << fhi;
    throw InternalError(os.str());
  }
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double mid = opt.geometric ? std::sqrt(lo) * std::sqrt(hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return {mid, it + 1};
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= opt.rel_tol * std::max(std::abs(lo), std::abs(hi))) {
      ++it;
      break;
    }
  }
  return {0.5 * (lo + hi), it};
}

// ---------------------------------------------------------------------------
// Quadrature. Integrators precompute abscissas, so they are cached per thread.

inline constexpr double kQuadTol = 1e-13;

template <class F>
double integrate_finite(F&& f, double a, double b, double tol = kQuadTol) {
  if (a == b) return 0.0;
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  return integrator.integrate(f, a, b, tol);
}

/// Integral over [a, +inf); handles algebraic as well as exponential decay.
template <class F>
double integrate_to_infinity(F&& f, double a, double tol = kQuadTol) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(f, a, kInf, tol);
}

/// Adaptive Gauss-Kronrod (15 points); an independent rule for cross-checks.
template <class F>
double integrate_gauss_kronrod(F&& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 30, tol);
}

// ---------------------------------------------------------------------------
// Finite differences.

template <std::size_t N>
using Point = std::array<double, N>;

/// Step used for coordinate i: rel * max(|x_i|, floor).
template <std::size_t N>
Point<N> relative_steps(const Point<N>& x, double rel, double floor = 1e-12) {
  Point<N> h{};
  for (std::size_t i = 0; i < N; ++i) h[i] = rel * std::max(std::abs(x[i]), floor);
  return h;
}

template <std::size_t N, class F>
Point<N> central_gradient(F&& f, const Point<N>& x, const Point<N>& h) {
  Point<N> g{};
  for (std::size_t i = 0; i < N; ++i) {
    Point<N> xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    g[i] = (f(xp) - f(xm)) / (2.0 * h[i]);
  }
  return g;
}

/// Second-difference Hessian; mixed entries use the symmetric four-point
/// stencil, so the result is symmetric by construction.
template <std::size_t N, class F>
Eigen::Matrix<double, N, N> second_difference_hessian(F&& f, const Point<N>& x,
                                                      const Point<N>& h) {
  Eigen::Matrix<double, N, N> H;
  const double f0 = f(x);
  for (std::size_t i = 0; i < N; ++i) {
    Point<N> xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (std::size_t j = i + 1; j < N; ++j) {
      Point<N> pp = x, pm = x, mp = x, mm = x;
      pp[i] += h[i], pp[j] += h[j];
      pm[i] += h[i], pm[j] -= h[j];
      mp[i] -= h[i], mp[j] += h[j];
      mm[i] -= h[i], mm[j] -= h[j];
      const double v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[i] * h[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

template <int N>
double max_eigenvalue(const Eigen::Matrix<double, N, N>& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

template <int N>
double trace_magnitude(const Eigen::Matrix<double, N, N>& M) {
  double t = 0.0;
  for (int i = 0; i < N; ++i) t += std::abs(M(i, i));
  return t;
}

/// Sum of the absolute values of the six Leibniz terms of a 3x3 determinant:
/// the natural magnitude against which a vanishing determinant is judged.
inline double determinant_scale(const Eigen::Matrix3d& M) {
  const auto& m = M;
  return std::abs(m(0, 0) * m(1, 1) * m(2, 2)) + std::abs(m(0, 1) * m(1, 2) * m(2, 0)) +
         std::abs(m(0, 2) * m(1, 0) * m(2, 1)) + std::abs(m(0, 2) * m(1, 1) * m(2, 0)) +
         std::abs(m(0, 0) * m(1, 2) * m(2, 1)) + std::abs(m(0, 1) * m(1, 0) * m(2, 2));
}

inline double relative_error(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// ---------------------------------------------------------------------------
// Hashing and deterministic per-key randomness.

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform value in [0, 1) determined by (seed, key).
inline double hashed_unit(std::uint64_t seed, std::uint64_t key) {
  return static_cast<double>(splitmix64(seed ^ splitmix64(key)) >> 11) * 0x1.0p-53;
}

/// Seeded generator with portable conversions (the standard distributions
/// are implementation-defined, which would break cross-platform replay).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }
  double exponential() { return -std::log1p(-uniform()); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Parallel loop. TOOL_THREADS caps the worker count; results must be written
// into per-index slots so that reductions stay deterministic.

inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TOOL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

template <class F>
void parallel_for(std::size_t count, F&& body) {
  const unsigned workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1 || count < 64) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

}  // namespace dbell::num
