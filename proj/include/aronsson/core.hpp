// Small fixed-size linear algebra in the plane, error types and a
// deterministic parallel loop shared by every module.
#ifndef ARONSSON_CORE_HPP
#define ARONSSON_CORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace aronsson {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorKind { validation, numerical, io, domain };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

  /// Process exit code used by the command line driver.
  int exit_code() const noexcept {
    switch (kind_) {
    case ErrorKind::validation:
    case ErrorKind::domain: return 2;
    case ErrorKind::numerical: return 3;
    case ErrorKind::io: return 4;
    }
    return 1;
  }

  static const char *kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::domain: return "domain";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
    }
    return "unknown";
  }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &msg) { throw Error(kind, msg); }

// ---------------------------------------------------------------------------
// Vectors and symmetric matrices in R^2

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr double operator[](int i) const { return i == 0 ? x : y; }
  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 &operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2 &operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2 &) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  constexpr Sym2() = default;
  constexpr Sym2(double a, double b, double c) : xx(a), xy(b), yy(c) {}
  static constexpr Sym2 identity() { return {1.0, 0.0, 1.0}; }
  static constexpr Sym2 outer(Vec2 a) { return {a.x * a.x, a.x * a.y, a.y * a.y}; }
  /// Symmetrized outer product a b^T + b a^T.
  static constexpr Sym2 sym_outer(Vec2 a, Vec2 b) {
    return {2.0 * a.x * b.x, a.x * b.y + a.y * b.x, 2.0 * a.y * b.y};
  }

  constexpr double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? xx : xy) : (j == 0 ? xy : yy);
  }
  constexpr double det() const { return xx * yy - xy * xy; }
  constexpr double trace() const { return xx + yy; }
  constexpr Vec2 operator*(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  constexpr Sym2 operator+(Sym2 o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
  constexpr Sym2 operator-(Sym2 o) const { return {xx - o.xx, xy - o.xy, yy - o.yy}; }
  constexpr Sym2 operator*(double s) const { return {xx * s, xy * s, yy * s}; }
  constexpr bool operator==(const Sym2 &) const = default;

  /// Cofactor (adjugate) matrix; for symmetric A this is [[a22, -a12], [-a12, a11]].
  constexpr Sym2 adjugate() const { return {yy, -xy, xx}; }
  Sym2 inverse() const {
    const double d = det();
    if (d == 0.0) fail(ErrorKind::numerical, "singular 2x2 matrix");
    return adjugate() * (1.0 / d);
  }
  constexpr double quad(Vec2 v) const { return dot(v, (*this) * v); }

  /// Eigenvalues, smaller first.
  std::array<double, 2> eigenvalues() const {
    const double m = 0.5 * (xx + yy);
    const double r = std::hypot(0.5 * (xx - yy), xy);
    return {m - r, m + r};
  }
  /// Spectral norm.
  double norm() const {
    auto ev = eigenvalues();
    return std::max(std::abs(ev[0]), std::abs(ev[1]));
  }
  /// Ratio of largest to smallest absolute eigenvalue (inf when singular).
  double condition() const {
    auto ev = eigenvalues();
    const double lo = std::min(std::abs(ev[0]), std::abs(ev[1]));
    const double hi = std::max(std::abs(ev[0]), std::abs(ev[1]));
    return lo == 0.0 ? std::numeric_limits<double>::infinity() : hi / lo;
  }
};

constexpr Sym2 operator*(double s, const Sym2 &m) { return m * s; }

/// Fully symmetric third-order tensor in R^2, T_ijk.
struct Sym3 {
  double xxx = 0.0;
  double xxy = 0.0;
  double xyy = 0.0;
  double yyy = 0.0;

  constexpr double operator()(int i, int j, int k) const {
    const int ny = i + j + k;
    switch (ny) {
    case 0: return xxx;
    case 1: return xxy;
    case 2: return xyy;
    default: return yyy;
    }
  }
  /// Contraction T_ijk v_k.
  constexpr Sym2 contract(Vec2 v) const {
    return {xxx * v.x + xxy * v.y, xxy * v.x + xyy * v.y, xyy * v.x + yyy * v.y};
  }
  constexpr Sym3 operator+(Sym3 o) const {
    return {xxx + o.xxx, xxy + o.xxy, xyy + o.xyy, yyy + o.yyy};
  }
  constexpr Sym3 operator*(double s) const { return {xxx * s, xxy * s, xyy * s, yyy * s}; }
};

constexpr double pi = 3.14159265358979323846;

inline Vec2 unit(double theta) { return {std::cos(theta), std::sin(theta)}; }

// ---------------------------------------------------------------------------
// Parallel loop with a fixed partition. Each index is written by exactly one
// worker, so results do not depend on the thread count.

inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("ARONSSON_LAB_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

template <class F>
void parallel_for(std::size_t n, F &&body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto &t : pool) t.join();
}

/// Sum in index order; the fixed order keeps reductions bit-reproducible.
inline double ordered_sum(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1], with its first
/// two derivatives.
struct Smoothstep {
  double value;
  double d1;
  double d2;
};

inline Smoothstep smoothstep5(double t) {
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {t3 * (10.0 + t * (-15.0 + 6.0 * t)), 30.0 * t2 * (1.0 - t) * (1.0 - t),
          60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)};
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on the Legendre
/// recurrence).
inline void gauss_legendre(int n, std::vector<double> &nodes, std::vector<double> &weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

} // namespace aronsson

#endif // ARONSSON_CORE_HPP
