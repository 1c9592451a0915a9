// Node-centred uniform grids on rectangles and finite-difference calculus.
#ifndef ARONSSON_GRID_HPP
#define ARONSSON_GRID_HPP

#include "core.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace aronsson {

struct Rect {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(Vec2 p, double tol = 0.0) const {
    return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
  }
  bool contains(const Rect &r, double tol = 0.0) const {
    return r.x0 >= x0 - tol && r.x1 <= x1 + tol && r.y0 >= y0 - tol && r.y1 <= y1 + tol;
  }
  /// Distance from this rectangle to the boundary of an enclosing one.
  double dist_to_boundary_of(const Rect &outer) const {
    return std::min({x0 - outer.x0, outer.x1 - x1, y0 - outer.y0, outer.y1 - y1});
  }
  /// Rectangle shrunk by the fraction f of its size on every side.
  Rect inset(double f) const {
    return {x0 + f * width(), x1 - f * width(), y0 + f * height(), y1 - f * height()};
  }
};

/// Inclusive node index box.
struct NodeRange {
  int i0, i1, j0, j1;
  int count() const { return (i1 - i0 + 1) * (j1 - j0 + 1); }
};

class Grid2D {
public:
  Grid2D() = default;
  Grid2D(int nx, int ny, Rect box) : nx_(nx), ny_(ny), box_(box) {
    if (nx < 3 || ny < 3) fail(ErrorKind::validation, "grid needs at least 3 nodes per direction");
    if (!(box.x1 > box.x0) || !(box.y1 > box.y0)) fail(ErrorKind::validation, "grid rectangle must have positive size");
    hx_ = box.width() / (nx - 1);
    hy_ = box.height() / (ny - 1);
  }
  static Grid2D square(int n, Rect box) { return Grid2D(n, n, box); }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double h() const { return std::max(hx_, hy_); }
  const Rect &box() const { return box_; }
  double x(int i) const { return i == nx_ - 1 ? box_.x1 : box_.x0 + i * hx_; }
  double y(int j) const { return j == ny_ - 1 ? box_.y1 : box_.y0 + j * hy_; }
  Vec2 point(int i, int j) const { return {x(i), y(j)}; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx_ - 1 || j == ny_ - 1; }

  /// Nodes lying in r (with a small tolerance); domain error when r leaves the grid.
  NodeRange range(const Rect &r) const {
    const double tx = 1e-9 * hx_, ty = 1e-9 * hy_;
    if (!box_.contains(r, 1e-12 * (1.0 + box_.width() + box_.height())) || r.x1 < r.x0 || r.y1 < r.y0) {
      std::ostringstream os;
      os << "rectangle [" << r.x0 << "," << r.x1 << "]x[" << r.y0 << "," << r.y1 << "] is not inside the grid";
      fail(ErrorKind::domain, os.str());
    }
    NodeRange nr{static_cast<int>(std::ceil((r.x0 - box_.x0 - tx) / hx_)),
                 static_cast<int>(std::floor((r.x1 - box_.x0 + tx) / hx_)),
                 static_cast<int>(std::ceil((r.y0 - box_.y0 - ty) / hy_)),
                 static_cast<int>(std::floor((r.y1 - box_.y0 + ty) / hy_))};
    nr.i0 = std::max(nr.i0, 0);
    nr.j0 = std::max(nr.j0, 0);
    nr.i1 = std::min(nr.i1, nx_ - 1);
    nr.j1 = std::min(nr.j1, ny_ - 1);
    if (nr.i1 < nr.i0 || nr.j1 < nr.j0) fail(ErrorKind::domain, "rectangle contains no grid nodes");
    return nr;
  }
  NodeRange interior() const { return {1, nx_ - 2, 1, ny_ - 2}; }

  bool operator==(const Grid2D &o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && box_.x0 == o.box_.x0 && box_.x1 == o.box_.x1 && box_.y0 == o.box_.y0 &&
           box_.y1 == o.box_.y1;
  }

private:
  int nx_ = 0, ny_ = 0;
  Rect box_{};
  double hx_ = 0.0, hy_ = 0.0;
};

/// Scalar field on a grid, row-major (index j * nx + i).
class GridFunction {
public:
  GridFunction() = default;
  explicit GridFunction(const Grid2D &g, double fill = 0.0) : grid_(g), v_(g.size(), fill) {}
  GridFunction(const Grid2D &g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) fail(ErrorKind::validation, "value count does not match the grid");
  }

  template <class F>
  static GridFunction sample(const Grid2D &g, F &&f) {
    GridFunction out(g);
    parallel_for(static_cast<std::size_t>(g.ny()), [&](std::size_t j) {
      for (int i = 0; i < g.nx(); ++i) out(i, static_cast<int>(j)) = f(g.x(i), g.y(static_cast<int>(j)));
    });
    return out;
  }

  const Grid2D &grid() const { return grid_; }
  double &operator()(int i, int j) { return v_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return v_[grid_.index(i, j)]; }
  double &operator[](std::size_t k) { return v_[k]; }
  double operator[](std::size_t k) const { return v_[k]; }
  const std::vector<double> &values() const { return v_; }
  std::vector<double> &values() { return v_; }
  std::size_t size() const { return v_.size(); }

  GridFunction operator+(const GridFunction &o) const { return zip(o, [](double a, double b) { return a + b; }); }
  GridFunction operator-(const GridFunction &o) const { return zip(o, [](double a, double b) { return a - b; }); }
  GridFunction operator*(const GridFunction &o) const { return zip(o, [](double a, double b) { return a * b; }); }
  GridFunction operator*(double s) const {
    GridFunction r = *this;
    for (double &x : r.v_) x *= s;
    return r;
  }
  template <class F>
  GridFunction map(F &&f) const {
    GridFunction r = *this;
    for (double &x : r.v_) x = f(x);
    return r;
  }

  bool finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  double max_abs_on(const NodeRange &r) const {
    double m = 0.0;
    for (int j = r.j0; j <= r.j1; ++j)
      for (int i = r.i0; i <= r.i1; ++i) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }
  double boundary_min() const { return boundary_reduce(true); }
  double boundary_max() const { return boundary_reduce(false); }

private:
  template <class F>
  GridFunction zip(const GridFunction &o, F &&f) const {
    if (!(grid_ == o.grid_)) fail(ErrorKind::validation, "grid functions live on different grids");
    GridFunction r(grid_);
    for (std::size_t k = 0; k < v_.size(); ++k) r.v_[k] = f(v_[k], o.v_[k]);
    return r;
  }
  double boundary_reduce(bool lo) const {
    double m = lo ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid_.ny(); ++j)
      for (int i = 0; i < grid_.nx(); ++i)
        if (grid_.on_boundary(i, j)) m = lo ? std::min(m, (*this)(i, j)) : std::max(m, (*this)(i, j));
    return m;
  }

  Grid2D grid_{};
  std::vector<double> v_;
};

struct VectorField {
  GridFunction x, y;
};

struct Sym2Field {
  GridFunction xx, xy, yy;
  Sym2 at(int i, int j) const { return {xx(i, j), xy(i, j), yy(i, j)}; }
};

// ---------------------------------------------------------------------------
// Stencils

namespace detail {

// First derivative along one axis of a strided line of n samples.
inline double d1(const double *f, std::ptrdiff_t stride, int k, int n, double h) {
  if (k == 0) return (-3.0 * f[0] + 4.0 * f[stride] - f[2 * stride]) / (2.0 * h);
  if (k == n - 1) {
    const double *e = f + (n - 1) * stride;
    return (3.0 * e[0] - 4.0 * e[-stride] + e[-2 * stride]) / (2.0 * h);
  }
  const double *c = f + k * stride;
  return (c[stride] - c[-stride]) / (2.0 * h);
}

inline double d2(const double *f, std::ptrdiff_t stride, int k, int n, double h) {
  if (n == 3) return (f[0] - 2.0 * f[stride] + f[2 * stride]) / (h * h);
  if (k == 0) return (2.0 * f[0] - 5.0 * f[stride] + 4.0 * f[2 * stride] - f[3 * stride]) / (h * h);
  if (k == n - 1) {
    const double *e = f + (n - 1) * stride;
    return (2.0 * e[0] - 5.0 * e[-stride] + 4.0 * e[-2 * stride] - e[-3 * stride]) / (h * h);
  }
  const double *c = f + k * stride;
  return (c[stride] - 2.0 * c[0] + c[-stride]) / (h * h);
}

} // namespace detail

inline GridFunction diff_x(const GridFunction &f) {
  const Grid2D &g = f.grid();
  GridFunction out(g);
  for (int j = 0; j < g.ny(); ++j) {
    const double *row = &f.values()[g.index(0, j)];
    for (int i = 0; i < g.nx(); ++i) out(i, j) = detail::d1(row, 1, i, g.nx(), g.hx());
  }
  return out;
}

inline GridFunction diff_y(const GridFunction &f) {
  const Grid2D &g = f.grid();
  GridFunction out(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) out(i, j) = detail::d1(&f.values()[i], g.nx(), j, g.ny(), g.hy());
  return out;
}

inline VectorField gradient(const GridFunction &f) { return {diff_x(f), diff_y(f)}; }

/// Pure second derivatives by the three-point stencil; mixed by the cross stencil.
inline Sym2Field hessian(const GridFunction &f) {
  const Grid2D &g = f.grid();
  GridFunction fxx(g), fyy(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      fxx(i, j) = detail::d2(&f.values()[g.index(0, j)], 1, i, g.nx(), g.hx());
      fyy(i, j) = detail::d2(&f.values()[i], g.nx(), j, g.ny(), g.hy());
    }
  return {fxx, diff_y(diff_x(f)), fyy};
}

inline GridFunction divergence(const GridFunction &vx, const GridFunction &vy) { return diff_x(vx) + diff_y(vy); }
inline GridFunction divergence(const VectorField &v) { return divergence(v.x, v.y); }

// ---------------------------------------------------------------------------
// Quadrature

/// Trapezoid weight of node k in a closed index range [a, b].
inline double trapezoid_weight(int k, int a, int b) { return (k == a || k == b) ? 0.5 : 1.0; }

/// Trapezoid rule for the integral of f over the nodes in r.
inline double integrate_on(const GridFunction &f, const NodeRange &r) {
  const Grid2D &g = f.grid();
  double s = 0.0;
  for (int j = r.j0; j <= r.j1; ++j) {
    double row = 0.0;
    for (int i = r.i0; i <= r.i1; ++i) row += trapezoid_weight(i, r.i0, r.i1) * f(i, j);
    s += trapezoid_weight(j, r.j0, r.j1) * row;
  }
  return s * g.hx() * g.hy();
}

inline double integrate(const GridFunction &f) {
  return integrate_on(f, {0, f.grid().nx() - 1, 0, f.grid().ny() - 1});
}

/// Smooth cutoff equal to 1 on V and vanishing outside U, with recorded
/// scale-free bounds |D phi| dist <= grad_const and |D^2 phi| dist^2 <= hess_const.
struct TestFunction {
  GridFunction phi;
  Rect inner;
  Rect outer;
  double grad_const = 0.0;
  double hess_const = 0.0;
};

inline double integrate(const GridFunction &f, const TestFunction &phi) { return integrate(f * phi.phi); }

namespace detail {
inline Smoothstep collar(double x, double a0, double b0, double b1, double a1) {
  auto lo = smoothstep5((x - a0) / (b0 - a0));
  auto hi = smoothstep5((a1 - x) / (a1 - b1));
  const double s0 = 1.0 / (b0 - a0), s1 = 1.0 / (a1 - b1);
  return {lo.value * hi.value, lo.d1 * s0 * hi.value - lo.value * hi.d1 * s1,
          lo.d2 * s0 * s0 * hi.value - 2.0 * lo.d1 * s0 * hi.d1 * s1 + lo.value * hi.d2 * s1 * s1};
}
} // namespace detail

/// Tensor product of quintic smoothstep ramps across the collar between V and U.
inline TestFunction make_cutoff(const Grid2D &g, const Rect &V, const Rect &U) {
  if (!U.contains(V) || !(V.x0 > U.x0 && V.x1 < U.x1 && V.y0 > U.y0 && V.y1 < U.y1))
    fail(ErrorKind::domain, "cutoff needs V strictly inside U");
  const Rect ring{g.box().x0 + 2.0 * g.hx(), g.box().x1 - 2.0 * g.hx(), g.box().y0 + 2.0 * g.hy(),
                  g.box().y1 - 2.0 * g.hy()};
  if (!ring.contains(U, 1e-12)) fail(ErrorKind::domain, "cutoff support must avoid the two outermost node rings");
  TestFunction t;
  t.inner = V;
  t.outer = U;
  t.phi = GridFunction(g);
  const double d = V.dist_to_boundary_of(U);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      auto a = detail::collar(g.x(i), U.x0, V.x0, V.x1, U.x1);
      auto b = detail::collar(g.y(j), U.y0, V.y0, V.y1, U.y1);
      t.phi(i, j) = a.value * b.value;
      const double gx = a.d1 * b.value, gy = a.value * b.d1;
      const Sym2 hs{a.d2 * b.value, a.d1 * b.d1, a.value * b.d2};
      t.grad_const = std::max(t.grad_const, std::hypot(gx, gy) * d);
      t.hess_const = std::max(t.hess_const, hs.norm() * d * d);
    }
  return t;
}

/// Cutoff bump: 1 on the square of half-width r/2 about c, 0 outside half-width r.
inline TestFunction make_bump(const Grid2D &g, Vec2 c, double r) {
  return make_cutoff(g, {c.x - 0.5 * r, c.x + 0.5 * r, c.y - 0.5 * r, c.y + 0.5 * r},
                     {c.x - r, c.x + r, c.y - r, c.y + r});
}

/// L2 norm over V of the gradient (full-grid stencils, trapezoid weights on the nodes of V).
inline double w12_seminorm(const GridFunction &f, const Rect &V) {
  const NodeRange r = f.grid().range(V);
  const VectorField d = gradient(f);
  return std::sqrt(integrate_on(d.x * d.x + d.y * d.y, r));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const GridFunction &f, const std::string &path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << "x,y,value\n";
  const Grid2D &g = f.grid();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      out << format_double(g.x(i)) << ',' << format_double(g.y(j)) << ',' << format_double(f(i, j)) << '\n';
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

inline GridFunction read_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<double> xs, ys, vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y, v;
    if (!(ls >> x >> y >> v)) fail(ErrorKind::validation, "malformed row in " + path);
    xs.push_back(x);
    ys.push_back(y);
    vs.push_back(v);
  }
  std::vector<double> ux = xs, uy = ys;
  auto uniq = [](std::vector<double> &v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(ux);
  uniq(uy);
  if (ux.size() < 3 || uy.size() < 3 || ux.size() * uy.size() != vs.size())
    fail(ErrorKind::validation, path + " is not a full grid");
  Grid2D g(static_cast<int>(ux.size()), static_cast<int>(uy.size()), {ux.front(), ux.back(), uy.front(), uy.back()});
  GridFunction f(g);
  for (std::size_t k = 0; k < vs.size(); ++k) {
    const int i = static_cast<int>(std::lower_bound(ux.begin(), ux.end(), xs[k]) - ux.begin());
    const int j = static_cast<int>(std::lower_bound(uy.begin(), uy.end(), ys[k]) - uy.begin());
    f(i, j) = vs[k];
  }
  return f;
}

} // namespace aronsson

#endif // ARONSSON_GRID_HPP
