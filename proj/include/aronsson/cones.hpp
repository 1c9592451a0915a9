// Cone functions C_a(x) = sup{<p, x> : H(p) <= a}, the Lipschitz
// characterization, comparison with cones, McShane extension and the global
// Lipschitz bound.
#ifndef ARONSSON_CONES_HPP
#define ARONSSON_CONES_HPP

#include "diagnostics.hpp"

namespace aronsson {

/// Cone of level a for H: boundary table r(theta) of {H <= a} on equispaced
/// angles, optionally with a dense support table for bulk evaluation.
class ConeFunction {
public:
  static constexpr int default_angles = 512;
  static constexpr int dense_angles = 2048;

  /// With `support_table` the dense support table behind operator() is built too.
  ConeFunction(Hamiltonian H, double a, int n_angles = default_angles, bool support_table = false)
      : H_(std::move(H)), a_(a) {
    if (!(a >= 0.0)) fail(ErrorKind::validation, "cone level must be nonnegative");
    if (n_angles < 8) fail(ErrorKind::validation, "cone table needs at least 8 angles");
    radius_.resize(n_angles);
    parallel_for(radius_.size(), [&](std::size_t j) { radius_[j] = radius_exact(angle(j)); });
    if (support_table) build_support();
  }

  const Hamiltonian &hamiltonian() const { return H_; }
  double level() const { return a_; }
  int angles() const { return static_cast<int>(radius_.size()); }
  double angle(std::size_t j) const { return 2.0 * pi * static_cast<double>(j) / static_cast<double>(radius_.size()); }
  const std::vector<double> &radii() const { return radius_; }
  double max_radius() const { return *std::max_element(radius_.begin(), radius_.end()); }

  /// r(theta) with H(r e_theta) = a, by bisection.
  double radius_exact(double theta) const { return boundary_radius(H_, unit(theta), a_); }

  /// Periodic linear interpolation of the boundary table.
  double radius_at(double theta) const {
    const double n = static_cast<double>(radius_.size());
    double t = std::fmod(theta / (2.0 * pi), 1.0);
    if (t < 0.0) t += 1.0;
    const double s = t * n;
    const std::size_t j = static_cast<std::size_t>(s) % radius_.size();
    const double f = s - std::floor(s);
    return (1.0 - f) * radius_[j] + f * radius_[(j + 1) % radius_.size()];
  }

  /// Support value: best table angle, then golden-section refinement on the
  /// two neighbouring intervals with exact radii.
  double value(Vec2 x) const {
    if (a_ == 0.0 || (x.x == 0.0 && x.y == 0.0)) return 0.0;
    std::size_t best = 0;
    double bv = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < radius_.size(); ++j) {
      const double v = radius_[j] * dot(unit(angle(j)), x);
      if (v > bv) bv = v, best = j;
    }
    const double dt = 2.0 * pi / static_cast<double>(radius_.size());
    auto f = [&](double th) { return radius_exact(th) * dot(unit(th), x); };
    double lo = angle(best) - dt, hi = angle(best) + dt;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > 1e-9) {
      if (fc > fd) {
        hi = d, d = c, fd = fc;
        c = hi - g * (hi - lo), fc = f(c);
      } else {
        lo = c, c = d, fc = fd;
        d = lo + g * (hi - lo), fd = f(d);
      }
    }
    return std::max({bv, fc, fd});
  }

  /// Fast value from the support table: 1-homogeneity plus periodic linear
  /// interpolation in the direction of x.
  double operator()(Vec2 x) const {
    if (a_ == 0.0) return 0.0;
    const double r = norm(x);
    if (r == 0.0) return 0.0;
    if (support_.empty()) fail(ErrorKind::validation, "cone was built without a support table");
    const double n = static_cast<double>(support_.size());
    double t = std::atan2(x.y, x.x) / (2.0 * pi);
    if (t < 0.0) t += 1.0;
    const double s = t * n;
    const std::size_t j = static_cast<std::size_t>(s) % support_.size();
    const double f = s - std::floor(s);
    return r * ((1.0 - f) * support_[j] + f * support_[(j + 1) % support_.size()]);
  }

  /// Boundary table as CSV rows theta,r.
  std::string boundary_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "theta,r\n";
    for (std::size_t j = 0; j < radius_.size(); ++j) os << angle(j) << ',' << radius_[j] << '\n';
    return os.str();
  }

private:
  // Support function on dense_angles directions, from the boundary polygon on
  // dense_angles vertices. The maximizing vertex moves monotonically with the
  // direction, so one sweep suffices.
  void build_support() {
    const std::size_t n = dense_angles;
    std::vector<Vec2> poly(n);
    parallel_for(n, [&](std::size_t j) {
      const double th = 2.0 * pi * static_cast<double>(j) / static_cast<double>(n);
      poly[j] = unit(th) * radius_exact(th);
    });
    support_.assign(n, 0.0);
    std::size_t k = 0;
    const Vec2 e0 = unit(0.0);
    for (std::size_t j = 1; j < n; ++j)
      if (dot(poly[j], e0) > dot(poly[k], e0)) k = j;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 e = unit(2.0 * pi * static_cast<double>(i) / static_cast<double>(n));
      for (std::size_t step = 0; step < n && dot(poly[(k + 1) % n], e) >= dot(poly[k], e); ++step) k = (k + 1) % n;
      support_[i] = dot(poly[k], e);
    }
  }

  Hamiltonian H_;
  double a_;
  std::vector<double> radius_;
  std::vector<double> support_;
};

inline double cone_value(const Hamiltonian &H, double a, Vec2 x) { return ConeFunction(H, a).value(x); }

// ---------------------------------------------------------------------------
// Lipschitz characterization

struct LipschitzCharacterization {
  bool ok = true;
  /// max of u(x) - u(y) - C_a(x - y) over the tested pairs.
  double worst_violation = -std::numeric_limits<double>::infinity();
  Vec2 worst_x, worst_y;
  int segments = 0;
  double slack = 0.0;
  std::uint64_t seed = 0;
};

struct LipschitzOptions {
  int segments = 10000;
  std::uint64_t seed = 2024;
  /// Relative slack on C_a, covering the cone evaluation tolerance.
  double slack_rel = 1e-8;
};

/// Tests u(x) - u(y) <= C_a(x - y) on both orderings of the endpoints of
/// random segments between distinct nodes (the box is convex, so every segment
/// lies in it).
inline LipschitzCharacterization lipschitz_characterization(const GridFunction &u, const Hamiltonian &H, double a,
                                                            LipschitzOptions opt = {}) {
  const Grid2D &g = u.grid();
  const ConeFunction C(H, a);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> I(0, g.nx() - 1), J(0, g.ny() - 1);
  struct Pair {
    int i0, j0, i1, j1;
  };
  std::vector<Pair> pairs(opt.segments);
  for (auto &p : pairs) {
    do p = {I(rng), J(rng), I(rng), J(rng)};
    while (p.i0 == p.i1 && p.j0 == p.j1);
  }
  std::vector<double> viol(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const Pair &p = pairs[k];
    const Vec2 x{g.x(p.i0), g.y(p.j0)}, y{g.x(p.i1), g.y(p.j1)};
    const double cxy = C.value(x - y), cyx = C.value(y - x);
    const double d1 = u(p.i0, p.j0) - u(p.i1, p.j1);
    viol[k] = std::max(d1 - cxy - opt.slack_rel * cxy, -d1 - cyx - opt.slack_rel * cyx);
  });
  LipschitzCharacterization rep;
  rep.segments = opt.segments;
  rep.slack = opt.slack_rel;
  rep.seed = opt.seed;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (viol[k] > rep.worst_violation) {
      rep.worst_violation = viol[k];
      const Pair &p = pairs[k];
      const Vec2 x{g.x(p.i0), g.y(p.j0)}, y{g.x(p.i1), g.y(p.j1)};
      const bool forward = u(p.i0, p.j0) - u(p.i1, p.j1) >= 0.0;
      rep.worst_x = forward ? x : y;
      rep.worst_y = forward ? y : x;
    }
  rep.ok = !(rep.worst_violation > 1e-14);
  return rep;
}

/// Largest H over cell-centred gradients (edge averages) of the interior cells.
inline double max_cell_H(const Hamiltonian &H, const GridFunction &u) {
  const Grid2D &g = u.grid();
  double m = 0.0;
  for (int j = 0; j + 1 < g.ny(); ++j)
    for (int i = 0; i + 1 < g.nx(); ++i) {
      const Vec2 p{0.5 * (u(i + 1, j) - u(i, j) + u(i + 1, j + 1) - u(i, j + 1)) / g.hx(),
                   0.5 * (u(i, j + 1) - u(i, j) + u(i + 1, j + 1) - u(i + 1, j)) / g.hy()};
      m = std::max(m, H(p));
    }
  return m;
}

// ---------------------------------------------------------------------------
// Comparison with cones

struct ConeTrial {
  NodeRange V;
  Vec2 vertex;
  double a = 0.0;
  /// Interior maximum of u - C_a(. - x0) minus its maximum on the boundary of V.
  double excess_above = 0.0;
  /// Boundary minimum of u + C_a(x0 - .) minus its interior minimum.
  double excess_below = 0.0;
  double slack = 0.0;
  double worst() const { return std::max(excess_above, excess_below); }
  bool violated() const { return worst() > slack; }
};

struct ComparisonOptions {
  std::uint64_t seed = 7;
  /// Added to the O(h) slack; O(eps) for approximate minimizers.
  double eps_slack = 0.0;
  /// Levels are drawn uniformly in [0, level_factor * max cell H(Du)].
  double level_factor = 2.0;
  /// Smallest side of V in nodes.
  int min_nodes = 3;
};

struct ComparisonReport {
  int n_trials = 0;
  std::uint64_t seed = 0;
  int violations = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  /// Largest excess minus slack over the trials.
  double worst_margin = -std::numeric_limits<double>::infinity();
  ConeTrial worst_trial;
  double eps_slack = 0.0;
  bool passed() const { return violations == 0; }
};

/// Runs one comparison trial: V a node rectangle, x0 outside the open V.
inline ConeTrial cone_trial(const GridFunction &u, const ConeFunction &C, const NodeRange &V, Vec2 x0,
                            double eps_slack = 0.0) {
  const Grid2D &g = u.grid();
  if (V.i0 < 0 || V.j0 < 0 || V.i1 >= g.nx() || V.j1 >= g.ny() || V.i1 - V.i0 < 2 || V.j1 - V.j0 < 2)
    fail(ErrorKind::validation, "comparison rectangle must hold interior nodes inside the grid");
  if (x0.x > g.x(V.i0) && x0.x < g.x(V.i1) && x0.y > g.y(V.j0) && x0.y < g.y(V.j1))
    fail(ErrorKind::validation, "cone vertex must lie outside the open rectangle");
  const double inf = std::numeric_limits<double>::infinity();
  double in_max = -inf, bd_max = -inf, in_min = inf, bd_min = inf, slope = 0.0;
  const VectorField d = gradient(u);
  for (int j = V.j0; j <= V.j1; ++j)
    for (int i = V.i0; i <= V.i1; ++i) {
      const Vec2 x{g.x(i), g.y(j)};
      const double above = u(i, j) - C(x - x0);
      const double below = u(i, j) + C(x0 - x);
      const bool edge = i == V.i0 || i == V.i1 || j == V.j0 || j == V.j1;
      if (edge) {
        bd_max = std::max(bd_max, above);
        bd_min = std::min(bd_min, below);
      } else {
        in_max = std::max(in_max, above);
        in_min = std::min(in_min, below);
      }
      slope = std::max(slope, std::hypot(d.x(i, j), d.y(i, j)));
    }
  ConeTrial t;
  t.V = V;
  t.vertex = x0;
  t.a = C.level();
  t.excess_above = in_max - bd_max;
  t.excess_below = bd_min - in_min;
  t.slack = 2.0 * std::max(g.hx(), g.hy()) * (slope + C.max_radius()) + eps_slack;
  return t;
}

/// Random trials of the comparison property from above and below. Vertices are
/// drawn alternately from the grid boundary collar and from the box outside V.
inline ComparisonReport comparison_with_cones(const GridFunction &u, const Hamiltonian &H, int n_trials,
                                              ComparisonOptions opt = {}) {
  const Grid2D &g = u.grid();
  if (n_trials < 1) fail(ErrorKind::validation, "comparison needs at least one trial");
  if (g.nx() < opt.min_nodes + 2 || g.ny() < opt.min_nodes + 2) fail(ErrorKind::validation, "grid too small for comparison trials");
  const double a_ref = std::max(max_cell_H(H, u), 1e-12);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  auto span = [&](int n) {
    std::uniform_int_distribution<int> L(1, n - 2);
    int a = L(rng), b = L(rng);
    if (a > b) std::swap(a, b);
    while (b - a < opt.min_nodes - 1) {
      if (b < n - 2) ++b;
      else --a;
    }
    return std::pair{a, b};
  };
  struct Spec {
    NodeRange V;
    Vec2 x0;
    double a;
  };
  std::vector<Spec> specs(n_trials);
  for (int k = 0; k < n_trials; ++k) {
    const auto [i0, i1] = span(g.nx());
    const auto [j0, j1] = span(g.ny());
    const NodeRange V{i0, i1, j0, j1};
    Vec2 x0;
    if (k % 2 == 0) {
      // boundary collar node
      std::uniform_int_distribution<int> side(0, 3), I(0, g.nx() - 1), J(0, g.ny() - 1);
      switch (side(rng)) {
      case 0: x0 = {g.x(0), g.y(J(rng))}; break;
      case 1: x0 = {g.x(g.nx() - 1), g.y(J(rng))}; break;
      case 2: x0 = {g.x(I(rng)), g.y(0)}; break;
      default: x0 = {g.x(I(rng)), g.y(g.ny() - 1)}; break;
      }
    } else {
      const Rect b = g.box();
      do {
        x0 = {b.x0 + U01(rng) * b.width(), b.y0 + U01(rng) * b.height()};
      } while (x0.x > g.x(i0) && x0.x < g.x(i1) && x0.y > g.y(j0) && x0.y < g.y(j1));
    }
    specs[k] = {V, x0, U01(rng) * opt.level_factor * a_ref};
  }
  std::vector<ConeTrial> trials(specs.size());
  parallel_for(specs.size(), [&](std::size_t k) {
    const ConeFunction C(H, specs[k].a, 64, true);
    trials[k] = cone_trial(u, C, specs[k].V, specs[k].x0, opt.eps_slack);
  });
  ComparisonReport rep;
  rep.n_trials = n_trials;
  rep.seed = opt.seed;
  rep.eps_slack = opt.eps_slack;
  for (const auto &t : trials) {
    if (t.violated()) ++rep.violations;
    rep.worst_excess = std::max(rep.worst_excess, t.worst());
    if (t.worst() - t.slack > rep.worst_margin) {
      rep.worst_margin = t.worst() - t.slack;
      rep.worst_trial = t;
    }
  }
  return rep;
}

/// Non-minimizer for the detector: affine data plus a bump of height `height`,
/// with the trial whose cone matches the affine part along a far ray.
struct BumpCounterexample {
  GridFunction u;
  NodeRange V;
  Vec2 vertex;
  double a = 0.0;
};

inline BumpCounterexample make_bump_counterexample(const Grid2D &g, const Hamiltonian &H, const LinearFunction &F,
                                                   Vec2 center, double radius, double height) {
  const TestFunction b = make_bump(g, center, radius);
  BumpCounterexample ce{GridFunction::sample(g, [&](double x, double y) { return F(x, y); }) + b.phi * height, {}, {}, 0.0};
  const Rect box{center.x - radius, center.x + radius, center.y - radius, center.y + radius};
  ce.V = g.range(box);
  ce.V.i0 = std::max(ce.V.i0 - 1, 0);
  ce.V.j0 = std::max(ce.V.j0 - 1, 0);
  ce.V.i1 = std::min(ce.V.i1 + 1, g.nx() - 1);
  ce.V.j1 = std::min(ce.V.j1 + 1, g.ny() - 1);
  ce.a = H(F.slope());
  // C_a(x - x0) = <DF, x - x0> along the outward normal of {H <= a} at DF.
  const Vec2 q = H.grad(F.slope());
  const double nq = norm(q);
  const Vec2 dir = nq > 0.0 ? q * (1.0 / nq) : Vec2{1.0, 0.0};
  ce.vertex = center - dir * (100.0 * (g.box().width() + g.box().height()));
  return ce;
}

// ---------------------------------------------------------------------------
// McShane extension and the global Lipschitz bound

/// Largest difference quotient over all pairs of boundary nodes.
inline double boundary_lipschitz(const GridFunction &u) {
  const Grid2D &g = u.grid();
  std::vector<std::pair<Vec2, double>> b;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.on_boundary(i, j)) b.push_back({{g.x(i), g.y(j)}, u(i, j)});
  double L = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k)
    for (std::size_t m = k + 1; m < b.size(); ++m)
      L = std::max(L, std::abs(b[k].second - b[m].second) / norm(b[k].first - b[m].first));
  return L;
}

/// v(x) = min over boundary nodes z of u(z) + L |x - z|.
inline GridFunction mcshane_extend(const GridFunction &boundary, double L) {
  const Grid2D &g = boundary.grid();
  if (!(L >= 0.0)) fail(ErrorKind::validation, "Lipschitz constant must be nonnegative");
  std::vector<std::pair<Vec2, double>> b;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.on_boundary(i, j)) b.push_back({{g.x(i), g.y(j)}, boundary(i, j)});
  for (std::size_t k = 0; k < b.size(); ++k)
    for (std::size_t m = k + 1; m < b.size(); ++m) {
      const double d = norm(b[k].first - b[m].first);
      if (std::abs(b[k].second - b[m].second) > L * d * (1.0 + 1e-12) + 1e-14) {
        std::ostringstream os;
        os << "boundary data is not " << L << "-Lipschitz between (" << b[k].first.x << "," << b[k].first.y << ") and ("
           << b[m].first.x << "," << b[m].first.y << ")";
        fail(ErrorKind::validation, os.str());
      }
    }
  GridFunction v(g);
  parallel_for(g.size(), [&](std::size_t k) {
    const int i = static_cast<int>(k % static_cast<std::size_t>(g.nx())), j = static_cast<int>(k / static_cast<std::size_t>(g.nx()));
    if (g.on_boundary(i, j)) {
      v[k] = boundary[k];
      return;
    }
    const Vec2 x{g.x(i), g.y(j)};
    double m = std::numeric_limits<double>::infinity();
    for (const auto &[z, val] : b) m = std::min(m, val + L * norm(x - z));
    v[k] = m;
  });
  return v;
}

/// sup of H over the disk |p| <= L, by polar sampling.
inline double sup_on_disk(const Hamiltonian &H, double L, int directions = 720, int radial = 64) {
  double m = H({0.0, 0.0});
  for (int j = 0; j < directions; ++j) {
    const Vec2 e = unit(2.0 * pi * j / directions);
    for (int k = 1; k <= radial; ++k) m = std::max(m, H(e * (L * k / radial)));
  }
  return m;
}

inline EstimateReport lipschitz_bound_check(const GridFunction &u, const Hamiltonian &H, double L) {
  if (!(L >= 0.0)) fail(ErrorKind::validation, "Lipschitz constant must be nonnegative");
  EstimateReport r;
  r.id = EstimateId::lipschitz_bound;
  r.lhs_value = max_cell_H(H, u);
  r.rhs_value = sup_on_disk(H, L);
  r.slack_rel = 1e-9;
  r.slack_abs = 1e-12;
  r.inputs_echo = {{"L", L}};
  decide(r);
  return r;
}

// ---------------------------------------------------------------------------
// Cones of the mollified Hamiltonian

struct ConeApproxRow {
  double delta = 0.0;
  /// Smallest eps with C^H_{a/(1+eps)} <= C^{H^delta}_a <= C^H_{(1+eps)a} on all samples.
  double eps_min = 0.0;
  double worst_level = 0.0;
  Vec2 worst_x;
};

struct ConeApproxReport {
  double a = 0.0;
  std::vector<ConeApproxRow> rows;
  bool decreasing = true;
  /// The sandwich holds at every delta with eps_tol.
  bool within_tol = true;
  double eps_tol = 0.0;
};

struct ConeApproxOptions {
  std::vector<double> level_factors{0.5, 1.0, 2.0};
  int ring_points = 16;
  double ring_radius = 1.0;
  int angles = 128;
};

namespace detail {

/// Level b with C^H_b(x) = target, by bisection (C^H_b(x) increases with b).
inline double level_matching(const Hamiltonian &H, Vec2 x, double target, double a, int angles) {
  auto c = [&](double b) { return ConeFunction(H, b, angles).value(x); };
  double lo = a, hi = a;
  while (c(lo) > target && lo > 1e-12 * a) lo *= 0.5;
  while (c(hi) < target && hi < 1e12 * a) hi *= 2.0;
  for (int it = 0; it < 60 && hi - lo > 1e-12 * a; ++it) {
    const double mid = 0.5 * (lo + hi);
    (c(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace detail

inline ConeApproxReport cone_approx_check(const Hamiltonian &H, const std::vector<double> &delta_ladder, double a,
                                          double eps_tol, ConeApproxOptions opt = {}) {
  if (!(a > 0.0)) fail(ErrorKind::validation, "cone approximation needs a > 0");
  if (delta_ladder.empty()) fail(ErrorKind::validation, "delta ladder is empty");
  ConeApproxReport rep;
  rep.a = a;
  rep.eps_tol = eps_tol;
  for (double delta : delta_ladder) {
    const Hamiltonian Hd = mollify(H, delta);
    ConeApproxRow row;
    row.delta = delta;
    for (double f : opt.level_factors) {
      const double at = f * a;
      const ConeFunction Cd(Hd, at, opt.angles);
      std::vector<double> eps(opt.ring_points);
      std::vector<Vec2> xs(opt.ring_points);
      parallel_for(xs.size(), [&](std::size_t k) {
        xs[k] = unit(2.0 * pi * (k + 0.5) / opt.ring_points) * opt.ring_radius;
        const double b = detail::level_matching(H, xs[k], Cd.value(xs[k]), at, opt.angles);
        eps[k] = std::max(at / b, b / at) - 1.0;
      });
      for (std::size_t k = 0; k < xs.size(); ++k)
        if (eps[k] > row.eps_min) {
          row.eps_min = eps[k];
          row.worst_level = at;
          row.worst_x = xs[k];
        }
    }
    if (!rep.rows.empty() && row.eps_min > rep.rows.back().eps_min) rep.decreasing = false;
    if (row.eps_min > eps_tol) rep.within_tol = false;
    rep.rows.push_back(row);
  }
  return rep;
}

} // namespace aronsson

#endif // ARONSSON_CONES_HPP
