// Pointwise structural identities between D^2v, D_pH(Dv) and D^2_pp H(Dv):
// closed-form checks with exact derivatives and grid checks with stencils.
#ifndef ARONSSON_IDENTITIES_HPP
#define ARONSSON_IDENTITIES_HPP

#include "solver.hpp"

#include <functional>
#include <random>

namespace aronsson {

enum class IdentityId { lemma21, lemma22, fund1, fund2, fund5, fund6, thm23 };

inline const char *to_string(IdentityId id) {
  switch (id) {
  case IdentityId::lemma21: return "lemma21";
  case IdentityId::lemma22: return "lemma22";
  case IdentityId::fund1: return "fund1";
  case IdentityId::fund2: return "fund2";
  case IdentityId::fund5: return "fund5";
  case IdentityId::fund6: return "fund6";
  case IdentityId::thm23: return "thm23";
  }
  return "?";
}

inline IdentityId identity_from_string(const std::string &s) {
  for (auto id : {IdentityId::lemma21, IdentityId::lemma22, IdentityId::fund1, IdentityId::fund2, IdentityId::fund5,
                  IdentityId::fund6, IdentityId::thm23})
    if (s == to_string(id)) return id;
  fail(ErrorKind::validation, "unknown identity '" + s + "'");
}

// ---------------------------------------------------------------------------
// Closed-form test functions

/// Value and derivatives up to third order of a scalar function at a point.
struct Jet3 {
  double value = 0.0;
  Vec2 grad{};
  Sym2 hess{};
  Sym3 third{};
};

struct TestFn {
  std::string name;
  std::function<Jet3(Vec2)> eval;
  /// Points closer than this to either axis are outside the smooth region.
  double axis_clearance = 0.0;
};

inline TestFn testfn_linear(double a, double b, double c = 0.0) {
  return {"linear", [=](Vec2 p) { return Jet3{a * p.x + b * p.y + c, {a, b}, {}, {}}; }};
}

/// a x^2 + b x y + c y^2 + d x + e y.
inline TestFn testfn_quadratic(double a, double b, double c, double d = 0.0, double e = 0.0) {
  return {"quadratic", [=](Vec2 p) {
            return Jet3{a * p.x * p.x + b * p.x * p.y + c * p.y * p.y + d * p.x + e * p.y,
                        {2 * a * p.x + b * p.y + d, b * p.x + 2 * c * p.y + e},
                        {2 * a, b, 2 * c},
                        {}};
          }};
}

inline TestFn testfn_saddle() {
  auto t = testfn_quadratic(1.0, 0.0, -1.0);
  t.name = "saddle";
  return t;
}

inline TestFn testfn_xy() {
  auto t = testfn_quadratic(0.0, 1.0, 0.0);
  t.name = "xy";
  return t;
}

/// sin(a x) sin(b y).
inline TestFn testfn_sinsin(double a = 1.0, double b = 1.0) {
  return {"sinsin", [=](Vec2 p) {
            const double sx = std::sin(a * p.x), cx = std::cos(a * p.x), sy = std::sin(b * p.y), cy = std::cos(b * p.y);
            return Jet3{sx * sy,
                        {a * cx * sy, b * sx * cy},
                        {-a * a * sx * sy, a * b * cx * cy, -b * b * sx * sy},
                        {-a * a * a * cx * sy, -a * a * b * sx * cy, -a * b * b * cx * sy, -b * b * b * sx * cy}};
          }};
}

/// x^{4/3} - y^{4/3}, smooth off the axes.
inline TestFn testfn_aronsson() {
  auto part = [](double t, double (&d)[4]) {
    const double a = std::abs(t), s = t < 0 ? -1.0 : 1.0;
    const double c = std::cbrt(a);
    d[0] = a * c;
    d[1] = 4.0 / 3.0 * s * c;
    d[2] = 4.0 / 9.0 / (c * c);
    d[3] = -8.0 / 27.0 * s / (a * c * c);
  };
  return {"aronsson",
          [=](Vec2 p) {
            double dx[4], dy[4];
            part(p.x, dx);
            part(p.y, dy);
            return Jet3{dx[0] - dy[0], {dx[1], -dy[1]}, {dx[2], 0.0, -dy[2]}, {dx[3], 0.0, 0.0, -dy[3]}};
          },
          0.05};
}

inline TestFn testfn_from_name(const std::string &name) {
  if (name == "saddle") return testfn_saddle();
  if (name == "xy") return testfn_xy();
  if (name == "sinsin") return testfn_sinsin();
  if (name == "aronsson") return testfn_aronsson();
  if (name.rfind("linear", 0) == 0) {
    auto v = name.size() > 7 ? parse_doubles(name.substr(7)) : std::vector<double>{1.0, -2.0};
    if (v.size() < 2) fail(ErrorKind::validation, "linear test function expects a,b");
    return testfn_linear(v[0], v[1], v.size() > 2 ? v[2] : 0.0);
  }
  if (name.rfind("quadratic", 0) == 0) {
    auto v = name.size() > 10 ? parse_doubles(name.substr(10)) : std::vector<double>{1.0, 0.5, -0.7};
    if (v.size() < 3) fail(ErrorKind::validation, "quadratic test function expects a,b,c");
    return testfn_quadratic(v[0], v[1], v[2], v.size() > 3 ? v[3] : 0.0, v.size() > 4 ? v[4] : 0.0);
  }
  fail(ErrorKind::validation, "unknown test function '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pointwise sides

/// Both sides of an identity at one point.
struct Sides {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Quantities shared by the identities: M = D^2v, q = D_pH(Dv), P = D^2_pp H(Dv).
struct LocalData {
  Vec2 dv;
  Sym2 M;
  Vec2 q;
  Sym2 P;
  /// D[H(Dv)]; M q in closed form, a stencil gradient in grid mode.
  Vec2 z;
  /// div D_pH(Dv); tr(PM) in closed form, a stencil divergence in grid mode.
  double div_q = 0.0;
};

/// tr(A B) for symmetric A and B.
inline double trace_product(const Sym2 &A, const Sym2 &B) { return A.xx * B.xx + 2.0 * A.xy * B.xy + A.yy * B.yy; }

inline Sides lemma21_sides(const LocalData &d) {
  const double aron = d.M.quad(d.q);
  return {d.P.quad(d.z) - d.div_q * aron, -d.M.det() * d.P.adjugate().quad(d.q)};
}

inline Sides fund1_sides(const LocalData &d) {
  const Vec2 Mg = d.M * d.dv;
  return {norm2(Mg) - d.M.trace() * d.M.quad(d.dv), -d.M.det() * norm2(d.dv)};
}

inline Sides fund5_sides(const LocalData &d) {
  return {norm2(d.z) - d.M.trace() * d.M.quad(d.q), -d.M.det() * norm2(d.q)};
}

/// Closed-form evaluation of every pointwise quantity, including the
/// divergences that need third derivatives of v and H.
struct ClosedFormPoint {
  LocalData d;
  Sym3 V3;  // D^3 v
  Sym3 T;   // D^3_ppp H(Dv)
};

inline ClosedFormPoint closed_form_point(const Hamiltonian &H, const TestFn &v, Vec2 x) {
  const Jet3 j = v.eval(x);
  ClosedFormPoint c;
  c.d.dv = j.grad;
  c.d.M = j.hess;
  c.V3 = j.third;
  c.d.q = H.grad(j.grad);
  c.d.P = H.hess(j.grad);
  auto t = H.third(j.grad);
  if (!t) fail(ErrorKind::validation, H.name() + " has no closed-form third derivatives");
  c.T = *t;
  c.d.z = c.d.M * c.d.q;
  c.d.div_q = trace_product(c.d.P, c.d.M);
  return c;
}

namespace detail {

inline Vec2 axis(int l) { return l == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0}; }

/// d_i P_ab(Dv(x)) = T_abl M_li.
inline Sym2 dP(const ClosedFormPoint &c, int i) {
  Sym2 r;
  for (int l = 0; l < 2; ++l) r = r + c.T.contract(axis(l)) * c.d.M(l, i);
  return r;
}

/// d_i M_ab = V3_abi.
inline Sym2 dM(const ClosedFormPoint &c, int i) {
  return c.V3.contract(axis(i));
}

/// Full 2x2 product of symmetric matrices, (A B)_ij.
inline double prod(const Sym2 &A, const Sym2 &B, int i, int j) { return A(i, 0) * B(0, j) + A(i, 1) * B(1, j); }

/// div{F(x) q(x)} with F symmetric, given F and its partials dF_i; q = D_pH(Dv), dq_j/dx_i = (PM)_ji.
inline double div_matrix_times_q(const Sym2 &F, const std::array<Sym2, 2> &dF, const ClosedFormPoint &c) {
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += dF[i](i, j) * c.d.q[j] + F(i, j) * prod(c.d.P, c.d.M, j, i);
  return s;
}

} // namespace detail

/// 2(-det M) det P against div{P M q - tr(PM) q}.
inline Sides lemma22_closed(const ClosedFormPoint &c) {
  const Sym2 &M = c.d.M, &P = c.d.P;
  // G = P M q - tr(PM) q; P M is not symmetric, so expand the first term directly.
  double first = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Sym2 dPi = detail::dP(c, i), dMi = detail::dM(c, i);
    for (int m = 0; m < 2; ++m)
      for (int j = 0; j < 2; ++j)
        first += dPi(i, m) * M(m, j) * c.d.q[j] + P(i, m) * dMi(m, j) * c.d.q[j] +
                 P(i, m) * M(m, j) * detail::prod(P, M, j, i);
  }
  const double tr = trace_product(P, M);
  double grad_tr_dot_q = 0.0;
  for (int i = 0; i < 2; ++i)
    grad_tr_dot_q += (trace_product(detail::dP(c, i), M) + trace_product(P, detail::dM(c, i))) * c.d.q[i];
  return {2.0 * (-M.det()) * P.det(), first - grad_tr_dot_q - tr * tr};
}

/// 2(-det M) against div{M Dv - tr(M) Dv}.
inline Sides fund2_closed(const ClosedFormPoint &c) {
  const Sym2 &M = c.d.M;
  double div_Mg = 0.0, grad_tr_dot_g = 0.0;
  for (int i = 0; i < 2; ++i) {
    const Sym2 dMi = detail::dM(c, i);
    for (int j = 0; j < 2; ++j) div_Mg += dMi(i, j) * c.d.dv[j] + M(i, j) * M(j, i);
    grad_tr_dot_g += dMi.trace() * c.d.dv[i];
  }
  const double tr = M.trace();
  return {2.0 * (-M.det()), div_Mg - grad_tr_dot_g - tr * tr};
}

/// div{M q - tr(M) q} against (-det M) tr P.
inline Sides fund6_closed(const ClosedFormPoint &c) {
  const Sym2 &M = c.d.M;
  const std::array<Sym2, 2> dMs{detail::dM(c, 0), detail::dM(c, 1)};
  const double div_Mq = detail::div_matrix_times_q(M, dMs, c);
  double grad_tr_dot_q = 0.0;
  for (int i = 0; i < 2; ++i) grad_tr_dot_q += dMs[i].trace() * c.d.q[i];
  return {div_Mq - grad_tr_dot_q - M.trace() * c.d.div_q, -M.det() * c.d.P.trace()};
}

/// -det(D^2u) det P against tau~ (<P z, z> + eps (div q)^2) / H, with z = D[H(Du)].
inline Sides thm23_sides(const LocalData &d, double Hval, double tau, double eps) {
  return {-d.M.det() * d.P.det(), tau * (d.P.quad(d.z) + eps * d.div_q * d.div_q) / Hval};
}

// ---------------------------------------------------------------------------
// Reports

struct IdentityReport {
  IdentityId id = IdentityId::lemma21;
  /// Per-sample |lhs - rhs| (closed-form mode) or per-node over the region (grid mode).
  std::vector<double> residuals;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::optional<GridFunction> residual_field;
  double max_abs_residual = 0.0;
  /// max |lhs - rhs| / max(max |lhs|, max |rhs|); 0 when both sides vanish.
  double relative_residual = 0.0;
  /// Ratio of max residuals on grids h and h/2, and its log2.
  std::optional<double> refinement_ratio;
  std::optional<double> order_estimate;
  double masked_fraction = 0.0;
  std::size_t masked = 0;
};

inline void finalize(IdentityReport &r) {
  double ml = 0.0, mr = 0.0, mx = 0.0;
  for (std::size_t k = 0; k < r.lhs.size(); ++k) {
    ml = std::max(ml, std::abs(r.lhs[k]));
    mr = std::max(mr, std::abs(r.rhs[k]));
    mx = std::max(mx, r.residuals[k]);
  }
  r.max_abs_residual = mx;
  const double scale = std::max(ml, mr);
  r.relative_residual = scale > 0.0 ? mx / scale : (mx > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

inline void push(IdentityReport &r, Sides s) {
  r.lhs.push_back(s.lhs);
  r.rhs.push_back(s.rhs);
  r.residuals.push_back(std::abs(s.lhs - s.rhs));
}

/// Closed-form check of one identity at the given points (exact derivatives).
inline IdentityReport check_closed_form(IdentityId id, const Hamiltonian &H, const TestFn &v,
                                        const std::vector<Vec2> &points) {
  if (id == IdentityId::thm23)
    fail(ErrorKind::validation, "thm23 holds only for solved fields; use check_thm23");
  IdentityReport r;
  r.id = id;
  for (const Vec2 &x : points) {
    const ClosedFormPoint c = closed_form_point(H, v, x);
    switch (id) {
    case IdentityId::lemma21: push(r, lemma21_sides(c.d)); break;
    case IdentityId::lemma22: push(r, lemma22_closed(c)); break;
    case IdentityId::fund1: push(r, fund1_sides(c.d)); break;
    case IdentityId::fund2: push(r, fund2_closed(c)); break;
    case IdentityId::fund5: push(r, fund5_sides(c.d)); break;
    case IdentityId::fund6: push(r, fund6_closed(c)); break;
    case IdentityId::thm23: break;
    }
  }
  finalize(r);
  return r;
}

inline IdentityReport check_lemma21(const Hamiltonian &H, const TestFn &v, const std::vector<Vec2> &pts) {
  return check_closed_form(IdentityId::lemma21, H, v, pts);
}
inline IdentityReport check_lemma22(const Hamiltonian &H, const TestFn &v, const std::vector<Vec2> &pts) {
  return check_closed_form(IdentityId::lemma22, H, v, pts);
}
/// fund1 and fund2, the special case H = 1/2 |p|^2.
inline std::array<IdentityReport, 2> check_fund_pair(const TestFn &v, const std::vector<Vec2> &pts) {
  const Hamiltonian H = make_quadratic(Sym2::identity());
  return {check_closed_form(IdentityId::fund1, H, v, pts), check_closed_form(IdentityId::fund2, H, v, pts)};
}
inline std::array<IdentityReport, 2> check_fund56(const Hamiltonian &H, const TestFn &v, const std::vector<Vec2> &pts) {
  return {check_closed_form(IdentityId::fund5, H, v, pts), check_closed_form(IdentityId::fund6, H, v, pts)};
}

/// Random points in the box, keeping away from the axes when the function requires it.
inline std::vector<Vec2> random_points(const TestFn &v, std::size_t n, std::uint64_t seed, Rect box = {-1.5, 1.5, -1.5, 1.5}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> X(box.x0, box.x1), Y(box.y0, box.y1);
  std::vector<Vec2> out;
  while (out.size() < n) {
    const Vec2 p{X(rng), Y(rng)};
    if (std::abs(p.x) < v.axis_clearance || std::abs(p.y) < v.axis_clearance) continue;
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid mode

/// Stencil fields for a grid function: D^2v, q and P at Dv, z = grad H(Dv), div q.
struct GridFields {
  VectorField dv;
  Sym2Field M;
  VectorField q;
  Sym2Field P;
  GridFunction Hval;
  VectorField z;
  GridFunction div_q;

  LocalData at(std::size_t k) const {
    return {{dv.x[k], dv.y[k]},
            {M.xx[k], M.xy[k], M.yy[k]},
            {q.x[k], q.y[k]},
            {P.xx[k], P.xy[k], P.yy[k]},
            {z.x[k], z.y[k]},
            div_q[k]};
  }
};

inline GridFields grid_fields(const Hamiltonian &H, const GridFunction &v) {
  const Grid2D &g = v.grid();
  GridFields f;
  f.dv = gradient(v);
  f.M = hessian(v);
  f.q = {GridFunction(g), GridFunction(g)};
  f.P = {GridFunction(g), GridFunction(g), GridFunction(g)};
  f.Hval = GridFunction(g);
  parallel_for(g.size(), [&](std::size_t k) {
    const Jet j = H.jet({f.dv.x[k], f.dv.y[k]});
    f.Hval[k] = j.value;
    f.q.x[k] = j.grad.x;
    f.q.y[k] = j.grad.y;
    f.P.xx[k] = j.hess.xx;
    f.P.xy[k] = j.hess.xy;
    f.P.yy[k] = j.hess.yy;
  });
  f.z = gradient(f.Hval);
  f.div_q = divergence(f.q);
  return f;
}

/// Default region for grid residuals: the domain inset by 1/8 on every side.
inline Rect default_region(const Grid2D &g) { return g.box().inset(0.125); }

/// Grid check of one identity over the nodes of `region`.
inline IdentityReport check_grid(IdentityId id, const Hamiltonian &H, const GridFunction &v,
                                 std::optional<Rect> region = std::nullopt) {
  if (id == IdentityId::thm23) fail(ErrorKind::validation, "thm23 needs a solved field; use check_thm23");
  const Grid2D &g = v.grid();
  const NodeRange nr = g.range(region.value_or(default_region(g)));
  const Hamiltonian Hq = make_quadratic(Sym2::identity());
  const bool special = id == IdentityId::fund1 || id == IdentityId::fund2;
  const GridFields f = grid_fields(special ? Hq : H, v);

  // Vector fields whose divergence is one side of the divergence identities.
  GridFunction Gx(g), Gy(g), other(g);
  if (id == IdentityId::lemma22 || id == IdentityId::fund2 || id == IdentityId::fund6) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const LocalData d = f.at(k);
      Vec2 G;
      if (id == IdentityId::lemma22) {
        G = d.P * d.z - d.q * d.div_q;
        other[k] = 2.0 * (-d.M.det()) * d.P.det();
      } else if (id == IdentityId::fund2) {
        G = d.M * d.dv - d.dv * d.M.trace();
        other[k] = 2.0 * (-d.M.det());
      } else {
        G = d.z - d.q * d.M.trace();
        other[k] = -d.M.det() * d.P.trace();
      }
      Gx[k] = G.x;
      Gy[k] = G.y;
    }
  }
  GridFunction divG = divergence(Gx, Gy);

  IdentityReport r;
  r.id = id;
  GridFunction field(g);
  for (int j = nr.j0; j <= nr.j1; ++j)
    for (int i = nr.i0; i <= nr.i1; ++i) {
      const std::size_t k = g.index(i, j);
      const LocalData d = f.at(k);
      Sides s;
      switch (id) {
      case IdentityId::lemma21: s = lemma21_sides(d); break;
      case IdentityId::fund1: s = fund1_sides(d); break;
      case IdentityId::fund5: s = fund5_sides(d); break;
      case IdentityId::lemma22:
      case IdentityId::fund2: s = {other[k], divG[k]}; break;
      case IdentityId::fund6: s = {divG[k], other[k]}; break;
      case IdentityId::thm23: break;
      }
      push(r, s);
      field[k] = s.lhs - s.rhs;
    }
  r.residual_field = field;
  finalize(r);
  return r;
}

/// Grid check on n x n and (2n-1) x (2n-1) samplings of a closed-form function;
/// the report is the fine-grid one with the refinement ratio attached.
inline IdentityReport check_grid_refined(IdentityId id, const Hamiltonian &H, const TestFn &v, const Rect &domain, int n,
                                         std::optional<Rect> region = std::nullopt) {
  auto sample = [&](int m) {
    return GridFunction::sample(Grid2D(m, m, domain), [&](double x, double y) { return v.eval({x, y}).value; });
  };
  const Rect reg = region.value_or(domain.inset(0.125));
  IdentityReport coarse = check_grid(id, H, sample(n), reg);
  IdentityReport fine = check_grid(id, H, sample(2 * n - 1), reg);
  if (fine.max_abs_residual > 0.0) {
    fine.refinement_ratio = coarse.max_abs_residual / fine.max_abs_residual;
    fine.order_estimate = std::log2(*fine.refinement_ratio);
  }
  return fine;
}

/// Percentile (0..100) of a sample by nearest rank.
inline double percentile(std::vector<double> v, double pct) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t k = static_cast<std::size_t>(std::ceil(pct / 100.0 * v.size()));
  return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

struct Thm23Report : IdentityReport {
  /// Per-node |lhs - rhs| divided by the largest side magnitude over the region.
  std::vector<double> relative;
  double p90_relative = 0.0;
  /// Smallest right-hand side; it should be >= -roundoff.
  double min_rhs = 0.0;
};

/// Theorem 2.3 on a solved field; nodes with H(Du) below `floor` are masked.
inline Thm23Report check_thm23(const Hamiltonian &H, const GridFunction &u, double eps,
                               std::optional<Rect> region = std::nullopt, double floor = 1e-10) {
  const Grid2D &g = u.grid();
  const NodeRange nr = g.range(region.value_or(default_region(g)));
  const GridFields f = grid_fields(H, u);
  Thm23Report r;
  r.id = IdentityId::thm23;
  GridFunction field(g);
  std::size_t total = 0;
  r.min_rhs = std::numeric_limits<double>::infinity();
  for (int j = nr.j0; j <= nr.j1; ++j)
    for (int i = nr.i0; i <= nr.i1; ++i) {
      const std::size_t k = g.index(i, j);
      ++total;
      if (f.Hval[k] < floor) {
        ++r.masked;
        continue;
      }
      const LocalData d = f.at(k);
      const Sides s = thm23_sides(d, f.Hval[k], tau_tilde(H, d.dv), eps);
      push(r, s);
      r.min_rhs = std::min(r.min_rhs, s.rhs);
      field[k] = s.lhs - s.rhs;
    }
  r.masked_fraction = total ? static_cast<double>(r.masked) / total : 0.0;
  r.residual_field = field;
  finalize(r);
  double scale = 0.0;
  for (std::size_t k = 0; k < r.lhs.size(); ++k) scale = std::max({scale, std::abs(r.lhs[k]), std::abs(r.rhs[k])});
  for (double res : r.residuals) r.relative.push_back(scale > 0.0 ? res / scale : 0.0);
  r.p90_relative = percentile(r.relative, 90.0);
  return r;
}

} // namespace aronsson

#endif // ARONSSON_IDENTITIES_HPP
