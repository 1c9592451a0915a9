#include <aronsson/cones.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aronsson;

namespace {

const Rect kSquare{-1.0, 1.0, -1.0, 1.0};

// Support function of the ellipse {<Ap, p> <= 2a}.
double ellipse_support(const Sym2 &A, double a, Vec2 x) { return std::sqrt(2.0 * a) * std::sqrt(A.inverse().quad(x)); }

// Brute-force sup of <p, x> over a dense Cartesian sample of {H <= a}.
double brute_force_support(const Hamiltonian &H, double a, Vec2 x, double box, int n = 801) {
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec2 p{-box + 2.0 * box * i / (n - 1), -box + 2.0 * box * j / (n - 1)};
      if (H(p) <= a) best = std::max(best, dot(p, x));
    }
  return best;
}

} // namespace

TEST(Cones, EllipseClosedForm) {
  const Sym2 A{2.0, 0.3, 8.0};
  const auto H = make_quadratic(A);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-2.0, 2.0), La(0.05, 3.0);
  for (int k = 0; k < 40; ++k) {
    const double a = La(rng);
    const Vec2 x{U(rng), U(rng)};
    EXPECT_NEAR(cone_value(H, a, x), ellipse_support(A, a, x), 1e-8 * ellipse_support(A, a, x));
  }
  const auto I = make_quadratic(Sym2::identity());
  EXPECT_NEAR(cone_value(I, 2.0, {3.0, 4.0}), 2.0 * 5.0, 1e-9);
}

TEST(Cones, BruteForceOracle) {
  const Vec2 xs[] = {{1.0, 0.0}, {0.3, -0.8}, {-1.2, 0.5}};
  for (const auto &H : {make_quartic(), make_aniso_quartic(), make_maxquad()})
    for (Vec2 x : xs) {
      const double c = cone_value(H, 1.0, x);
      const double bf = brute_force_support(H, 1.0, x, 2.0);
      // The Cartesian sample lies inside the set, so it bounds from below.
      EXPECT_LE(bf, c + 1e-12) << H.name();
      EXPECT_NEAR(bf, c, 1e-2 * norm(x)) << H.name();
    }
}

TEST(Cones, TrivialCases) {
  const auto H = make_quartic();
  EXPECT_EQ(cone_value(H, 0.0, {1.0, 2.0}), 0.0);
  EXPECT_EQ(cone_value(H, 1.5, {0.0, 0.0}), 0.0);
  const ConeFunction C(H, 0.7);
  for (double r : C.radii()) EXPECT_GT(r, 0.0);
  EXPECT_EQ(C.radii().size(), 512u);
  EXPECT_THROW(ConeFunction(H, -1.0), Error);
  EXPECT_THROW(C({1.0, 0.0}), Error);
}

TEST(Cones, HomogeneityMonotonicitySubadditivity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (const auto &H : {make_quadratic({2.0, 0.0, 8.0}), make_aniso_quartic(), make_maxquad()}) {
    const ConeFunction C(H, 0.8), C2(H, 1.3);
    for (int k = 0; k < 50; ++k) {
      const Vec2 x{U(rng), U(rng)}, y{U(rng), U(rng)};
      const double cx = C.value(x);
      for (double t : {0.5, 2.0, 10.0}) EXPECT_NEAR(C.value(x * t), t * cx, 1e-9 * (1.0 + t * cx)) << H.name();
      EXPECT_LE(cx, C2.value(x) + 1e-12);
      EXPECT_GT(cx, 0.0);
    }
    for (int k = 0; k < 1000; ++k) {
      const Vec2 x{U(rng), U(rng)}, y{U(rng), U(rng)};
      const double lhs = C.value(x + y), rhs = C.value(x) + C.value(y);
      EXPECT_LE(lhs, rhs * (1.0 + 1e-8)) << H.name();
    }
  }
}

TEST(Cones, FastPathMatchesRefinedValue) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto &H : {make_quadratic({2.0, 0.3, 8.0}), make_quartic(), make_maxquad()}) {
    const ConeFunction C(H, 1.1, 64, true);
    for (int k = 0; k < 200; ++k) {
      const Vec2 x{U(rng), U(rng)};
      EXPECT_NEAR(C(x), C.value(x), 1e-5 * C.value(x)) << H.name();
    }
  }
}

TEST(Cones, BoundaryTableCsv) {
  const ConeFunction C(make_quadratic(Sym2::identity()), 0.5, 16);
  const std::string csv = C.boundary_csv();
  EXPECT_EQ(csv.rfind("theta,r\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
  EXPECT_NEAR(C.radius_at(0.3), 1.0, 1e-9);
}

TEST(Cones, LipschitzCharacterizationLinear) {
  const Grid2D g(33, 33, kSquare);
  const auto H = make_aniso_quartic();
  const LinearFunction F{0.6, -0.4, 0.1};
  const auto u = GridFunction::sample(g, [&](double x, double y) { return F(x, y); });
  const double a = H(F.slope());
  const auto r = lipschitz_characterization(u, H, a, {2000, 3, 1e-8});
  EXPECT_TRUE(r.ok);
  EXPECT_LE(r.worst_violation, 1e-12);
  // A scaled-down F passes with strict margin.
  const auto s = lipschitz_characterization(u * 0.5, H, a, {2000, 3, 0.0});
  EXPECT_LT(s.worst_violation, 0.0);
  // Below the level of DF the test must fail.
  EXPECT_FALSE(lipschitz_characterization(u, H, 0.8 * a, {2000, 3, 0.0}).ok);
}

TEST(Cones, LipschitzCharacterizationAronsson) {
  const Grid2D g(33, 33, kSquare);
  const auto w = GridFunction::sample(g, aronsson_w);
  const auto H = make_quadratic(Sym2::identity());
  const double a = 16.0 / 9.0;  // max of 1/2 |Dw|^2 on the square, at the corners
  const auto r = lipschitz_characterization(w, H, a);
  EXPECT_TRUE(r.ok) << r.worst_violation;
  // Consistency: passing at level a means the cell gradients respect a up to O(h).
  EXPECT_LE(max_cell_H(H, w), a + 2.0 * g.hx() * 4.0);
}

TEST(Cones, ComparisonLinearHoldsExactly) {
  const Grid2D g(33, 33, kSquare);
  const auto u = GridFunction::sample(g, [](double x, double y) { return 0.8 * x + 0.3 * y; });
  const auto rep = comparison_with_cones(u, make_quartic(), 200);
  EXPECT_TRUE(rep.passed());
  EXPECT_LE(rep.worst_excess, 1e-5);
}

TEST(Cones, ComparisonDeterministic) {
  const Grid2D g(25, 25, kSquare);
  const auto u = GridFunction::sample(g, aronsson_w);
  const auto H = make_quadratic(Sym2::identity());
  const auto a = comparison_with_cones(u, H, 50), b = comparison_with_cones(u, H, 50);
  EXPECT_EQ(a.worst_excess, b.worst_excess);
  EXPECT_EQ(a.seed, 7u);
}

TEST(Cones, BumpCounterexampleDetected) {
  const Grid2D g(65, 65, kSquare);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto &H : {make_quadratic(Sym2::identity()), make_aniso_quartic()})
    for (int k = 0; k < 10; ++k) {
      const LinearFunction F{U(rng), U(rng), 0.0};
      const Vec2 c{0.25 * U(rng), 0.25 * U(rng)};
      const auto ce = make_bump_counterexample(g, H, F, c, 0.6, 1.0);
      const ConeFunction C(H, ce.a, 64, true);
      const auto t = cone_trial(ce.u, C, ce.V, ce.vertex);
      EXPECT_TRUE(t.violated()) << H.name() << " " << t.excess_above << " " << t.slack;
      EXPECT_GT(t.excess_above, t.slack);
    }
}

TEST(Cones, SolvedFieldPassesComparison) {
  const Grid2D g(33, 33, kSquare);
  SolveConfig cfg;
  cfg.eps = 0.05;
  const auto H = make_quadratic(Sym2::identity());
  const auto res = solve_exp_harmonic(H, boundary_from_spec("aronsson", g), cfg);
  ComparisonOptions opt;
  opt.eps_slack = cfg.eps;
  const auto rep = comparison_with_cones(res.u, H, 300, opt);
  EXPECT_TRUE(rep.passed()) << rep.worst_margin;
}

TEST(Cones, TrialValidation) {
  const Grid2D g(17, 17, kSquare);
  const GridFunction u(g, 0.0);
  const ConeFunction C(make_quartic(), 1.0, 64, true);
  EXPECT_THROW(cone_trial(u, C, {4, 10, 4, 10}, {0.0, 0.0}), Error);
  EXPECT_THROW(cone_trial(u, C, {4, 5, 4, 10}, {-1.0, -1.0}), Error);
  EXPECT_NO_THROW(cone_trial(u, C, {4, 10, 4, 10}, {g.x(4), 0.0}));
}

TEST(Cones, McShaneContracts) {
  const Grid2D g(17, 17, kSquare);
  // Constant data: L = 0 reproduces the constant, L > 0 adds L dist(x, boundary).
  EXPECT_EQ((mcshane_extend(GridFunction(g, 2.5), 0.0) - GridFunction(g, 2.5)).max_abs(), 0.0);
  const auto c = mcshane_extend(GridFunction(g, 2.5), 1.0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double dist = std::min({1.0 - std::abs(g.x(i)), 1.0 - std::abs(g.y(j))});
      EXPECT_NEAR(c(i, j), 2.5 + dist, 1e-12);
    }

  // Linear data with |DF| = L: v >= F, equal on the boundary, L-Lipschitz.
  const LinearFunction F{0.6, 0.8, 0.0};
  const auto f = GridFunction::sample(g, [&](double x, double y) { return F(x, y); });
  const auto v = mcshane_extend(f, 1.0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (g.on_boundary(i, j)) {
        EXPECT_EQ(v(i, j), f(i, j));
      }
      EXPECT_GE(v(i, j), f(i, j) - 1e-14);
      EXPECT_LE(v(i, j), f(i, j) + 2.0 * g.hx());
    }
  for (std::size_t a = 0; a < v.size(); ++a)
    for (std::size_t b = a + 1; b < v.size(); ++b) {
      const Vec2 xa{g.x(int(a % g.nx())), g.y(int(a / g.nx()))}, xb{g.x(int(b % g.nx())), g.y(int(b / g.nx()))};
      ASSERT_LE(std::abs(v[a] - v[b]), norm(xa - xb) * (1.0 + 1e-12) + 1e-15);
    }
  EXPECT_THROW(mcshane_extend(f, 0.5), Error);
}

TEST(Cones, McShaneTwoCones) {
  const Grid2D g(21, 21, kSquare);
  const double L = 2.0;
  const Vec2 z1{-1.0, -0.4}, z2{1.0, 0.6};
  auto env = [&](double x, double y) {
    return std::min(0.3 + L * norm(Vec2{x, y} - z1), -0.2 + L * norm(Vec2{x, y} - z2));
  };
  const auto v = mcshane_extend(GridFunction::sample(g, env), L);
  const std::pair<int, int> probes[] = {{10, 10}, {3, 7}, {15, 4}, {8, 16}, {12, 12}};
  for (auto [i, j] : probes) {
    // Hand-computed envelope of the two cones at the probe.
    const double x = g.x(i), y = g.y(j);
    const double d1 = std::sqrt((x + 1.0) * (x + 1.0) + (y + 0.4) * (y + 0.4));
    const double d2 = std::sqrt((x - 1.0) * (x - 1.0) + (y - 0.6) * (y - 0.6));
    EXPECT_NEAR(v(i, j), std::min(0.3 + 2.0 * d1, -0.2 + 2.0 * d2), 1e-12);
  }
}

TEST(Cones, LipschitzBound) {
  const Grid2D g(33, 33, kSquare);
  const auto H = make_quartic();
  const auto f = GridFunction::sample(g, [](double x, double y) { return 0.6 * x - 0.8 * y; });
  const auto lin = lipschitz_bound_check(f, H, boundary_lipschitz(f));
  EXPECT_NEAR(boundary_lipschitz(f), 1.0, 1e-12);
  EXPECT_TRUE(lin.satisfied);
  EXPECT_NEAR(lin.lhs_value, lin.rhs_value, 1e-9 * lin.rhs_value);

  SolveConfig cfg;
  cfg.eps = 0.05;
  const auto Hq = make_quadratic(Sym2::identity());
  const auto b = boundary_from_spec("aronsson", g);
  const auto res = solve_exp_harmonic(Hq, b, cfg);
  const auto r = lipschitz_bound_check(res.u, Hq, boundary_lipschitz(b));
  EXPECT_TRUE(r.satisfied);
  EXPECT_GT(r.rhs_value - r.lhs_value, 0.0);

  const auto bumped = res.u + make_bump(g, {0.0, 0.0}, 0.4).phi * 2.0;
  EXPECT_FALSE(lipschitz_bound_check(bumped, Hq, boundary_lipschitz(b)).satisfied);
}

TEST(Cones, MollifiedConeSandwich) {
  ConeApproxOptions opt;
  opt.ring_points = 8;
  opt.level_factors = {1.0};
  const auto q = cone_approx_check(make_quadratic({2.0, 0.0, 8.0}), {0.2, 0.1}, 1.0, 1e-6, opt);
  EXPECT_TRUE(q.within_tol) << q.rows[0].eps_min;

  const auto m = cone_approx_check(make_maxquad(), {0.2, 0.1, 0.05}, 1.0, 0.5, opt);
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_TRUE(m.decreasing) << m.rows[0].eps_min << " " << m.rows[1].eps_min << " " << m.rows[2].eps_min;
  EXPECT_GT(m.rows[0].eps_min, 0.0);
  EXPECT_TRUE(m.within_tol);
  EXPECT_THROW(cone_approx_check(make_maxquad(), {}, 1.0, 0.1), Error);
}
