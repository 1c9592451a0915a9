#include <aronsson/identities.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aronsson;

namespace {

std::vector<Hamiltonian> smooth_hamiltonians() {
  return {make_quadratic(Sym2::identity()), make_quadratic({2.0, 0.0, 8.0}), make_quadratic({1.5, 0.4, 0.7}),
          make_quartic(), make_aniso_quartic()};
}

std::vector<TestFn> registry() {
  return {testfn_linear(0.7, -1.3, 0.2), testfn_quadratic(0.8, -0.3, 0.5, 0.1, -0.4), testfn_saddle(),
          testfn_aronsson(), testfn_sinsin(), testfn_sinsin(1.3, 0.7), testfn_xy()};
}

// Vector field G(x) = P M q - tr(PM) q assembled from first and second
// derivatives only; its divergence is taken by Richardson-extrapolated
// central differences.
Vec2 G_field(const Hamiltonian &H, const TestFn &v, Vec2 x) {
  const Jet3 j = v.eval(x);
  const Vec2 q = H.grad(j.grad);
  const Sym2 P = H.hess(j.grad);
  const Vec2 Mq = j.hess * q;
  const double tr = P.xx * j.hess.xx + 2 * P.xy * j.hess.xy + P.yy * j.hess.yy;
  return P * Mq - q * tr;
}

template <class F>
double fd_divergence(F &&field, Vec2 x, double h) {
  auto central = [&](double s) {
    return (field({x.x + s, x.y}).x - field({x.x - s, x.y}).x + field({x.x, x.y + s}).y -
            field({x.x, x.y - s}).y) /
           (2 * s);
  };
  return (4.0 * central(h / 2) - central(h)) / 3.0;
}

} // namespace

TEST(Identities, ClosedFormHoldOnRegistry) {
  const IdentityId ids[] = {IdentityId::lemma21, IdentityId::lemma22, IdentityId::fund5, IdentityId::fund6};
  std::uint64_t seed = 1;
  for (const auto &H : smooth_hamiltonians())
    for (const auto &v : registry())
      for (IdentityId id : ids) {
        const auto r = check_closed_form(id, H, v, random_points(v, 25, seed++));
        EXPECT_LE(r.relative_residual, 1e-10) << to_string(id) << " " << H.name() << " " << v.name;
      }
}

TEST(Identities, FundamentalPairHolds) {
  std::uint64_t seed = 100;
  for (const auto &v : registry()) {
    auto [f1, f2] = check_fund_pair(v, random_points(v, 25, seed++));
    EXPECT_LE(f1.relative_residual, 1e-10) << v.name;
    EXPECT_LE(f2.relative_residual, 1e-10) << v.name;
  }
}

TEST(Identities, SaddleValues) {
  const std::vector<Vec2> pts{{0.3, -0.4}, {1.0, 2.0}, {-0.5, 0.25}};
  auto [f1, f2] = check_fund_pair(testfn_saddle(), pts);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double r2 = norm2(pts[k]);
    EXPECT_NEAR(f1.lhs[k], 16.0 * r2, 1e-12);
    EXPECT_NEAR(f1.rhs[k], 16.0 * r2, 1e-12);
    EXPECT_NEAR(f2.lhs[k], 8.0, 1e-12);
    EXPECT_NEAR(f2.rhs[k], 8.0, 1e-12);
  }
}

TEST(Identities, FundamentalPairIsLemmaAtIdentityHamiltonian) {
  const Hamiltonian H = make_quadratic(Sym2::identity());
  const auto v = testfn_sinsin(1.3, 0.7);
  const auto pts = random_points(v, 30, 7);
  auto [f1, f2] = check_fund_pair(v, pts);
  const auto l1 = check_lemma21(H, v, pts);
  const auto l2 = check_lemma22(H, v, pts);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    EXPECT_NEAR(f1.lhs[k], l1.lhs[k], 1e-12);
    EXPECT_NEAR(f1.rhs[k], l1.rhs[k], 1e-12);
    EXPECT_NEAR(f2.lhs[k], l2.lhs[k], 1e-12);
    EXPECT_NEAR(f2.rhs[k], l2.rhs[k], 1e-12);
  }
}

TEST(Identities, DivergenceMatchesFiniteDifferenceOracle) {
  for (const auto &H : {make_quartic(), make_aniso_quartic(), make_quadratic({1.5, 0.4, 0.7})})
    for (const auto &v : {testfn_sinsin(1.3, 0.7), testfn_aronsson(), testfn_quadratic(0.8, -0.3, 0.5)}) {
      const auto pts = random_points(v, 10, 31, {-1.0, 1.0, -1.0, 1.0});
      const auto r = check_lemma22(H, v, pts);
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (std::abs(pts[k].x) < 0.2 || std::abs(pts[k].y) < 0.2) continue;
        const double oracle = fd_divergence([&](Vec2 x) { return G_field(H, v, x); }, pts[k], 1e-3);
        EXPECT_NEAR(r.rhs[k], oracle, 1e-6 * (1.0 + std::abs(oracle))) << H.name() << " " << v.name;
      }
    }
}

TEST(Identities, LinearFunctionsGiveZeroResiduals) {
  const auto v = testfn_linear(2.0, -1.0, 3.0);
  for (const auto &H : smooth_hamiltonians())
    for (IdentityId id : {IdentityId::lemma21, IdentityId::lemma22, IdentityId::fund5, IdentityId::fund6}) {
      const auto r = check_closed_form(id, H, v, random_points(v, 10, 3));
      EXPECT_EQ(r.max_abs_residual, 0.0);
      EXPECT_EQ(r.relative_residual, 0.0);
    }
}

TEST(Identities, SolvedIdentityIsAlgebraicConsequenceOfEquation) {
  // With M constrained to q^T M q + eps tr(PM) = 0, the pointwise identity of
  // the regularized problem holds for any admissible M.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto &H : smooth_hamiltonians())
    for (int trial = 0; trial < 50; ++trial) {
      const Vec2 p{U(rng), U(rng)};
      const double eps = 0.05 + 0.5 * std::abs(U(rng));
      LocalData d;
      d.dv = p;
      d.q = H.grad(p);
      d.P = H.hess(p);
      Sym2 M{U(rng), U(rng), U(rng)};
      // Project M onto the constraint hyperplane in (xx, xy, yy) coordinates.
      const double a[3] = {d.q.x * d.q.x + eps * d.P.xx, 2 * d.q.x * d.q.y + 2 * eps * d.P.xy,
                           d.q.y * d.q.y + eps * d.P.yy};
      const double c = (a[0] * M.xx + a[1] * M.xy + a[2] * M.yy) / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
      M = {M.xx - c * a[0], M.xy - c * a[1], M.yy - c * a[2]};
      d.M = M;
      d.z = M * d.q;
      d.div_q = trace_product(d.P, M);
      const Sides s = thm23_sides(d, H(p), tau_tilde(H, p), eps);
      EXPECT_NEAR(s.lhs, s.rhs, 1e-10 * (1.0 + std::abs(s.lhs))) << H.name();
    }
}

TEST(Identities, GridModeSecondOrder) {
  const Hamiltonian H = make_quadratic({2.0, 0.0, 8.0});
  const Rect dom{-1.0, 1.0, -1.0, 1.0};
  for (IdentityId id : {IdentityId::lemma21, IdentityId::lemma22, IdentityId::fund6}) {
    const auto r = check_grid_refined(id, H, testfn_sinsin(), dom, 65);
    ASSERT_TRUE(r.order_estimate.has_value());
    EXPECT_GE(*r.refinement_ratio, 3.5) << to_string(id);
    EXPECT_LE(*r.refinement_ratio, 4.5) << to_string(id);
    EXPECT_GE(*r.order_estimate, 1.5);
    EXPECT_LE(*r.order_estimate, 2.5);
  }
}

TEST(Identities, GridModeFundamentalPair) {
  const Rect dom{-1.0, 1.0, -1.0, 1.0};
  const Hamiltonian H = make_quadratic(Sym2::identity());
  // fund1 is algebraic in the stencil derivatives; fund2 carries a divergence.
  EXPECT_LE(check_grid_refined(IdentityId::fund1, H, testfn_sinsin(1.3, 0.7), dom, 33).relative_residual, 1e-12);
  const auto r = check_grid_refined(IdentityId::fund2, H, testfn_sinsin(1.3, 0.7), dom, 33);
  EXPECT_GE(*r.order_estimate, 1.5);
  EXPECT_LE(*r.order_estimate, 2.5);
  // Saddle: second derivatives are exact on the grid, so residuals are roundoff.
  const auto g = Grid2D(17, 17, dom);
  const auto v = GridFunction::sample(g, [](double x, double y) { return x * x - y * y; });
  EXPECT_LE(check_grid(IdentityId::fund1, H, v).relative_residual, 1e-12);
  EXPECT_LE(check_grid(IdentityId::fund2, H, v).relative_residual, 1e-12);
}

TEST(Identities, SolvedFieldResidualDecreasesUnderRefinement) {
  const Hamiltonian H = make_quadratic(Sym2::identity());
  SolveConfig cfg;
  cfg.eps = 0.1;
  double p90[2];
  int n = 33;
  for (double &out : p90) {
    const Grid2D g(n, n, {-1.0, 1.0, -1.0, 1.0});
    const auto res = solve_exp_harmonic(H, boundary_from_spec("aronsson", g), cfg);
    ASSERT_TRUE(res.converged);
    const auto r = check_thm23(H, res.u, cfg.eps);
    EXPECT_GE(r.min_rhs, 0.0);
    EXPECT_LT(r.masked_fraction, 0.05);
    out = r.p90_relative;
    n = 2 * n - 1;
  }
  EXPECT_GE(p90[0] / p90[1], 1.5) << p90[0] << " " << p90[1];
}

TEST(Identities, Errors) {
  const auto v = testfn_sinsin();
  EXPECT_THROW(check_lemma22(make_maxquad(), v, {{0.3, 0.2}}), Error);
  EXPECT_THROW(check_closed_form(IdentityId::thm23, make_quartic(), v, {{0.3, 0.2}}), Error);
  EXPECT_THROW(identity_from_string("lemma99"), Error);
  EXPECT_THROW(testfn_from_name("cosh"), Error);
  EXPECT_EQ(identity_from_string("fund6"), IdentityId::fund6);
}
