#include <aronsson/hamiltonian.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace aronsson;

namespace {

// Radial oracle for H = f(|p|) with f(r) = r^4/4 + r^2/2.
struct QuarticOracle {
  static double f(double r) { return 0.25 * r * r * r * r + 0.5 * r * r; }
  static double f1(double r) { return r * r * r + r; }
  static double f2(double r) { return 3.0 * r * r + 1.0; }
  static double tau(double r) { return r == 0.0 ? 0.5 : f(r) * f2(r) / (f1(r) * f1(r)); }
  // Radius of the level set {H = R}.
  static double radius(double R) { return std::sqrt(std::sqrt(1.0 + 4.0 * R) - 1.0); }
};

// 1/2 |p|^2 + 0.4 (1 - cos 3 p1): normalized but not convex.
class WavyModel final : public HamiltonianModel {
public:
  std::string name() const override { return "wavy"; }
  HamiltonianKind kind() const override { return HamiltonianKind::analytic; }
  Smoothness smoothness() const override { return Smoothness::C2; }
  double value(Vec2 p) const override { return 0.5 * norm2(p) + 0.4 * (1.0 - std::cos(3.0 * p.x)); }
};

// sqrt(H) of another Hamiltonian, used for the H^gamma convexity premise.
class PowerModel final : public HamiltonianModel {
public:
  PowerModel(Hamiltonian h, double g) : h_(std::move(h)), g_(g) {}
  std::string name() const override { return "power"; }
  HamiltonianKind kind() const override { return HamiltonianKind::analytic; }
  Smoothness smoothness() const override { return Smoothness::C0; }
  double value(Vec2 p) const override { return std::pow(h_(p), g_); }

private:
  Hamiltonian h_;
  double g_;
};

// Independent second moment of the bump: 1/2 int f r^3 dr / int f r dr by composite Simpson.
double bump_second_moment() {
  const int n = 200000;
  double a = 0.0, b = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double r = static_cast<double>(k) / n;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double f = r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0;
    a += w * f * r * r * r;
    b += w * f * r;
  }
  return 0.5 * a / b;
}

} // namespace

TEST(Hamiltonian, QuadraticEvalExamples) {
  EXPECT_DOUBLE_EQ(make_quadratic(Sym2::identity())({1.0, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(make_quadratic({2.0, 0.0, 8.0})({1.0, 0.0}), 1.0);
  for (auto name : {"quad", "quartic", "aniso-quartic", "maxquad"}) EXPECT_EQ(hamiltonian_from_name(name)({0.0, 0.0}), 0.0);
}

TEST(Hamiltonian, QuadraticDerivativeExamples) {
  auto H = make_quadratic(Sym2::identity());
  EXPECT_EQ(H.grad({3.0, 4.0}), Vec2(3.0, 4.0));
  EXPECT_EQ(H.hess({3.0, 4.0}), Sym2::identity());
  EXPECT_EQ(make_quadratic({2.0, 0.0, 8.0}).grad({1.0, 1.0}), Vec2(2.0, 8.0));
  EXPECT_FALSE(H.grad_info({1.0, 2.0}).approximate);
}

TEST(Hamiltonian, GradientVanishesAtOrigin) {
  for (auto name : {"quad:2,0.5,3", "quartic", "aniso-quartic", "maxquad"}) {
    auto H = hamiltonian_from_name(name);
    EXPECT_NEAR(norm(H.grad({0.0, 0.0})), 0.0, 1e-12) << name;
  }
}

TEST(Hamiltonian, PolynomialDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  auto H = make_aniso_quartic();
  for (int k = 0; k < 50; ++k) {
    const Vec2 p{U(rng), U(rng)};
    const double h = 1e-5;
    const Vec2 g = H.grad(p);
    EXPECT_NEAR(g.x, (H({p.x + h, p.y}) - H({p.x - h, p.y})) / (2 * h), 1e-6 * (1 + std::abs(g.x)));
    EXPECT_NEAR(g.y, (H({p.x, p.y + h}) - H({p.x, p.y - h})) / (2 * h), 1e-6 * (1 + std::abs(g.y)));
    const Sym2 m = H.hess(p);
    const Vec2 gx = H.grad({p.x + h, p.y}) - H.grad({p.x - h, p.y});
    const Vec2 gy = H.grad({p.x, p.y + h}) - H.grad({p.x, p.y - h});
    EXPECT_NEAR(m.xx, gx.x / (2 * h), 1e-6 * (1 + std::abs(m.xx)));
    EXPECT_NEAR(m.xy, gy.x / (2 * h), 1e-6 * (1 + std::abs(m.xy)));
    EXPECT_NEAR(m.yy, gy.y / (2 * h), 1e-6 * (1 + std::abs(m.yy)));
    const Sym3 t = *H.third(p);
    const Sym2 mx = H.hess({p.x + h, p.y}) - H.hess({p.x - h, p.y});
    const Sym2 my = H.hess({p.x, p.y + h}) - H.hess({p.x, p.y - h});
    EXPECT_NEAR(t.xxx, mx.xx / (2 * h), 1e-5 * (1 + std::abs(t.xxx)));
    EXPECT_NEAR(t.xxy, my.xx / (2 * h), 1e-5 * (1 + std::abs(t.xxy)));
    EXPECT_NEAR(t.xyy, my.xy / (2 * h), 1e-5 * (1 + std::abs(t.xyy)));
    EXPECT_NEAR(t.yyy, my.yy / (2 * h), 1e-5 * (1 + std::abs(t.yyy)));
  }
}

TEST(Hamiltonian, QuarticMatchesRadialFormula) {
  auto H = make_quartic();
  EXPECT_DOUBLE_EQ(H({1.0, 0.0}), 0.75);
  EXPECT_EQ(H.grad({1.0, 0.0}), Vec2(2.0, 0.0));
  EXPECT_EQ(H.hess({1.0, 0.0}), Sym2(4.0, 0.0, 2.0));
}

TEST(Hamiltonian, MaxQuadFlagsKinkDerivatives) {
  auto H = make_maxquad();
  EXPECT_FALSE(H.grad_info({1.0, 0.1}).approximate);
  EXPECT_EQ(H.grad({1.0, 0.1}), Vec2(3.0, 0.1));
  // |p1| = |p2| is the switching line.
  EXPECT_TRUE(H.grad_info({0.5, 0.5}).approximate);
  EXPECT_TRUE(H.hess_info({0.5, 0.5}).approximate);
  EXPECT_EQ(H.smoothness(), Smoothness::C0);
}

TEST(Hamiltonian, SampledTableInterpolatesAndRejectsOutsideHull) {
  const std::string path = (std::filesystem::temp_directory_path() / "aronsson_sampled.csv").string();
  {
    std::ofstream out(path);
    out << "p_x,p_y,H\n";
    for (int j = 0; j <= 40; ++j)
      for (int i = 0; i <= 40; ++i) {
        const double x = -2.0 + 0.1 * i, y = -2.0 + 0.1 * j;
        out << x << "," << y << "," << 0.5 * (x * x + 2 * y * y) << "\n";
      }
  }
  auto H = hamiltonian_from_name("sampled:" + path);
  EXPECT_EQ(H.kind(), HamiltonianKind::sampled);
  // Catmull-Rom reproduces quadratics exactly in the interior.
  EXPECT_NEAR(H({0.33, -0.71}), 0.5 * (0.33 * 0.33 + 2 * 0.71 * 0.71), 1e-12);
  auto g = H.grad_info({0.3, 0.2});
  EXPECT_TRUE(g.approximate);
  EXPECT_NEAR(g.value.x, 0.3, 1e-6);
  EXPECT_NEAR(g.value.y, 0.4, 1e-6);
  try {
    H({2.5, 0.0});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
  std::filesystem::remove(path);
}

TEST(Hamiltonian, RegistryRejectsUnknownNames) {
  EXPECT_THROW(hamiltonian_from_name("cubic"), Error);
  EXPECT_THROW(hamiltonian_from_name("quad:1,2"), Error);
  EXPECT_THROW(hamiltonian_from_name("quad:1,2,1"), Error);  // indefinite
  EXPECT_THROW(hamiltonian_from_name("sampled:/nonexistent.csv"), Error);
}

TEST(Hamiltonian, TauTildeQuadraticIsHalf) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  auto H = make_quadratic({2.0, 0.7, 8.0});
  for (int k = 0; k < 100; ++k) EXPECT_NEAR(tau_tilde(H, {U(rng), U(rng)}), 0.5, 1e-14);
  EXPECT_EQ(tau_tilde(make_quartic(), {0.0, 0.0}), 0.5);
}

TEST(Hamiltonian, TauTildeQuarticMatchesOracle) {
  EXPECT_NEAR(tau_tilde(make_quartic(), {1.0, 0.0}), 0.75, 1e-14);
  for (double r : {0.1, 0.5, 2.0}) EXPECT_NEAR(tau_tilde(make_quartic(), unit(0.3) * r), QuarticOracle::tau(r), 1e-12);
}

TEST(Hamiltonian, TauTildeContinuousAtOrigin) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 2 * pi);
  for (auto H : {make_quartic(), make_aniso_quartic()}) {
    for (int k = 0; k < 100; ++k) {
      const Vec2 e = unit(U(rng));
      double prev = std::numeric_limits<double>::infinity();
      for (double r = 0.1; r > 1e-4; r *= 0.5) {
        const double d = std::abs(tau_tilde(H, e * r) - 0.5);
        EXPECT_LE(d, prev + 1e-13);
        prev = d;
      }
      EXPECT_LT(prev, 1e-6);
    }
  }
}

TEST(Hamiltonian, TauTildeSingularHessianIsReported) {
  class Flat final : public HamiltonianModel {
  public:
    std::string name() const override { return "flat"; }
    HamiltonianKind kind() const override { return HamiltonianKind::analytic; }
    Smoothness smoothness() const override { return Smoothness::C2; }
    double value(Vec2 p) const override { return 0.5 * p.x * p.x; }
    std::optional<Vec2> exact_grad(Vec2 p) const override { return Vec2{p.x, 0.0}; }
    std::optional<Sym2> exact_hess(Vec2) const override { return Sym2{1.0, 0.0, 0.0}; }
  };
  Hamiltonian H(std::make_shared<Flat>());
  try {
    tau_tilde(H, {1.0, 1.0});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos);
  }
}

TEST(Hamiltonian, LambdaProfileQuadraticExact) {
  auto p = lambda_profile(make_quadratic({2.0, 0.0, 8.0}), 5.0, 8);
  for (std::size_t i = 0; i < p.R.size(); ++i) {
    EXPECT_EQ(p.lambda[i], 2.0);
    EXPECT_EQ(p.Lambda[i], 8.0);
  }
  auto q = lambda_profile(make_quadratic(Sym2::identity()), 1.0, 3);
  EXPECT_EQ(q.lambda[1], 1.0);
  EXPECT_EQ(q.Lambda[1], 1.0);
}

TEST(Hamiltonian, LambdaProfileQuarticMatchesBruteForce) {
  auto p = lambda_profile(make_quartic(), 1.0, 2);
  // Brute-force radial scan: eigenvalues f''(r) and f'(r)/r for r in [0, r_R].
  double lo = 1e300, hi = 0.0;
  const double rR = QuarticOracle::radius(1.0);
  for (int k = 0; k <= 100000; ++k) {
    const double r = rR * k / 100000.0;
    const double a = QuarticOracle::f2(r), b = r > 0 ? QuarticOracle::f1(r) / r : 1.0;
    lo = std::min({lo, a, b});
    hi = std::max({hi, a, b});
  }
  EXPECT_NEAR(p.lambda.back(), lo, 1e-9);
  EXPECT_NEAR(p.Lambda.back(), hi, 1e-6);
  EXPECT_NEAR(hi, 3.0 * (std::sqrt(5.0) - 1.0) + 1.0, 1e-9);
}

TEST(Hamiltonian, TauProfileQuarticMatchesBruteForce) {
  auto p = tau_profile(make_quartic(), 1.0, 2);
  double lo = 1e300;
  const double rR = QuarticOracle::radius(1.0);
  for (int k = 0; k <= 100000; ++k) lo = std::min(lo, QuarticOracle::tau(rR * k / 100000.0));
  EXPECT_NEAR(p.tau.back(), lo, 1e-9);
}

TEST(Hamiltonian, TauProfileQuadraticIsHalf) {
  auto p = tau_profile(make_quadratic({2.0, 0.0, 8.0}), 3.0, 5);
  for (double t : p.tau) EXPECT_EQ(t, 0.5);
}

TEST(Hamiltonian, ProfileInvariantsHold) {
  for (auto H : {make_quartic(), make_aniso_quartic(), make_quadratic({2.0, 0.5, 1.0})}) {
    auto p = tau_profile(H, 3.0, 6, {{64, 32}});
    for (std::size_t i = 0; i < p.R.size(); ++i) {
      EXPECT_GT(p.lambda[i], 0.0);
      EXPECT_LE(p.lambda[i], p.Lambda[i]);
      const double ratio = p.lambda[i] / p.Lambda[i];
      EXPECT_LE(0.5 * ratio * ratio, p.tau[i] + 1e-12) << H.name();
      EXPECT_LE(p.tau[i], 0.5 + 1e-12) << H.name();
      if (i > 0) {
        EXPECT_LE(p.lambda[i], p.lambda[i - 1]);
        EXPECT_GE(p.Lambda[i], p.Lambda[i - 1]);
      }
    }
  }
}

TEST(Hamiltonian, ConvexPowerGivesTauLowerBound) {
  // sqrt(H) convex for the quartic; then tau_H >= 1 - 1/2.
  auto H = make_quartic();
  Hamiltonian root(std::make_shared<PowerModel>(H, 0.5));
  ASSERT_TRUE(validate_hamiltonian(root, 4.0).midpoint_convex);
  auto p = tau_profile(H, 4.0, 8, {{64, 32}});
  for (double t : p.tau) EXPECT_GE(t, 0.5 - 1e-12);
}

TEST(Hamiltonian, ValidationAcceptsConvexRejectsWavy) {
  EXPECT_TRUE(validate_hamiltonian(make_quartic(), 2.0, 0.9).ok());
  EXPECT_TRUE(validate_hamiltonian(make_maxquad(), 2.0, 0.9).ok());
  // quadratic with lambda = 2 is the borderline case and must pass; lambda = 3 must fail.
  EXPECT_TRUE(validate_hamiltonian(make_quadratic({2.0, 0.0, 8.0}), 2.0, 2.0).ok());
  EXPECT_FALSE(validate_hamiltonian(make_quadratic({2.0, 0.0, 8.0}), 2.0, 3.0).ok());
  Hamiltonian wavy(std::make_shared<WavyModel>());
  auto rep = validate_hamiltonian(wavy, 2.0);
  EXPECT_TRUE(rep.normalized);
  EXPECT_FALSE(rep.midpoint_convex);
  EXPECT_THROW(lambda_profile(wavy, 2.0, 2), Error);
}

TEST(Hamiltonian, MollifiedQuadraticReproducesQuadratic) {
  const Sym2 A{2.0, 0.3, 8.0};
  auto H = make_quadratic(A);
  const double m2 = bump_second_moment();
  EXPECT_NEAR(MollifierRule::standard().second_moment(), m2, 1e-8);
  for (double delta : {0.2, 0.1, 0.05}) {
    auto Hd = mollify(H, delta);
    const auto &model = dynamic_cast<const MollifiedModel &>(Hd.model());
    EXPECT_EQ(Hd.kind(), HamiltonianKind::sampled);
    EXPECT_NEAR(Hd({0.0, 0.0}), 0.0, 1e-15);
    EXPECT_LT(norm(model.minimizer()), 1e-12);
    for (Vec2 p : {Vec2{1.0, 0.5}, Vec2{-2.0, 0.0}, Vec2{0.3, -1.4}}) {
      // eta_delta * H = H + 1/2 delta^2 tr(A) m2
      EXPECT_NEAR(model.convolved(p), H(p) + 0.5 * delta * delta * A.trace() * m2, 1e-9);
      EXPECT_NEAR(Hd(p), H(p), 1e-10);
      EXPECT_NEAR(norm(Hd.grad(p) - H.grad(p)), 0.0, 1e-8);
      EXPECT_NEAR((Hd.hess(p) - A).norm(), 0.0, 1e-6);
    }
  }
}

TEST(Hamiltonian, MollifiedQuarticLocatesShiftedMinimum) {
  auto H = make_quartic();
  for (double delta : {0.5, 0.2}) {
    auto Hd = mollify(H, delta);
    EXPECT_NEAR(Hd({0.0, 0.0}), 0.0, 1e-15);
    EXPECT_LT(norm(Hd.grad({0.0, 0.0})), 1e-9);
    // Error is O(delta^2): 1/2 delta^2 m2 (Lap H(p) - Lap H(0)) to leading order.
    const double m2 = MollifierRule::standard().second_moment();
    // Laplacian f'' + f'/r is 6 at |p| = 1 and 2 at the origin.
    const Vec2 p{1.0, 0.0};
    const double expected = 0.5 * delta * delta * m2 * (6.0 - 2.0);
    EXPECT_NEAR(Hd(p) - H(p), expected, 2.0 * delta * delta * delta * delta);
  }
}

TEST(Hamiltonian, MollifiedMaxQuadConvergesAndStaysConvex) {
  auto H = make_maxquad();
  double prev = 1e300;
  for (double delta : {0.2, 0.1, 0.05}) {
    auto Hd = mollify(H, delta);
    double sup = 0.0;
    for (int j = 0; j < 64; ++j)
      for (double r : {0.5, 1.0, 2.0}) {
        const Vec2 p = unit(2 * pi * j / 64) * r;
        sup = std::max(sup, std::abs(Hd(p) - H(p)));
      }
    EXPECT_LT(sup, prev);
    prev = sup;
    auto prof = lambda_profile(Hd, 2.0, 3, {64, 16});
    // lambda of the max of two quadratics is 1 everywhere.
    for (double l : prof.lambda) EXPECT_GE(l, 1.0 - 1e-6);
    EXPECT_TRUE(validate_hamiltonian(Hd, 2.0, 1.0, 2000).ok());
  }
}

TEST(Hamiltonian, MollifyRejectsBadDelta) {
  EXPECT_THROW(mollify(make_quartic(), 0.0), Error);
  EXPECT_THROW(mollify(make_quartic(), 1.5), Error);
}

TEST(Hamiltonian, TauLadderForNonSmoothHamiltonian) {
  TauOptions opt;
  opt.sampling = {64, 16};
  opt.ladder_length = 3;
  opt.ladder_sampling = {32, 8};
  auto p = tau_profile(make_maxquad(), 1.0, 3, opt);
  EXPECT_TRUE(p.tau_is_delta_estimate);
  ASSERT_EQ(p.tau_ladder.size(), 3u);
  for (auto &e : p.tau_ladder) {
    EXPECT_GT(e.tau, 0.0);
    EXPECT_LE(e.tau, 0.5 + 1e-9);
  }
  EXPECT_EQ(p.tau.size(), 3u);
}

TEST(Hamiltonian, StrongifyQuadraticAgreesAndStaysStronglyConvex) {
  auto H = make_quadratic({2.0, 0.0, 8.0});
  auto S = strongify(H, 1.0);
  EXPECT_EQ(S({0.0, 0.0}), 0.0);
  for (const Vec2 &p : sublevel_samples(H, 2.0, {64, 16})) EXPECT_NEAR(S(p), H(p), 1e-12);
  auto prof = lambda_profile(S, 1e6, 4, {64, 32});
  EXPECT_GT(prof.lambda.back(), 0.0);
}

TEST(Hamiltonian, StrongifyQuarticHasBoundedModuli) {
  auto H = make_quartic();
  auto S = strongify(H, 1.0);
  const auto &model = dynamic_cast<const StrongifiedModel &>(S.model());
  for (const Vec2 &p : sublevel_samples(H, 2.0, {64, 16})) EXPECT_NEAR(S(p), H(p), 1e-12);
  auto prof = lambda_profile(S, 1e8, 6, {64, 64});
  EXPECT_GT(prof.lambda.back(), 0.0);
  EXPECT_LE(prof.Lambda.back(), 2.125 * model.stiffness());
  // Original quartic is unbounded in Lambda.
  auto raw = lambda_profile(H, 1e8, 2, {64, 16});
  EXPECT_GT(raw.Lambda.back(), prof.Lambda.back());
  EXPECT_TRUE(validate_hamiltonian(S, 1e4, 0.0, 2000).ok());
}

TEST(Hamiltonian, StrongifyRejectsSmallLevel) { EXPECT_THROW(strongify(make_quartic(), 0.5), Error); }
