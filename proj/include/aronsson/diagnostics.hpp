// Quantitative estimates on solved fields: Sobolev norms of powers of H(Du),
// the distributional determinant, orthogonality, flatness, the L-infinity
// estimate and the annulus experiment for the Aronsson function.
#ifndef ARONSSON_DIAGNOSTICS_HPP
#define ARONSSON_DIAGNOSTICS_HPP

#include "solver.hpp"

#include <map>

namespace aronsson {

enum class EstimateId {
  eq1x1,
  thm12_lower,
  thm12_upper,
  eq19_orthogonality,
  lemma43_flatness,
  thm32_linf,
  log_divergence,
  lipschitz_bound
};

inline const char *to_string(EstimateId id) {
  switch (id) {
  case EstimateId::eq1x1: return "eq1x1";
  case EstimateId::thm12_lower: return "thm12_lower";
  case EstimateId::thm12_upper: return "thm12_upper";
  case EstimateId::eq19_orthogonality: return "eq19_orthogonality";
  case EstimateId::lemma43_flatness: return "lemma43_flatness";
  case EstimateId::thm32_linf: return "thm32_linf";
  case EstimateId::log_divergence: return "log_divergence";
  case EstimateId::lipschitz_bound: return "lipschitz_bound";
  }
  return "?";
}

struct EstimateReport {
  EstimateId id = EstimateId::eq1x1;
  double lhs_value = 0.0;
  double rhs_value = 0.0;
  bool satisfied = false;
  /// Relative and absolute slack of the comparison.
  double slack_rel = 0.0;
  double slack_abs = 0.0;
  /// Smallest constant making the inequality hold, where the estimate has one.
  std::optional<double> empirical_constant;
  std::map<std::string, double> inputs_echo;
};

inline void decide(EstimateReport &r) {
  r.satisfied = r.lhs_value <= r.rhs_value * (1.0 + r.slack_rel) + r.slack_abs;
}

/// lambda_H(R), Lambda_H(R) and tau_H(R) at one level.
struct Moduli {
  double lambda = 0.0;
  double Lambda = 0.0;
  double tau = 0.5;
};

inline Moduli moduli_at(const Hamiltonian &H, double R, SamplingOptions opt = {128, 64}) {
  TauOptions to;
  to.sampling = opt;
  const AuxiliaryProfile p = tau_profile(H, std::max(R, 0.0), 1, to);
  return {p.lambda.back(), p.Lambda.back(), p.tau.back()};
}

/// sigma used when alpha < 1/2 and none is given.
inline constexpr double default_sigma = 1e-6;

namespace detail {

inline GridFunction H_of_gradient(const Hamiltonian &H, const GridFunction &u) {
  const VectorField d = gradient(u);
  GridFunction out(u.grid());
  parallel_for(out.size(), [&](std::size_t k) { out[k] = H({d.x[k], d.y[k]}); });
  return out;
}

inline void check_alpha_sigma(double alpha, double sigma) {
  if (!(alpha > 0.0)) fail(ErrorKind::validation, "alpha must be positive");
  if (!(sigma >= 0.0)) fail(ErrorKind::validation, "sigma must be nonnegative");
  if (alpha < 0.5 && sigma == 0.0)
    fail(ErrorKind::validation, "alpha < 1/2 needs the regularization [H(Du) + sigma]^alpha with sigma > 0");
}

inline double max_on(const GridFunction &f, const Rect &V) {
  const NodeRange r = f.grid().range(V);
  double m = -std::numeric_limits<double>::infinity();
  for (int j = r.j0; j <= r.j1; ++j)
    for (int i = r.i0; i <= r.i1; ++i) m = std::max(m, f(i, j));
  return m;
}

inline double require_nested(const Rect &V, const Rect &U) {
  const double d = V.dist_to_boundary_of(U);
  if (!(d > 0.0)) fail(ErrorKind::validation, "V must be compactly contained in U");
  return d;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Sobolev norms and the energy estimate

/// Squared W^{1,2} seminorm over V of [H(Du) + sigma]^alpha.
inline double sobolev_alpha(const GridFunction &u, const Hamiltonian &H, double alpha, double sigma, const Rect &V) {
  detail::check_alpha_sigma(alpha, sigma);
  const GridFunction f = detail::H_of_gradient(H, u).map([&](double h) { return std::pow(h + sigma, alpha); });
  const double s = w12_seminorm(f, V);
  return s * s;
}

struct Eq1x1Options {
  double C = 100.0;
  std::optional<double> sigma;
  SamplingOptions sampling{128, 64};
};

inline EstimateReport check_eq1x1(const GridFunction &u, const Hamiltonian &H, double alpha, const Rect &V,
                                  const Rect &U, Eq1x1Options opt = {}) {
  const double dist = detail::require_nested(V, U);
  const double sigma = opt.sigma.value_or(alpha < 0.5 ? default_sigma : 0.0);
  detail::check_alpha_sigma(alpha, sigma);
  const GridFunction Hu = detail::H_of_gradient(H, u);
  const double R = detail::max_on(Hu, U);
  const Moduli m = moduli_at(H, R, opt.sampling);
  if (!(alpha > 0.5 - m.tau)) {
    std::ostringstream os;
    os << "alpha = " << alpha << " is not admissible: it must exceed 1/2 - tau_H = " << 0.5 - m.tau;
    fail(ErrorKind::validation, os.str());
  }
  const double gap = alpha + m.tau - 0.5;
  const GridFunction pow2a = Hu.map([&](double h) { return std::pow(h + sigma, 2.0 * alpha); });
  const double mass = integrate_on(pow2a, u.grid().range(U));
  const double factor = alpha * alpha * (alpha + 1.0) / (gap * gap) * std::pow(m.Lambda / m.lambda, 2) / (dist * dist) * mass;

  EstimateReport r;
  r.id = EstimateId::eq1x1;
  r.lhs_value = sobolev_alpha(u, H, alpha, sigma, V);
  r.rhs_value = opt.C * factor;
  r.empirical_constant = factor > 0.0 ? r.lhs_value / factor : 0.0;
  r.inputs_echo = {{"alpha", alpha}, {"sigma", sigma}, {"C", opt.C}, {"R", R}, {"tau", m.tau},
                   {"lambda", m.lambda}, {"Lambda", m.Lambda}, {"dist", dist}};
  decide(r);
  return r;
}

// ---------------------------------------------------------------------------
// Distributional determinant

/// 1/2 * integral of [-u_i u_j phi_ij + |Du|^2 Laplacian(phi)], the weak form of -det D^2u.
inline double det_measure(const GridFunction &u, const TestFunction &phi) {
  const VectorField d = gradient(u);
  // Composed central differences: summation by parts against the gradient of u
  // is then exact, so affine u contribute nothing.
  const VectorField dphi = gradient(phi.phi);
  const GridFunction pxx = diff_x(dphi.x), pxy = diff_y(dphi.x), pyy = diff_y(dphi.y);
  GridFunction f(u.grid());
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double ux = d.x[k], uy = d.y[k];
    const double lap = pxx[k] + pyy[k];
    f[k] = 0.5 * (-(ux * ux * pxx[k] + 2.0 * ux * uy * pxy[k] + uy * uy * pyy[k]) + (ux * ux + uy * uy) * lap);
  }
  return integrate(f);
}

/// Fraction of interior nodes where the stencil value of -det D^2u falls below
/// -threshold (threshold defaults to 10 h).
inline double negative_det_fraction(const GridFunction &u, std::optional<double> threshold = std::nullopt) {
  const Grid2D &g = u.grid();
  const double t = threshold.value_or(10.0 * std::max(g.hx(), g.hy()));
  const Sym2Field d = hessian(u);
  std::size_t bad = 0, total = 0;
  for (int j = 1; j + 1 < g.ny(); ++j)
    for (int i = 1; i + 1 < g.nx(); ++i) {
      const double mdet = d.xy(i, j) * d.xy(i, j) - d.xx(i, j) * d.yy(i, j);
      ++total;
      if (mdet < -t) ++bad;
    }
  return total ? static_cast<double>(bad) / static_cast<double>(total) : 0.0;
}

/// Bumps of radius r centred on a regular n x n lattice inside `box`.
inline std::vector<TestFunction> bump_family(const Grid2D &g, const Rect &box, int n, double r) {
  std::vector<TestFunction> out;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = n == 1 ? box.center().x : box.x0 + (box.x1 - box.x0) * i / (n - 1);
      const double y = n == 1 ? box.center().y : box.y0 + (box.y1 - box.y0) * j / (n - 1);
      out.push_back(make_bump(g, {x, y}, r));
    }
  return out;
}

struct Thm12Options {
  double C = 100.0;
  /// Relative slack of the weak lower bound; both sides carry O(h^2) error.
  double slack_rel = 0.05;
  double slack_abs = 1e-10;
  SamplingOptions sampling{128, 64};
};

/// Lower bound tested weakly against every phi of the family (the worst one is
/// reported) and the upper bound with a cutoff equal to 1 on V.
inline std::array<EstimateReport, 2> check_thm12_bounds(const GridFunction &u, const Hamiltonian &H,
                                                         const std::vector<TestFunction> &family, const Rect &V,
                                                         const Rect &U, Thm12Options opt = {}) {
  const double dist = detail::require_nested(V, U);
  const Grid2D &g = u.grid();
  const GridFunction Hu = detail::H_of_gradient(H, u);
  const double R = detail::max_on(Hu, U);
  const Moduli m = moduli_at(H, R, opt.sampling);
  const VectorField dsq = gradient(Hu.map([](double h) { return std::sqrt(std::max(h, 0.0)); }));
  const GridFunction density = (dsq.x * dsq.x + dsq.y * dsq.y) * (4.0 * m.tau / m.Lambda);

  EstimateReport lo;
  lo.id = EstimateId::thm12_lower;
  lo.slack_rel = opt.slack_rel;
  lo.slack_abs = opt.slack_abs;
  lo.satisfied = true;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto &phi : family) {
    const double lhs = integrate(density, phi);
    const double rhs = det_measure(u, phi);
    EstimateReport t = lo;
    t.lhs_value = lhs;
    t.rhs_value = rhs;
    decide(t);
    const double excess = lhs - rhs * (1.0 + opt.slack_rel);
    if (excess > worst) {
      worst = excess;
      lo.lhs_value = lhs;
      lo.rhs_value = rhs;
    }
    lo.satisfied = lo.satisfied && t.satisfied;
  }
  lo.inputs_echo = {{"tau", m.tau}, {"Lambda", m.Lambda}, {"R", R}, {"family_size", double(family.size())}};

  EstimateReport up;
  up.id = EstimateId::thm12_upper;
  const TestFunction cut = make_cutoff(g, V, U);
  const VectorField du = gradient(u);
  const double factor = integrate_on(du.x * du.x + du.y * du.y, g.range(U)) / (dist * dist);
  up.lhs_value = det_measure(u, cut);
  up.rhs_value = opt.C * factor;
  up.empirical_constant = factor > 0.0 ? std::max(up.lhs_value, 0.0) / factor : 0.0;
  up.slack_abs = opt.slack_abs;
  up.inputs_echo = {{"C", opt.C}, {"dist", dist}};
  decide(up);
  return {lo, up};
}

// ---------------------------------------------------------------------------
// Orthogonality

namespace detail {

inline double admissible_threshold(const Hamiltonian &H, const GridFunction &Hu, const TestFunction &phi) {
  const double R = max_on(Hu, phi.outer);
  return 0.5 - moduli_at(H, R, {64, 32}).tau;
}

} // namespace detail

/// |integral of <D[H(Du) + sigma]^alpha, D_pH(Du)> phi|.
inline double orthogonality_defect(const GridFunction &u, const Hamiltonian &H, double alpha, double sigma,
                                   const TestFunction &phi) {
  detail::check_alpha_sigma(alpha, sigma);
  const GridFunction Hu = detail::H_of_gradient(H, u);
  if (!(alpha > detail::admissible_threshold(H, Hu, phi)))
    fail(ErrorKind::validation, "alpha must exceed 1/2 - tau_H for the orthogonality defect");
  const VectorField d = gradient(u);
  const VectorField dp = gradient(Hu.map([&](double h) { return std::pow(h + sigma, alpha); }));
  GridFunction f(u.grid());
  for (std::size_t k = 0; k < f.size(); ++k) {
    const Vec2 q = H.grad({d.x[k], d.y[k]});
    f[k] = dp.x[k] * q.x + dp.y[k] * q.y;
  }
  return std::abs(integrate(f, phi));
}

/// eps |integral of alpha [H + sigma]^{alpha-1} div D_pH(Du) phi|: the value the
/// defect takes when the regularized equation holds exactly.
inline double orthogonality_prediction(const GridFunction &u, const Hamiltonian &H, double alpha, double sigma,
                                       const TestFunction &phi, double eps) {
  const VectorField d = gradient(u);
  GridFunction qx(u.grid()), qy(u.grid()), w(u.grid());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const Vec2 p{d.x[k], d.y[k]};
    const Vec2 q = H.grad(p);
    qx[k] = q.x;
    qy[k] = q.y;
    w[k] = alpha * std::pow(H(p) + sigma, alpha - 1.0);
  }
  return eps * std::abs(integrate(w * divergence(qx, qy), phi));
}

/// Allowed gap between defect and prediction: `factor` times the sup of the
/// equation residual on the support of phi times the integral of
/// alpha [H + sigma]^{alpha-1} phi.
inline double orthogonality_tolerance(const GridFunction &u, const Hamiltonian &H, double alpha, double sigma,
                                      const TestFunction &phi, double residual_sup, double factor = 10.0) {
  const GridFunction w = detail::H_of_gradient(H, u).map([&](double h) { return alpha * std::pow(h + sigma, alpha - 1.0); });
  return factor * residual_sup * integrate(w, phi);
}

inline EstimateReport orthogonality_report(const GridFunction &u, const Hamiltonian &H, double alpha, double sigma,
                                           const TestFunction &phi, double eps, double factor = 10.0) {
  const GridFunction res = residual_aronsson(H, u, eps).map([](double x) { return std::abs(x); });
  const double residual_sup = detail::max_on(res, phi.outer);
  const double defect = orthogonality_defect(u, H, alpha, sigma, phi);
  const double prediction = orthogonality_prediction(u, H, alpha, sigma, phi, eps);
  EstimateReport r;
  r.id = EstimateId::eq19_orthogonality;
  r.lhs_value = std::abs(defect - prediction);
  r.rhs_value = orthogonality_tolerance(u, H, alpha, sigma, phi, residual_sup, factor);
  r.slack_abs = 1e-14;
  r.inputs_echo = {{"alpha", alpha}, {"sigma", sigma}, {"eps", eps}, {"residual_sup", residual_sup},
                   {"defect", defect}, {"prediction", prediction}, {"factor", factor}};
  decide(r);
  return r;
}

// ---------------------------------------------------------------------------
// Flatness

struct FlatnessOptions {
  double C = 100.0;
  /// Level standing in for R = infinity when H is not quadratic, as a multiple
  /// of 1 + max H(Du) over B.
  double far_level = 100.0;
};

inline EstimateReport flatness_check(const GridFunction &u, const Hamiltonian &H, const Rect &B, const LinearFunction &F,
                                     FlatnessOptions opt = {}) {
  const Grid2D &g = u.grid();
  if (!(B.x0 >= g.box().x0 && B.x1 <= g.box().x1 && B.y0 >= g.box().y0 && B.y1 <= g.box().y1))
    fail(ErrorKind::domain, "flatness box lies outside the grid");
  const Rect half = B.inset(0.25);
  const NodeRange rb = g.range(B), rh = g.range(half);
  const double r = 0.5 * std::min(B.width(), B.height());
  const VectorField d = gradient(u);
  const Vec2 dF = F.slope();

  GridFunction inner(g), outer(g);
  double Hmax = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Vec2 p{d.x(i, j), d.y(i, j)};
      const double e = u(i, j) - F(g.x(i), g.y(j));
      const double ip = dot(H.grad(p), p - dF);
      inner(i, j) = ip * ip;
      const double a = norm(p) + norm(dF);
      outer(i, j) = a * a * e * e / (r * r) + e * e * e * e / (r * r * r * r);
      if (i >= rb.i0 && i <= rb.i1 && j >= rb.j0 && j <= rb.j1) Hmax = std::max(Hmax, H(p));
    }
  const double area_b = integrate_on(GridFunction(g, 1.0), rb), area_h = integrate_on(GridFunction(g, 1.0), rh);
  Moduli m;
  if (auto A = H.quadratic_matrix()) {
    const auto ev = A->eigenvalues();
    m.lambda = ev[0];
    m.Lambda = ev[1];
  } else {
    m = moduli_at(H, opt.far_level * (1.0 + Hmax), {64, 32});
  }
  const double factor = m.Lambda * m.Lambda / m.lambda * Hmax * std::sqrt(integrate_on(outer, rb) / area_b);

  EstimateReport rep;
  rep.id = EstimateId::lemma43_flatness;
  rep.lhs_value = integrate_on(inner, rh) / area_h;
  rep.rhs_value = opt.C * factor;
  rep.empirical_constant = factor > 0.0 ? rep.lhs_value / factor : 0.0;
  rep.slack_abs = 1e-14;
  rep.inputs_echo = {{"C", opt.C}, {"lambda", m.lambda}, {"Lambda", m.Lambda}, {"H_max", Hmax}, {"r", r}};
  decide(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// L-infinity estimate along an eps ladder

struct Thm32Report : EstimateReport {
  std::vector<double> eps;
  std::vector<double> linf_V;
  /// Smallest constant for each rung alone.
  std::vector<double> constant_per_eps;
  std::vector<double> margin;
  double reference = 0.0;
};

/// Fits the smallest C with max_V H(Du^eps) <= C sqrt(eps) + (1 + C eps) R_ref
/// over the ladder. R_ref is `reference` when given, else max_U H(Du) of the
/// finest-eps solution.
inline Thm32Report check_thm32_linf(const std::vector<SolveResult> &ladder, const Hamiltonian &H, const Rect &V,
                                   const Rect &U, std::optional<double> reference = std::nullopt) {
  if (ladder.size() < 2) fail(ErrorKind::validation, "the L-infinity fit needs at least two eps values");
  const SolveResult *finest = &ladder.front();
  for (const auto &r : ladder)
    if (r.eps < finest->eps) finest = &r;
  Thm32Report rep;
  rep.id = EstimateId::thm32_linf;
  detail::require_nested(V, U);
  rep.reference = reference.value_or(max_H_of_gradient(H, finest->u, U));
  double C = 0.0;
  for (const auto &r : ladder) {
    const double lhs = max_H_of_gradient(H, r.u, V);
    const double c = std::max(0.0, (lhs - rep.reference) / (std::sqrt(r.eps) + r.eps * rep.reference));
    rep.eps.push_back(r.eps);
    rep.linf_V.push_back(lhs);
    rep.constant_per_eps.push_back(c);
    C = std::max(C, c);
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < rep.eps.size(); ++k) {
    const double rhs = C * std::sqrt(rep.eps[k]) + (1.0 + C * rep.eps[k]) * rep.reference;
    rep.margin.push_back(rhs - rep.linf_V[k]);
    if (rep.linf_V[k] - rhs > worst) {
      worst = rep.linf_V[k] - rhs;
      rep.lhs_value = rep.linf_V[k];
      rep.rhs_value = rhs;
    }
  }
  rep.empirical_constant = C;
  rep.slack_abs = 1e-12 * (1.0 + rep.reference);
  rep.inputs_echo = {{"reference", rep.reference}, {"eps_min", finest->eps}};
  decide(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Annulus experiment for w = x^{4/3} - y^{4/3}

enum class GradientFunctional { log_norm, power };

namespace detail {

/// |D g|^2 times the Jacobian 9 s^2 t^2 of x = s^3, y = t^3, for g = phi(|Dw|^2)
/// with Dw = 4/3 (x^{1/3}, -y^{1/3}). With D^2w Dw = 16/27 (1/s, 1/t) the
/// integrand is 4 phi'^2 (16/27)^2 9 (s^2 + t^2), smooth away from the origin.
inline double substituted_integrand(GradientFunctional kind, double alpha, double s, double t) {
  const double r2 = 16.0 / 9.0 * (s * s + t * t);
  const double dphi = kind == GradientFunctional::log_norm ? 0.5 / r2 : 0.5 * alpha * std::pow(r2, 0.5 * alpha - 1.0);
  const double c = 16.0 / 27.0;
  return 4.0 * dphi * dphi * c * c * 9.0 * (s * s + t * t);
}

} // namespace detail

/// Integral of |D g|^2 over a box in the closed first quadrant (exact Dw).
inline double gradient_functional_integral(GradientFunctional kind, double alpha, const Rect &box, int order = 32) {
  if (box.x0 < 0.0 || box.y0 < 0.0) fail(ErrorKind::domain, "box must lie in the first quadrant");
  std::vector<double> nodes, weights;
  gauss_legendre(order, nodes, weights);
  const double s0 = std::cbrt(box.x0), s1 = std::cbrt(box.x1), t0 = std::cbrt(box.y0), t1 = std::cbrt(box.y1);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * nodes[i];
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * nodes[j];
      sum += weights[i] * weights[j] * detail::substituted_integrand(kind, alpha, s, t);
    }
  }
  return sum * 0.25 * (s1 - s0) * (t1 - t0);
}

/// Integral over the dyadic annulus 2^{-k-1} <= max(|x|,|y|) <= 2^{-k} (all four quadrants).
inline double annulus_contribution(GradientFunctional kind, double alpha, int k) {
  const double b = std::ldexp(1.0, -k), a = 0.5 * b;
  const double q = gradient_functional_integral(kind, alpha, {a, b, 0.0, a}) +
                   gradient_functional_integral(kind, alpha, {0.0, a, a, b}) +
                   gradient_functional_integral(kind, alpha, {a, b, a, b});
  return 4.0 * q;
}

struct LogDivergenceColumn {
  std::string label;
  GradientFunctional kind = GradientFunctional::power;
  double alpha = 0.0;
  std::vector<double> contribution;
  std::vector<double> partial_sum;
};

struct LogDivergenceTable {
  std::vector<int> k;
  std::vector<LogDivergenceColumn> columns;
};

/// Per-annulus contributions and partial sums over k = 0..k_max for g = log|Dw|
/// and g = |Dw|^alpha for each alpha.
inline LogDivergenceTable log_divergence_experiment(const std::vector<double> &alphas, int k_max = 12) {
  if (k_max < 0) fail(ErrorKind::validation, "k_max must be nonnegative");
  for (double a : alphas)
    if (!(a > 0.0)) fail(ErrorKind::validation, "alpha must be positive");
  LogDivergenceTable t;
  for (int k = 0; k <= k_max; ++k) t.k.push_back(k);
  t.columns.push_back({"log", GradientFunctional::log_norm, 0.0, {}, {}});
  for (double a : alphas) {
    std::ostringstream os;
    os << "alpha=" << a;
    t.columns.push_back({os.str(), GradientFunctional::power, a, {}, {}});
  }
  for (auto &c : t.columns) {
    c.contribution.resize(t.k.size());
    parallel_for(t.k.size(), [&](std::size_t i) { c.contribution[i] = annulus_contribution(c.kind, c.alpha, t.k[i]); });
    double s = 0.0;
    for (double v : c.contribution) c.partial_sum.push_back(s += v);
  }
  return t;
}

/// Last increment of the partial sums relative to the total.
inline double last_increment_ratio(const LogDivergenceColumn &c) {
  return c.contribution.back() / c.partial_sum.back();
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit fit_line(const std::vector<double> &x, const std::vector<double> &y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  f.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

/// Divergence report for the log column over k in [k_lo, k_hi]: lhs is the
/// smallest per-annulus contribution, rhs is 0, satisfied when it is positive
/// and the partial sums grow linearly (R^2 > 0.99).
inline EstimateReport log_divergence_report(const LogDivergenceTable &t, int k_lo = 4, int k_hi = 12) {
  const auto &c = t.columns.front();
  std::vector<double> x, y;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.k.size(); ++i)
    if (t.k[i] >= k_lo && t.k[i] <= k_hi) {
      x.push_back(t.k[i]);
      y.push_back(c.partial_sum[i]);
      lo = std::min(lo, c.contribution[i]);
    }
  if (x.size() < 2) fail(ErrorKind::validation, "log divergence fit needs at least two annuli");
  const LinearFit f = fit_line(x, y);
  EstimateReport r;
  r.id = EstimateId::log_divergence;
  r.lhs_value = lo;
  r.rhs_value = 0.0;
  r.satisfied = lo > 0.0 && f.r2 > 0.99;
  r.inputs_echo = {{"slope", f.slope}, {"r2", f.r2}, {"k_lo", double(k_lo)}, {"k_hi", double(k_hi)}};
  return r;
}

} // namespace aronsson

#endif // ARONSSON_DIAGNOSTICS_HPP
