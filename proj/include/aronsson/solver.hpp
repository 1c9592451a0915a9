// Minimization of the discrete exponential energy sum exp(H(Dv)/eps) with
// Dirichlet data, continuation in eps and the mollification pipeline.
#ifndef ARONSSON_SOLVER_HPP
#define ARONSSON_SOLVER_HPP

#include "grid.hpp"
#include "hamiltonian.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace aronsson {

// ---------------------------------------------------------------------------
// Boundary data

/// Aronsson's function x^{4/3} - y^{4/3}.
inline double aronsson_w(double x, double y) { return std::cbrt(x * x * x * x) - std::cbrt(y * y * y * y); }

struct LinearFunction {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(double x, double y) const { return a * x + b * y + c; }
  Vec2 slope() const { return {a, b}; }
};

/// Grid function carrying the Dirichlet data: `aronsson`, `linear:a,b[,c]`,
/// `zero` or a CSV file on the same grid.
inline GridFunction boundary_from_spec(const std::string &spec, const Grid2D &g) {
  if (spec == "aronsson") return GridFunction::sample(g, aronsson_w);
  if (spec == "zero") return GridFunction(g, 0.0);
  if (spec.rfind("linear:", 0) == 0) {
    auto v = parse_doubles(spec.substr(7));
    if (v.size() != 2 && v.size() != 3) fail(ErrorKind::validation, "linear boundary expects a,b[,c]");
    LinearFunction F{v[0], v[1], v.size() == 3 ? v[2] : 0.0};
    return GridFunction::sample(g, [&](double x, double y) { return F(x, y); });
  }
  GridFunction f = read_csv(spec);
  if (!(f.grid() == g)) fail(ErrorKind::validation, "boundary file " + spec + " does not match the grid");
  return f;
}

// ---------------------------------------------------------------------------
// Configuration and results

struct SolveConfig {
  double eps = 0.1;
  int max_iters = 200;
  /// Relative tolerance on the row-scaled energy gradient.
  double grad_tol = 1e-9;
  /// Step length tried first at the first iteration.
  double damping = 1.0;
  std::vector<double> continuation_ladder;
  /// Allow the eps log-sum-exp energy when max H(Dv)/eps exceeds 500.
  bool allow_log_domain = true;
  /// Random midpoint pairs for the (H1)/(H2) precondition check (0 disables it).
  int validation_pairs = 500;
};

struct TraceEntry {
  int iter = 0;
  /// eps of the stage; internal ladder stages precede the target eps.
  double eps = 0.0;
  double log_energy = 0.0;
  double grad_norm = 0.0;
  double newton_step = 0.0;
  double step_length = 0.0;
  bool newton = true;
};

struct SolveResult {
  GridFunction u;
  double eps = 0.0;
  /// exp-energy, or eps * log of it when log_domain is set.
  double energy = 0.0;
  /// log of the discrete energy, always finite.
  double log_energy = 0.0;
  bool log_domain = false;
  double grad_norm = 0.0;
  double grad_threshold = 0.0;
  /// Sup over interior nodes of |A_H[u] + eps div D_pH(Du)|.
  double residual = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
};

// ---------------------------------------------------------------------------
// Discrete energy

/// Energy sum over cells and their four corner gradients (the two
/// triangulations of each cell averaged), weight hx*hy/4 per corner.
class ExpEnergy {
public:
  ExpEnergy(Hamiltonian H, const Grid2D &g, double eps) : H_(std::move(H)), g_(g), eps_(eps) {
    if (!(eps > 0.0)) fail(ErrorKind::validation, "eps must be positive");
  }

  /// Corner c of cell (i, j): x-difference nodes (xa, xb), y-difference nodes (ya, yb), local indices 0..3 for
  /// (i,j), (i+1,j), (i,j+1), (i+1,j+1).
  struct Corner {
    int xa, xb, ya, yb;
  };
  static constexpr Corner corners[4] = {{0, 1, 0, 2}, {0, 1, 1, 3}, {2, 3, 0, 2}, {2, 3, 1, 3}};

  std::size_t cells() const { return static_cast<std::size_t>(g_.nx() - 1) * (g_.ny() - 1); }
  std::size_t points() const { return 4 * cells(); }
  double weight() const { return 0.25 * g_.hx() * g_.hy(); }
  const Grid2D &grid() const { return g_; }
  double eps() const { return eps_; }
  const Hamiltonian &hamiltonian() const { return H_; }

  std::array<std::size_t, 4> cell_nodes(std::size_t c) const {
    const int i = static_cast<int>(c % (g_.nx() - 1)), j = static_cast<int>(c / (g_.nx() - 1));
    return {g_.index(i, j), g_.index(i + 1, j), g_.index(i, j + 1), g_.index(i + 1, j + 1)};
  }

  Vec2 corner_gradient(const std::vector<double> &v, std::size_t c, int k) const {
    auto n = cell_nodes(c);
    const Corner &cr = corners[k];
    return {(v[n[cr.xb]] - v[n[cr.xa]]) / g_.hx(), (v[n[cr.yb]] - v[n[cr.ya]]) / g_.hy()};
  }

  struct PointData {
    std::vector<double> s;   // H / eps
    std::vector<Vec2> dH;    // D_pH
    std::vector<Sym2> d2H;   // D^2_pp H (only with hessians)
  };

  PointData evaluate(const std::vector<double> &v, bool hessians) const {
    PointData d;
    d.s.resize(points());
    d.dH.resize(points());
    if (hessians) d.d2H.resize(points());
    parallel_for(cells(), [&](std::size_t c) {
      for (int k = 0; k < 4; ++k) {
        const std::size_t p = 4 * c + k;
        const Vec2 grad = corner_gradient(v, c, k);
        if (hessians) {
          const Jet j = H_.jet(grad);
          d.s[p] = j.value / eps_;
          d.dH[p] = j.grad;
          d.d2H[p] = j.hess;
        } else {
          d.s[p] = H_(grad) / eps_;
          d.dH[p] = H_.grad(grad);
        }
      }
    });
    for (double s : d.s)
      if (!std::isfinite(s)) fail(ErrorKind::numerical, "energy overflow: H(Dv)/eps is not finite; increase eps");
    return d;
  }

  /// log of sum w exp(s), computed with the max shift.
  double log_energy(const PointData &d) const {
    const double m = *std::max_element(d.s.begin(), d.s.end());
    double sum = 0.0;
    for (double s : d.s) sum += std::exp(s - m);
    return m + std::log(weight() * sum);
  }
  double log_energy(const std::vector<double> &v) const { return log_energy(evaluate(v, false)); }

private:
  Hamiltonian H_;
  Grid2D g_;
  double eps_;
};

/// log of the discrete energy of a grid function.
inline double discrete_log_energy(const Hamiltonian &H, const GridFunction &u, double eps) {
  return ExpEnergy(H, u.grid(), eps).log_energy(u.values());
}

// ---------------------------------------------------------------------------
// Residual of the regularized Aronsson equation

/// <D_pH(Du), D^2u D_pH(Du)> + eps div D_pH(Du) by grid stencils; zero on the boundary ring.
inline GridFunction residual_aronsson(const Hamiltonian &H, const GridFunction &u, double eps) {
  const Grid2D &g = u.grid();
  const VectorField du = gradient(u);
  const Sym2Field d2u = hessian(u);
  GridFunction qx(g), qy(g), aron(g);
  parallel_for(g.size(), [&](std::size_t k) {
    const Vec2 q = H.grad({du.x[k], du.y[k]});
    qx[k] = q.x;
    qy[k] = q.y;
    aron[k] = Sym2{d2u.xx[k], d2u.xy[k], d2u.yy[k]}.quad(q);
  });
  GridFunction r = aron + divergence(qx, qy) * eps;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.on_boundary(i, j)) r(i, j) = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Harmonic extension

namespace detail {

/// Interior unknown numbering.
struct Unknowns {
  explicit Unknowns(const Grid2D &g) : g(g), id(g.size(), -1) {
    for (int j = 1; j < g.ny() - 1; ++j)
      for (int i = 1; i < g.nx() - 1; ++i) {
        id[g.index(i, j)] = static_cast<int>(nodes.size());
        nodes.push_back(g.index(i, j));
      }
  }
  const Grid2D &g;
  std::vector<int> id;
  std::vector<std::size_t> nodes;
};

} // namespace detail

/// Discrete harmonic function (five-point Laplacian) with the boundary values of b.
inline GridFunction harmonic_extension(const GridFunction &b) {
  const Grid2D &g = b.grid();
  detail::Unknowns unk(g);
  const double cx = 1.0 / (g.hx() * g.hx()), cy = 1.0 / (g.hy() * g.hy());
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unk.nodes.size()));
  for (std::size_t k = 0; k < unk.nodes.size(); ++k) {
    const int i = static_cast<int>(unk.nodes[k] % g.nx()), j = static_cast<int>(unk.nodes[k] / g.nx());
    trip.emplace_back(k, k, 2.0 * (cx + cy));
    const std::array<std::pair<std::size_t, double>, 4> nb = {
        {{g.index(i - 1, j), cx}, {g.index(i + 1, j), cx}, {g.index(i, j - 1), cy}, {g.index(i, j + 1), cy}}};
    for (auto [n, c] : nb) {
      if (unk.id[n] >= 0) trip.emplace_back(k, unk.id[n], -c);
      else rhs[static_cast<Eigen::Index>(k)] += c * b[n];
    }
  }
  Eigen::SparseMatrix<double> A(rhs.size(), rhs.size());
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) fail(ErrorKind::numerical, "harmonic extension: factorization failed");
  Eigen::VectorXd x = ldlt.solve(rhs);
  GridFunction out = b;
  for (std::size_t k = 0; k < unk.nodes.size(); ++k) out[unk.nodes[k]] = x[static_cast<Eigen::Index>(k)];
  return out;
}

// ---------------------------------------------------------------------------
// Newton solver

namespace detail {

/// Quantities at one iterate, with rows scaled by exp(-m_a) where m_a is the
/// largest H/eps over the cells touching node a, and the global maximum m.
struct ScaledState {
  ExpEnergy::PointData pts;
  std::vector<double> node_max;   // m_a
  double global_max = 0.0;        // m
  double shifted_energy = 0.0;    // sum w exp(s - m)
  double grad_norm = 0.0;         // sup_a |exp(-m_a) dE/dv_a| over unknowns
};

inline void corner_coefficients(const ExpEnergy::Corner &cr, Vec2 dH, double hx, double hy, double c[4]) {
  c[0] = c[1] = c[2] = c[3] = 0.0;
  c[cr.xa] -= dH.x / hx;
  c[cr.xb] += dH.x / hx;
  c[cr.ya] -= dH.y / hy;
  c[cr.yb] += dH.y / hy;
}

/// Energy gradient with row a scaled by exp(-scale_a).
inline std::vector<double> scaled_gradient(const ExpEnergy &E, const ExpEnergy::PointData &d,
                                           const std::vector<double> &scale) {
  const Grid2D &g = E.grid();
  std::vector<double> r(g.size(), 0.0);
  const double w = E.weight() / E.eps();
  for (std::size_t c = 0; c < E.cells(); ++c) {
    auto n = E.cell_nodes(c);
    for (int k = 0; k < 4; ++k) {
      const std::size_t p = 4 * c + k;
      double coef[4];
      corner_coefficients(ExpEnergy::corners[k], d.dH[p], g.hx(), g.hy(), coef);
      for (int a = 0; a < 4; ++a)
        if (coef[a] != 0.0) r[n[a]] += w * std::exp(d.s[p] - scale[n[a]]) * coef[a];
    }
  }
  return r;
}

inline std::vector<double> node_maxima(const ExpEnergy &E, const ExpEnergy::PointData &d) {
  std::vector<double> m(E.grid().size(), -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < E.cells(); ++c) {
    const double cm = std::max({d.s[4 * c], d.s[4 * c + 1], d.s[4 * c + 2], d.s[4 * c + 3]});
    for (auto n : E.cell_nodes(c)) m[n] = std::max(m[n], cm);
  }
  return m;
}

inline double sup_on_unknowns(const std::vector<double> &r, const Unknowns &unk) {
  double s = 0.0;
  for (auto n : unk.nodes) s = std::max(s, std::abs(r[n]));
  return s;
}

inline double sq_on_unknowns(const std::vector<double> &r, const Unknowns &unk) {
  double s = 0.0;
  for (auto n : unk.nodes) s += r[n] * r[n];
  return s;
}

inline double shifted_energy(const ExpEnergy &E, const ExpEnergy::PointData &d, double shift) {
  double sum = 0.0;
  for (double s : d.s) sum += std::exp(s - shift);
  return E.weight() * sum;
}

} // namespace detail

inline void require_decreasing_ladder(const std::vector<double> &ladder, const std::string &field) {
  if (ladder.empty()) fail(ErrorKind::validation, field + ": ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0)) fail(ErrorKind::validation, field + ": entries must be positive");
    if (i > 0 && !(ladder[i] < ladder[i - 1]))
      fail(ErrorKind::validation, field + ": ladder must be strictly decreasing");
  }
}

namespace detail {

/// Max H(Dv)/eps of a starting guess above which an eps ladder is run first.
inline constexpr double start_exponent = 40.0;
inline constexpr double ladder_ratio = 2.0;

/// Newton iterations at a fixed eps from the node values `v` (boundary
/// entries already set); `v` is updated in place.
inline SolveResult newton_fixed_eps(const Hamiltonian &H, const Grid2D &g, const SolveConfig &cfg,
                                    std::vector<double> &v) {
  ExpEnergy E(H, g, cfg.eps);
  detail::Unknowns unk(g);
  const std::size_t N = unk.nodes.size();
  const double w = E.weight() / cfg.eps;
  SolveResult res;
  res.eps = cfg.eps;

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  double last_newton = std::numeric_limits<double>::infinity();
  double first_step = cfg.damping;
  // Levenberg-Marquardt weight on diag(K).
  double mu = 0.0;
  auto vmax = [&] {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  for (int it = 0;; ++it) {
    auto pts = E.evaluate(v, true);
    const double mg = *std::max_element(pts.s.begin(), pts.s.end());
    if (mg > 500.0 && !cfg.allow_log_domain) {
      std::ostringstream os;
      os << "energy overflow: max H(Dv)/eps = " << mg << " exceeds 500; use a larger eps or enable log-sum-exp mode";
      fail(ErrorKind::numerical, os.str());
    }
    const auto m = detail::node_maxima(E, pts);
    const double e0 = detail::shifted_energy(E, pts, mg);
    const auto rg = detail::scaled_gradient(E, pts, m);
    const double gnorm = detail::sup_on_unknowns(rg, unk);
    const double f0 = detail::sq_on_unknowns(rg, unk);
    const double threshold = cfg.grad_tol * (1.0 + e0);
    res.log_energy = mg + std::log(e0);
    res.grad_norm = gnorm;
    res.grad_threshold = threshold;
    res.iters = it;
    if (gnorm <= threshold && last_newton <= 1e-10 * (1.0 + vmax())) {
      res.converged = true;
      break;
    }
    if (it >= cfg.max_iters) break;

    // Newton system with row a scaled by exp(-m_a).
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(E.cells() * 16);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
    std::vector<double> shifted_grad(g.size(), 0.0);
    for (std::size_t c = 0; c < E.cells(); ++c) {
      auto n = E.cell_nodes(c);
      double local[4][4] = {};
      for (int k = 0; k < 4; ++k) {
        const std::size_t p = 4 * c + k;
        const auto &cr = ExpEnergy::corners[k];
        double bx[4] = {}, by[4] = {};
        bx[cr.xa] = -1.0 / g.hx();
        bx[cr.xb] = 1.0 / g.hx();
        by[cr.ya] = -1.0 / g.hy();
        by[cr.yb] = 1.0 / g.hy();
        const Vec2 q = pts.dH[p];
        const Sym2 Q = pts.d2H[p] + Sym2::outer(q) * (1.0 / cfg.eps);
        double coef[4];
        detail::corner_coefficients(cr, q, g.hx(), g.hy(), coef);
        for (int a = 0; a < 4; ++a) {
          if (coef[a] != 0.0) {
            if (unk.id[n[a]] >= 0) rhs[unk.id[n[a]]] -= w * std::exp(pts.s[p] - m[n[a]]) * coef[a];
            shifted_grad[n[a]] += w * std::exp(pts.s[p] - mg) * coef[a];
          }
          for (int b = 0; b < 4; ++b) {
            const double L = Q.xx * bx[a] * bx[b] + Q.xy * (bx[a] * by[b] + by[a] * bx[b]) + Q.yy * by[a] * by[b];
            if (L != 0.0) local[a][b] += w * std::exp(pts.s[p] - m[n[a]]) * L;
          }
        }
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          if (unk.id[n[a]] >= 0 && unk.id[n[b]] >= 0 && local[a][b] != 0.0)
            trip.emplace_back(unk.id[n[a]], unk.id[n[b]], local[a][b]);
    }
    Eigen::SparseMatrix<double> K(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
    K.setFromTriplets(trip.begin(), trip.end());

    std::vector<double> dir(g.size(), 0.0);
    if (!analyzed) {
      lu.analyzePattern(K);
      analyzed = true;
    }
    // Clusters of nodes that share a dominant cell have almost no stiffness
    // of their own; damp those modes instead of following the raw Newton step.
    const Eigen::VectorXd kdiag = K.diagonal();
    if (mu > 0.0) K.diagonal() += kdiag * mu;
    lu.factorize(K);
    Eigen::VectorXd y;
    bool newton = lu.info() == Eigen::Success;
    if (newton) {
      y = lu.solve(rhs);
      newton = y.allFinite();
    }
    // Jacobi step on the row-scaled gradient as a fallback.
    if (!newton) y = rhs.cwiseQuotient(kdiag.cwiseMax(1e-300));
    double dnorm = 0.0, slope = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const auto n = unk.nodes[k];
      dir[n] = y[static_cast<Eigen::Index>(k)];
      dnorm = std::max(dnorm, std::abs(dir[n]));
      slope += shifted_grad[n] * dir[n];
    }
    if (newton) last_newton = dnorm;
    if (newton && dnorm == 0.0) continue;
    if (slope > 0.0 && newton) {
      newton = false;
      y = rhs.cwiseQuotient(kdiag.cwiseMax(1e-300));
      slope = 0.0;
      dnorm = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        const auto n = unk.nodes[k];
        dir[n] = y[static_cast<Eigen::Index>(k)];
        dnorm = std::max(dnorm, std::abs(dir[n]));
        slope += shifted_grad[n] * dir[n];
      }
    }

    // Backtracking on the energy, or on the row-scaled gradient once the
    // energy decrease drops below roundoff.
    double t = first_step;
    first_step = 1.0;
    bool accepted = false;
    std::vector<double> trial(v.size());
    while (t >= 1e-12) {
      for (std::size_t k = 0; k < v.size(); ++k) trial[k] = v[k] + t * dir[k];
      ExpEnergy::PointData tp;
      try {
        tp = E.evaluate(trial, false);
      } catch (const Error &) {
        t *= 0.5;
        continue;
      }
      const double et = detail::shifted_energy(E, tp, mg);
      if (std::isfinite(et)) {
        const bool armijo = et <= e0 + 1e-4 * t * slope;
        bool merit = false;
        if (!armijo && et <= e0 * (1.0 + 1e-13)) {
          const double ft = detail::sq_on_unknowns(detail::scaled_gradient(E, tp, m), unk);
          merit = ft <= (1.0 - 2e-4 * t) * f0;
        }
        if (armijo || merit) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    res.trace.push_back({it, cfg.eps, res.log_energy, gnorm, newton ? dnorm : 0.0, accepted ? t : 0.0, newton});
    if (!accepted) {
      if (newton && mu < 1e6) {
        mu = std::max(mu * 100.0, 1e-8);
        continue;
      }
      // No representable decrease left: the iterate sits at the roundoff floor.
      res.converged = gnorm <= threshold;
      break;
    }
    if (newton) mu = t == 1.0 ? (mu < 1e-12 ? 0.0 : mu * 0.1) : std::max(mu * 10.0, 1e-8);
    v = trial;
  }

  // Final record.
  auto fin = E.evaluate(v, false);
  const double mg = *std::max_element(fin.s.begin(), fin.s.end());
  res.log_energy = mg + std::log(detail::shifted_energy(E, fin, mg));
  res.log_domain = mg > 500.0;
  res.energy = res.log_domain ? cfg.eps * res.log_energy : std::exp(res.log_energy);
  res.trace.push_back({res.iters, cfg.eps, res.log_energy, res.grad_norm, 0.0, 0.0, true});
  res.u = GridFunction(g, v);
  if (!res.u.finite()) fail(ErrorKind::numerical, "solver produced non-finite values");
  const GridFunction r = residual_aronsson(H, res.u, cfg.eps);
  res.residual = r.max_abs_on(g.interior());
  return res;
}

} // namespace detail

/// Damped Newton minimization of the exponential energy over interior node
/// values; boundary values are taken from `boundary`. Starting guesses far
/// from the minimizer (large max H(Dv)/eps) are first relaxed through a
/// geometric eps ladder, or through `cfg.continuation_ladder` when given.
inline SolveResult solve_exp_harmonic(const Hamiltonian &H, const GridFunction &boundary, const SolveConfig &cfg,
                                      const GridFunction *initial = nullptr) {
  if (!(cfg.eps > 0.0)) fail(ErrorKind::validation, "eps must be positive");
  if (!(cfg.grad_tol > 0.0)) fail(ErrorKind::validation, "grad_tol must be positive");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) fail(ErrorKind::validation, "damping must lie in (0, 1]");
  if (cfg.max_iters < 1) fail(ErrorKind::validation, "max_iters must be at least 1");
  const Grid2D &g = boundary.grid();
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.on_boundary(i, j) && !std::isfinite(boundary(i, j))) fail(ErrorKind::validation, "boundary values must be finite");

  detail::Unknowns unk(g);
  GridFunction u0 = harmonic_extension(boundary);
  if (initial) {
    if (!(initial->grid() == g)) fail(ErrorKind::validation, "initial guess lives on a different grid");
    if (!initial->finite()) fail(ErrorKind::validation, "initial guess must be finite");
    for (auto n : unk.nodes) u0[n] = (*initial)[n];
  }
  std::vector<double> v = u0.values();

  auto d0 = ExpEnergy(H, g, cfg.eps).evaluate(v, false);
  const double s0 = *std::max_element(d0.s.begin(), d0.s.end());
  if (cfg.validation_pairs > 0) {
    const double level = cfg.eps * s0 + 1.0;
    auto rep = validate_hamiltonian(H, level, 0.0, cfg.validation_pairs);
    if (!rep.ok())
      fail(ErrorKind::validation, H.name() + " fails the (H1)/(H2) check on {H <= " + std::to_string(level) + "}");
  }

  std::vector<double> ladder;
  if (!cfg.continuation_ladder.empty()) {
    require_decreasing_ladder(cfg.continuation_ladder, "continuation_ladder");
    for (double e : cfg.continuation_ladder)
      if (e > cfg.eps) ladder.push_back(e);
  } else if (s0 > detail::start_exponent) {
    for (double e = cfg.eps * s0 / detail::start_exponent; e > cfg.eps * detail::ladder_ratio; e /= detail::ladder_ratio)
      ladder.push_back(e);
  }

  std::vector<TraceEntry> trace;
  int iters = 0;
  for (double e : ladder) {
    SolveConfig sub = cfg;
    sub.eps = e;
    sub.grad_tol = std::max(cfg.grad_tol, 1e-6);
    auto r = detail::newton_fixed_eps(H, g, sub, v);
    iters += r.iters;
    trace.insert(trace.end(), r.trace.begin(), r.trace.end() - 1);
  }
  SolveResult res = detail::newton_fixed_eps(H, g, cfg, v);
  for (auto &t : res.trace) t.iter += iters;
  trace.insert(trace.end(), res.trace.begin(), res.trace.end());
  res.trace = std::move(trace);
  res.iters += iters;
  return res;
}

// ---------------------------------------------------------------------------
// Continuation


struct ContinuationResult {
  std::vector<SolveResult> results;
  /// sup |u_k - u_{k-1}| between consecutive ladder entries.
  std::vector<double> successive_diff;
};

inline ContinuationResult eps_continuation(const Hamiltonian &H, const GridFunction &boundary,
                                           const std::vector<double> &ladder, SolveConfig cfg = {}) {
  require_decreasing_ladder(ladder, "eps_ladder");
  ContinuationResult out;
  for (double eps : ladder) {
    cfg.eps = eps;
    const GridFunction *warm = out.results.empty() ? nullptr : &out.results.back().u;
    out.results.push_back(solve_exp_harmonic(H, boundary, cfg, warm));
    cfg.validation_pairs = 0;
    if (out.results.size() > 1) {
      const auto &a = out.results[out.results.size() - 2].u, &b = out.results.back().u;
      out.successive_diff.push_back((a - b).max_abs());
    }
  }
  return out;
}

/// max over the nodes in V of H(Du), Du by central differences.
inline double max_H_of_gradient(const Hamiltonian &H, const GridFunction &u, const Rect &V) {
  const NodeRange r = u.grid().range(V);
  const VectorField d = gradient(u);
  double m = 0.0;
  for (int j = r.j0; j <= r.j1; ++j)
    for (int i = r.i0; i <= r.i1; ++i) m = std::max(m, H({d.x(i, j), d.y(i, j)}));
  return m;
}

struct DeltaStage {
  double delta = 0.0;
  /// Large delta: H^delta is a rough stand-in for H.
  bool coarse = false;
  Hamiltonian mollified;
  ContinuationResult run;
  /// ||H^delta(Du^{delta, eps_min})||_{L^inf(V)}
  double linf_on_V = 0.0;
};

inline std::vector<DeltaStage> delta_pipeline(const Hamiltonian &H, const GridFunction &boundary,
                                              const std::vector<double> &delta_ladder,
                                              const std::vector<double> &eps_ladder, const Rect &V,
                                              SolveConfig cfg = {}) {
  require_decreasing_ladder(delta_ladder, "delta_ladder");
  require_decreasing_ladder(eps_ladder, "eps_ladder");
  std::vector<DeltaStage> out;
  for (double delta : delta_ladder) {
    DeltaStage st;
    st.delta = delta;
    st.coarse = delta > 0.25;
    st.mollified = mollify(H, delta);
    st.run = eps_continuation(st.mollified, boundary, eps_ladder, cfg);
    st.linf_on_V = max_H_of_gradient(st.mollified, st.run.results.back().u, V);
    out.push_back(std::move(st));
  }
  return out;
}

} // namespace aronsson

#endif // ARONSSON_SOLVER_HPP
