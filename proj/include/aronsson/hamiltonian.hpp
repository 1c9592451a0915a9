// Convex Hamiltonians H(p) on R^2 with H(0) = min H = 0, their convexity
// moduli, the tau quotient, mollification and strong convexification.
#ifndef ARONSSON_HAMILTONIAN_HPP
#define ARONSSON_HAMILTONIAN_HPP

#include "core.hpp"

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

namespace aronsson {

enum class HamiltonianKind { quadratic, analytic, sampled };
enum class Smoothness { C0, C1, C2 };

inline const char *to_string(HamiltonianKind k) {
  switch (k) {
  case HamiltonianKind::quadratic: return "quadratic";
  case HamiltonianKind::analytic: return "analytic";
  case HamiltonianKind::sampled: return "sampled";
  }
  return "?";
}

inline const char *to_string(Smoothness s) {
  switch (s) {
  case Smoothness::C0: return "C0";
  case Smoothness::C1: return "C1";
  case Smoothness::C2: return "C2+";
  }
  return "?";
}

/// A derivative together with a flag telling whether it came from finite
/// differences (or a kink neighbourhood) rather than a closed form.
template <class T>
struct Derivative {
  T value;
  bool approximate = false;
};

// ---------------------------------------------------------------------------
// Models

class HamiltonianModel {
public:
  virtual ~HamiltonianModel() = default;

  virtual std::string name() const = 0;
  virtual HamiltonianKind kind() const = 0;
  virtual Smoothness smoothness() const = 0;
  virtual double value(Vec2 p) const = 0;

  virtual std::optional<Vec2> exact_grad(Vec2) const { return std::nullopt; }
  virtual std::optional<Sym2> exact_hess(Vec2) const { return std::nullopt; }
  virtual std::optional<Sym3> exact_third(Vec2) const { return std::nullopt; }
  virtual std::optional<Sym2> quadratic_matrix() const { return std::nullopt; }
  /// Value, gradient and Hessian in one pass; false when not available in closed form.
  virtual bool exact_jet(Vec2, double &, Vec2 &, Sym2 &) const { return false; }
};

/// Value, gradient and Hessian at one point.
struct Jet {
  double value = 0.0;
  Vec2 grad{};
  Sym2 hess{};
  bool approximate = false;
};

/// H(p) = 1/2 <A p, p>.
class QuadraticModel final : public HamiltonianModel {
public:
  explicit QuadraticModel(Sym2 a) : a_(a) {
    auto ev = a.eigenvalues();
    if (!(ev[0] > 0.0) || !std::isfinite(ev[1]))
      fail(ErrorKind::validation, "quadratic Hamiltonian needs a symmetric positive definite matrix");
  }
  std::string name() const override {
    std::ostringstream os;
    os.precision(17);
    os << "quad:" << a_.xx << "," << a_.xy << "," << a_.yy;
    return os.str();
  }
  HamiltonianKind kind() const override { return HamiltonianKind::quadratic; }
  Smoothness smoothness() const override { return Smoothness::C2; }
  double value(Vec2 p) const override { return 0.5 * a_.quad(p); }
  std::optional<Vec2> exact_grad(Vec2 p) const override { return a_ * p; }
  std::optional<Sym2> exact_hess(Vec2) const override { return a_; }
  std::optional<Sym3> exact_third(Vec2) const override { return Sym3{}; }
  std::optional<Sym2> quadratic_matrix() const override { return a_; }

private:
  Sym2 a_;
};

/// Bivariate polynomial with exact derivatives up to third order.
class Polynomial2 {
public:
  Polynomial2() = default;
  Polynomial2(std::initializer_list<std::tuple<int, int, double>> terms) {
    for (auto [i, j, c] : terms) add(i, j, c);
  }

  void add(int i, int j, double c) {
    if (c != 0.0) coef_[{i, j}] += c;
  }
  Polynomial2 operator*(const Polynomial2 &o) const {
    Polynomial2 r;
    for (auto &[k1, c1] : coef_)
      for (auto &[k2, c2] : o.coef_) r.add(k1.first + k2.first, k1.second + k2.second, c1 * c2);
    return r;
  }
  Polynomial2 operator+(const Polynomial2 &o) const {
    Polynomial2 r = *this;
    for (auto &[k, c] : o.coef_) r.add(k.first, k.second, c);
    return r;
  }
  Polynomial2 operator*(double s) const {
    Polynomial2 r;
    for (auto &[k, c] : coef_) r.add(k.first, k.second, c * s);
    return r;
  }

  /// Partial derivative of order (dx, dy) evaluated at p.
  double eval(Vec2 p, int dx = 0, int dy = 0) const {
    double s = 0.0;
    for (auto &[k, c] : coef_) {
      const int i = k.first, j = k.second;
      if (i < dx || j < dy) continue;
      double f = c;
      for (int m = 0; m < dx; ++m) f *= (i - m);
      for (int m = 0; m < dy; ++m) f *= (j - m);
      s += f * ipow(p.x, i - dx) * ipow(p.y, j - dy);
    }
    return s;
  }

private:
  static double ipow(double b, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= b;
    return r;
  }
  std::map<std::pair<int, int>, double> coef_;
};

class PolynomialModel final : public HamiltonianModel {
public:
  PolynomialModel(std::string name, Polynomial2 poly) : name_(std::move(name)), poly_(std::move(poly)) {}
  std::string name() const override { return name_; }
  HamiltonianKind kind() const override { return HamiltonianKind::analytic; }
  Smoothness smoothness() const override { return Smoothness::C2; }
  double value(Vec2 p) const override { return poly_.eval(p); }
  std::optional<Vec2> exact_grad(Vec2 p) const override {
    return Vec2{poly_.eval(p, 1, 0), poly_.eval(p, 0, 1)};
  }
  std::optional<Sym2> exact_hess(Vec2 p) const override {
    return Sym2{poly_.eval(p, 2, 0), poly_.eval(p, 1, 1), poly_.eval(p, 0, 2)};
  }
  std::optional<Sym3> exact_third(Vec2 p) const override {
    return Sym3{poly_.eval(p, 3, 0), poly_.eval(p, 2, 1), poly_.eval(p, 1, 2), poly_.eval(p, 0, 3)};
  }

private:
  std::string name_;
  Polynomial2 poly_;
};

/// Pointwise maximum of two quadratics; C0 along the switching lines.
class MaxQuadModel final : public HamiltonianModel {
public:
  MaxQuadModel(Sym2 a, Sym2 b) : a_(a), b_(b) {
    if (!(a.eigenvalues()[0] > 0.0) || !(b.eigenvalues()[0] > 0.0))
      fail(ErrorKind::validation, "maxquad needs two positive definite matrices");
  }
  std::string name() const override { return "maxquad"; }
  HamiltonianKind kind() const override { return HamiltonianKind::analytic; }
  Smoothness smoothness() const override { return Smoothness::C0; }
  double value(Vec2 p) const override { return std::max(0.5 * a_.quad(p), 0.5 * b_.quad(p)); }

  /// Branch derivatives, or nothing when p sits within `band` of the kink.
  std::optional<Sym2> active_matrix(Vec2 p) const {
    const double qa = 0.5 * a_.quad(p), qb = 0.5 * b_.quad(p);
    const double band = 1e-6 * (1.0 + norm2(p));
    if (std::abs(qa - qb) <= band) return std::nullopt;
    return qa > qb ? a_ : b_;
  }
  std::optional<Vec2> exact_grad(Vec2 p) const override {
    if (auto m = active_matrix(p)) return (*m) * p;
    return std::nullopt;
  }
  std::optional<Sym2> exact_hess(Vec2 p) const override { return active_matrix(p); }

  Sym2 first() const { return a_; }
  Sym2 second() const { return b_; }

private:
  Sym2 a_, b_;
};

/// Values on a rectilinear table, Catmull-Rom bicubic interpolation.
class SampledModel final : public HamiltonianModel {
public:
  SampledModel(std::vector<double> xs, std::vector<double> ys, std::vector<double> values, std::string origin)
      : xs_(std::move(xs)), ys_(std::move(ys)), v_(std::move(values)), origin_(std::move(origin)) {
    if (xs_.size() < 4 || ys_.size() < 4 || v_.size() != xs_.size() * ys_.size())
      fail(ErrorKind::validation, "sampled Hamiltonian table must be a full rectilinear grid of at least 4x4 points");
  }
  std::string name() const override { return "sampled:" + origin_; }
  HamiltonianKind kind() const override { return HamiltonianKind::sampled; }
  Smoothness smoothness() const override { return Smoothness::C1; }

  double value(Vec2 p) const override {
    if (p.x < xs_.front() || p.x > xs_.back() || p.y < ys_.front() || p.y > ys_.back()) {
      std::ostringstream os;
      os << "point (" << p.x << "," << p.y << ") outside the sample hull of " << name();
      fail(ErrorKind::domain, os.str());
    }
    const auto [i, tx] = locate(xs_, p.x);
    const auto [j, ty] = locate(ys_, p.y);
    double col[4];
    for (int b = -1; b <= 2; ++b) {
      double row[4];
      for (int a = -1; a <= 2; ++a) row[a + 1] = at(i + a, j + b);
      col[b + 1] = catmull(row, tx);
    }
    return catmull(col, ty);
  }

private:
  static std::pair<long, double> locate(const std::vector<double> &g, double x) {
    auto it = std::upper_bound(g.begin(), g.end(), x);
    long i = static_cast<long>(it - g.begin()) - 1;
    i = std::clamp<long>(i, 0, static_cast<long>(g.size()) - 2);
    return {i, (x - g[i]) / (g[i + 1] - g[i])};
  }
  double at(long i, long j) const {
    // Linear extrapolation of one ghost layer keeps the stencil defined at the hull.
    const long nx = static_cast<long>(xs_.size()), ny = static_cast<long>(ys_.size());
    if (i < 0) return 2.0 * at(0, j) - at(1, j);
    if (i >= nx) return 2.0 * at(nx - 1, j) - at(nx - 2, j);
    if (j < 0) return 2.0 * at(i, 0) - at(i, 1);
    if (j >= ny) return 2.0 * at(i, ny - 1) - at(i, ny - 2);
    return v_[static_cast<std::size_t>(j * nx + i)];
  }
  static double catmull(const double f[4], double t) {
    const double a = -0.5 * f[0] + 1.5 * f[1] - 1.5 * f[2] + 0.5 * f[3];
    const double b = f[0] - 2.5 * f[1] + 2.0 * f[2] - 0.5 * f[3];
    const double c = -0.5 * f[0] + 0.5 * f[2];
    return ((a * t + b) * t + c) * t + f[1];
  }

  std::vector<double> xs_, ys_, v_;
  std::string origin_;
};

// ---------------------------------------------------------------------------
// Value handle

/// Immutable, cheaply copyable handle to a Hamiltonian model.
class Hamiltonian {
public:
  Hamiltonian() = default;
  explicit Hamiltonian(std::shared_ptr<const HamiltonianModel> m) : m_(std::move(m)) {}

  const HamiltonianModel &model() const { return *m_; }
  std::shared_ptr<const HamiltonianModel> model_ptr() const { return m_; }
  std::string name() const { return m_->name(); }
  HamiltonianKind kind() const { return m_->kind(); }
  Smoothness smoothness() const { return m_->smoothness(); }
  std::optional<Sym2> quadratic_matrix() const { return m_->quadratic_matrix(); }

  double operator()(Vec2 p) const { return m_->value(p); }
  double eval(Vec2 p) const { return m_->value(p); }

  static double fd_step(Vec2 p) { return 1e-4 * (1.0 + norm(p)); }

  Derivative<Vec2> grad_info(Vec2 p) const {
    if (auto g = m_->exact_grad(p)) return {*g, false};
    const double h = fd_step(p);
    return {{(eval({p.x + h, p.y}) - eval({p.x - h, p.y})) / (2.0 * h),
             (eval({p.x, p.y + h}) - eval({p.x, p.y - h})) / (2.0 * h)},
            true};
  }
  Derivative<Sym2> hess_info(Vec2 p) const {
    if (auto m = m_->exact_hess(p)) return {*m, false};
    const double h = fd_step(p);
    const double f0 = eval(p);
    const double fxx = (eval({p.x + h, p.y}) - 2.0 * f0 + eval({p.x - h, p.y})) / (h * h);
    const double fyy = (eval({p.x, p.y + h}) - 2.0 * f0 + eval({p.x, p.y - h})) / (h * h);
    const double fxy = (eval({p.x + h, p.y + h}) - eval({p.x + h, p.y - h}) - eval({p.x - h, p.y + h}) +
                        eval({p.x - h, p.y - h})) /
                       (4.0 * h * h);
    return {{fxx, fxy, fyy}, true};
  }
  Vec2 grad(Vec2 p) const { return grad_info(p).value; }
  Sym2 hess(Vec2 p) const { return hess_info(p).value; }
  std::optional<Sym3> third(Vec2 p) const { return m_->exact_third(p); }

  Jet jet(Vec2 p) const {
    Jet j;
    if (m_->exact_jet(p, j.value, j.grad, j.hess)) return j;
    j.value = eval(p);
    auto g = grad_info(p);
    auto h = hess_info(p);
    j.grad = g.value;
    j.hess = h.value;
    j.approximate = g.approximate || h.approximate;
    return j;
  }

private:
  std::shared_ptr<const HamiltonianModel> m_;
};

inline Hamiltonian make_quadratic(Sym2 a) { return Hamiltonian(std::make_shared<QuadraticModel>(a)); }

/// 1/4 |p|^4 + 1/2 |p|^2.
inline Hamiltonian make_quartic() {
  Polynomial2 r2{{2, 0, 1.0}, {0, 2, 1.0}};
  return Hamiltonian(std::make_shared<PolynomialModel>("quartic", r2 * r2 * 0.25 + r2 * 0.5));
}

/// 1/2 (p1^2 + 2 p2^2) + 1/4 (p1^2 + p1 p2 + 2 p2^2)^2.
inline Hamiltonian make_aniso_quartic() {
  Polynomial2 base{{2, 0, 0.5}, {0, 2, 1.0}};
  Polynomial2 q{{2, 0, 1.0}, {1, 1, 1.0}, {0, 2, 2.0}};
  return Hamiltonian(std::make_shared<PolynomialModel>("aniso-quartic", base + q * q * 0.25));
}

inline Hamiltonian make_maxquad(Sym2 a = {1.0, 0.0, 3.0}, Sym2 b = {3.0, 0.0, 1.0}) {
  return Hamiltonian(std::make_shared<MaxQuadModel>(a, b));
}

/// Reads a CSV table with header `p_x,p_y,H`.
inline Hamiltonian load_sampled(const std::string &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open Hamiltonian table " + path);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<double, double>, double> table;
  std::vector<double> xs, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double px, py, h;
    if (!(ls >> px >> py >> h)) fail(ErrorKind::validation, "malformed row in " + path + ": " + line);
    table[{px, py}] = h;
    xs.push_back(px);
    ys.push_back(py);
  }
  auto uniq = [](std::vector<double> &v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(xs);
  uniq(ys);
  std::vector<double> vals;
  vals.reserve(xs.size() * ys.size());
  for (double y : ys)
    for (double x : xs) {
      auto it = table.find({x, y});
      if (it == table.end()) fail(ErrorKind::validation, path + " is not a full rectilinear table");
      vals.push_back(it->second);
    }
  return Hamiltonian(std::make_shared<SampledModel>(xs, ys, vals, path));
}

inline std::vector<double> parse_doubles(const std::string &s, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    if (tok.empty()) continue;
    char *end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail(ErrorKind::validation, "not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

/// Registry lookup: `quad[:a11,a12,a22]`, `quartic`, `aniso-quartic`,
/// `maxquad[:a11,a12,a22,b11,b12,b22]`, `sampled:<file.csv>`.
inline Hamiltonian hamiltonian_from_name(const std::string &spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "quad") {
    if (args.empty()) return make_quadratic(Sym2::identity());
    auto v = parse_doubles(args);
    if (v.size() != 3) fail(ErrorKind::validation, "quad expects a11,a12,a22");
    return make_quadratic({v[0], v[1], v[2]});
  }
  if (head == "quartic") return make_quartic();
  if (head == "aniso-quartic") return make_aniso_quartic();
  if (head == "maxquad") {
    if (args.empty()) return make_maxquad();
    auto v = parse_doubles(args);
    if (v.size() != 6) fail(ErrorKind::validation, "maxquad expects six matrix entries");
    return make_maxquad({v[0], v[1], v[2]}, {v[3], v[4], v[5]});
  }
  if (head == "sampled") return load_sampled(args);
  fail(ErrorKind::validation, "unknown Hamiltonian '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Sublevel sets

/// Radius r with H(r e) = level along the unit direction e, by bisection.
inline double boundary_radius(const Hamiltonian &H, Vec2 e, double level, double tol = 1e-10) {
  if (level <= 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (H(hi * e) <= level) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200)
      fail(ErrorKind::validation, "H is not coercive along direction (" + std::to_string(e.x) + "," +
                                      std::to_string(e.y) + "); assumption (H1') violated");
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (H(mid * e) <= level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SamplingOptions {
  int directions = 256;
  int radial = 128;
};

/// Polar samples of {H <= level}: the origin plus `radial` points on each ray.
inline std::vector<Vec2> sublevel_samples(const Hamiltonian &H, double level, SamplingOptions opt = {}) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(opt.directions) * opt.radial + 1);
  pts.push_back({0.0, 0.0});
  if (level <= 0.0) return pts;
  std::vector<double> radius(opt.directions);
  parallel_for(radius.size(), [&](std::size_t j) {
    radius[j] = boundary_radius(H, unit(2.0 * pi * j / opt.directions), level);
  });
  for (int j = 0; j < opt.directions; ++j) {
    const Vec2 e = unit(2.0 * pi * j / opt.directions);
    for (int k = 1; k <= opt.radial; ++k) pts.push_back(e * (radius[j] * k / opt.radial));
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Auxiliary functions

/// H(p) / <[D^2 H(p)]^{-1} D H(p), D H(p)>, with value 1/2 at the origin.
inline double tau_tilde(const Hamiltonian &H, Vec2 p) {
  if (p.x == 0.0 && p.y == 0.0) return 0.5;
  if (auto a = H.quadratic_matrix()) {
    const Vec2 q = (*a) * p;
    return 0.5 * a->quad(p) / dot(a->inverse() * q, q);
  }
  const Sym2 m = H.hess(p);
  const double cond = m.condition();
  if (!(cond < 1e12)) {
    std::ostringstream os;
    os << "Hessian of " << H.name() << " numerically singular at (" << p.x << "," << p.y
       << "), condition number " << cond;
    fail(ErrorKind::numerical, os.str());
  }
  const Vec2 q = H.grad(p);
  const double denom = dot(m.inverse() * q, q);
  if (denom <= 0.0) return 0.5;
  return H(p) / denom;
}

struct TauLadderEntry {
  double delta;
  double tau;
};

struct AuxiliaryProfile {
  std::vector<double> R;
  std::vector<double> lambda;
  std::vector<double> Lambda;
  std::vector<double> tau;
  /// Samples whose neighbours jump by more than 25%; right-continuity there is unresolved.
  std::vector<bool> near_jump;
  /// Last sample stands for R = infinity.
  bool includes_infinity = false;
  /// tau values are a delta-ladder estimate (C0/C1 Hamiltonians).
  bool tau_is_delta_estimate = false;
  /// Ladder of tau_{H^delta}(R_max + 1e-3) for C0/C1 Hamiltonians.
  std::vector<TauLadderEntry> tau_ladder;
  bool tau_ladder_monotone = true;
};

struct ModuliSample {
  double lambda;
  double Lambda;
};

/// Smallest and largest Hessian eigenvalue over the samples; errors out on a
/// negative eigenvalue.
inline ModuliSample moduli_over(const Hamiltonian &H, const std::vector<Vec2> &pts) {
  std::vector<double> lo(pts.size()), hi(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    auto ev = H.hess(pts[i]).eigenvalues();
    lo[i] = ev[0];
    hi[i] = ev[1];
  });
  ModuliSample m{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (lo[i] < -1e-8 * (1.0 + std::abs(hi[i]))) {
      std::ostringstream os;
      os << H.name() << " is not convex: Hessian eigenvalue " << lo[i] << " at (" << pts[i].x << "," << pts[i].y
         << "); assumption (H1) violated";
      fail(ErrorKind::validation, os.str());
    }
    m.lambda = std::min(m.lambda, lo[i]);
    m.Lambda = std::max(m.Lambda, hi[i]);
  }
  return m;
}

inline std::vector<double> profile_levels(double R_max, int n) {
  if (n < 1 || !(R_max >= 0.0)) fail(ErrorKind::validation, "profile needs n_samples >= 1 and R_max >= 0");
  return linspace(n == 1 ? R_max : 0.0, R_max, static_cast<std::size_t>(n));
}

inline void flag_jumps(AuxiliaryProfile &prof) {
  prof.near_jump.assign(prof.R.size(), false);
  for (std::size_t i = 1; i < prof.R.size(); ++i) {
    auto jump = [](double a, double b) { return std::abs(a - b) > 0.25 * std::max(std::abs(a), std::abs(b)); };
    if (jump(prof.lambda[i], prof.lambda[i - 1]) || jump(prof.Lambda[i], prof.Lambda[i - 1]))
      prof.near_jump[i] = prof.near_jump[i - 1] = true;
  }
}

/// lambda_H(R) and Lambda_H(R) on n levels in [0, R_max].
inline AuxiliaryProfile lambda_profile(const Hamiltonian &H, double R_max, int n, SamplingOptions opt = {}) {
  AuxiliaryProfile prof;
  prof.R = profile_levels(R_max, n);
  if (auto a = H.quadratic_matrix()) {
    auto ev = a->eigenvalues();
    prof.lambda.assign(prof.R.size(), ev[0]);
    prof.Lambda.assign(prof.R.size(), ev[1]);
  } else {
    for (double R : prof.R) {
      auto m = moduli_over(H, sublevel_samples(H, R, opt));
      prof.lambda.push_back(m.lambda);
      prof.Lambda.push_back(m.Lambda);
    }
    // Nested sublevel sets: enforce the monotone envelope against sampling noise.
    for (std::size_t i = 1; i < prof.R.size(); ++i) {
      prof.lambda[i] = std::min(prof.lambda[i], prof.lambda[i - 1]);
      prof.Lambda[i] = std::max(prof.Lambda[i], prof.Lambda[i - 1]);
    }
  }
  flag_jumps(prof);
  return prof;
}

inline double tau_infimum(const Hamiltonian &H, double R, SamplingOptions opt) {
  auto pts = sublevel_samples(H, R, opt);
  std::vector<double> t(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { t[i] = tau_tilde(H, pts[i]); });
  return *std::min_element(t.begin(), t.end());
}

class MollifiedModel;
Hamiltonian mollify(const Hamiltonian &H, double delta);

struct TauOptions {
  SamplingOptions sampling{};
  /// Ladder delta_j = 2^{-j}, j = 1..ladder_length, for C0/C1 Hamiltonians.
  int ladder_length = 5;
  SamplingOptions ladder_sampling{64, 32};
};

/// tau_H(R) on n levels in [0, R_max]. Smooth Hamiltonians take the infimum of
/// tau_tilde over the sublevel set; C0/C1 ones report a delta-ladder.
inline AuxiliaryProfile tau_profile(const Hamiltonian &H, double R_max, int n, TauOptions opt = {}) {
  AuxiliaryProfile prof = lambda_profile(H, R_max, n, opt.sampling);
  if (H.quadratic_matrix()) {
    prof.tau.assign(prof.R.size(), 0.5);
    return prof;
  }
  if (H.smoothness() == Smoothness::C2) {
    for (double R : prof.R) prof.tau.push_back(tau_infimum(H, R, opt.sampling));
    for (std::size_t i = 1; i < prof.tau.size(); ++i) prof.tau[i] = std::min(prof.tau[i], prof.tau[i - 1]);
    return prof;
  }
  prof.tau_is_delta_estimate = true;
  const double eps = 1e-3;
  std::vector<Hamiltonian> ladder;
  for (int j = 1; j <= opt.ladder_length; ++j) {
    const double delta = std::ldexp(1.0, -j);
    ladder.push_back(mollify(H, delta));
    prof.tau_ladder.push_back({delta, tau_infimum(ladder.back(), R_max + eps, opt.ladder_sampling)});
  }
  for (std::size_t i = 2; i < prof.tau_ladder.size(); ++i) {
    const double d1 = prof.tau_ladder[i].tau - prof.tau_ladder[i - 1].tau;
    const double d0 = prof.tau_ladder[i - 1].tau - prof.tau_ladder[i - 2].tau;
    if (d1 * d0 < 0.0) prof.tau_ladder_monotone = false;
  }
  const Hamiltonian &finest = ladder.back();
  for (double R : prof.R) prof.tau.push_back(tau_infimum(finest, R + eps, opt.ladder_sampling));
  for (std::size_t i = 1; i < prof.tau.size(); ++i) prof.tau[i] = std::min(prof.tau[i], prof.tau[i - 1]);
  return prof;
}

/// Interpolated profile lookup (constant extrapolation past the last sample).
inline double profile_at(const std::vector<double> &R, const std::vector<double> &v, double r) {
  if (r <= R.front()) return v.front();
  if (r >= R.back()) return v.back();
  auto it = std::upper_bound(R.begin(), R.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - R.begin());
  const double t = (r - R[i - 1]) / (R[i] - R[i - 1]);
  return v[i - 1] + t * (v[i] - v[i - 1]);
}

// ---------------------------------------------------------------------------
// Validation of (H1)/(H2)

struct ValidationReport {
  bool normalized = true;       // H(0) = 0 and H >= 0 on samples
  bool midpoint_convex = true;  // H - lambda/2 |p|^2 midpoint convex on samples
  double lambda_tested = 0.0;
  double worst_midpoint_excess = 0.0;
  double min_value = 0.0;
  std::uint64_t seed = 0;
  bool ok() const { return normalized && midpoint_convex; }
};

/// Random midpoint-convexity test of H - lambda/2 |p|^2 on pairs from {H <= R}.
inline ValidationReport validate_hamiltonian(const Hamiltonian &H, double R, double lambda = 0.0,
                                             int pairs = 10000, std::uint64_t seed = 12345) {
  ValidationReport rep;
  rep.lambda_tested = lambda;
  rep.seed = seed;
  rep.min_value = H({0.0, 0.0});
  if (std::abs(rep.min_value) > 1e-12) rep.normalized = false;
  const int ndir = 256;
  std::vector<double> radius(ndir);
  for (int j = 0; j < ndir; ++j) radius[j] = boundary_radius(H, unit(2.0 * pi * j / ndir), R);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto draw = [&] {
    const double t = U(rng) * ndir;
    const int j = static_cast<int>(t) % ndir;
    const double r = std::min(radius[j], radius[(j + 1) % ndir]) * std::sqrt(U(rng));
    return unit(2.0 * pi * t / ndir) * r;
  };
  auto g = [&](Vec2 p) { return H(p) - 0.5 * lambda * norm2(p); };
  for (int k = 0; k < pairs; ++k) {
    const Vec2 p = draw(), q = draw();
    const double hp = H(p);
    rep.min_value = std::min(rep.min_value, hp);
    if (hp < -1e-12) rep.normalized = false;
    const double excess = g((p + q) * 0.5) - 0.5 * (g(p) + g(q));
    const double tol = 1e-10 * (1.0 + std::abs(g(p)) + std::abs(g(q)));
    rep.worst_midpoint_excess = std::max(rep.worst_midpoint_excess, excess);
    if (excess > tol) rep.midpoint_convex = false;
  }
  return rep;
}

inline void require_valid(const Hamiltonian &H, double R) {
  auto rep = validate_hamiltonian(H, R);
  if (!rep.normalized)
    fail(ErrorKind::validation, H.name() + " violates H(0) = min H = 0 (minimum sampled value " +
                                    std::to_string(rep.min_value) + ")");
  if (!rep.midpoint_convex)
    fail(ErrorKind::validation, H.name() + " failed the midpoint convexity test (excess " +
                                    std::to_string(rep.worst_midpoint_excess) + ")");
}

// ---------------------------------------------------------------------------
// Mollification

/// Normalized C-infinity bump c exp(-1/(1-|q|^2)) on the unit disk, tabulated
/// with its gradient and Hessian on a polar product rule: Gauss-Legendre in
/// the radius, trapezoid in the angle.
class MollifierRule {
public:
  struct Node {
    Vec2 q;
    double w;   // quadrature weight times eta(q)
    Vec2 dw;    // quadrature weight times grad eta(q)
    Sym2 d2w;   // quadrature weight times hess eta(q)
  };

  explicit MollifierRule(int radial = 96, int angular = 48) {
    std::vector<double> x, w;
    gauss_legendre(radial, x, w);
    double mass = 0.0;
    for (int a = 0; a < radial; ++a)
      for (int b = 0; b < angular; ++b) {
        const double r = 0.5 * (x[a] + 1.0);
        // Half-step angular offset keeps the node set symmetric under q -> -q.
        const Vec2 q = unit(2.0 * pi * (b + 0.5) / angular) * r;
        const double s = r * r;
        const double one = 1.0 - s;
        const double f = std::exp(-1.0 / one);
        if (f == 0.0) continue;
        const double ww = 0.5 * w[a] * r * (2.0 * pi / angular);
        const double c1 = -2.0 / (one * one);
        const double c2 = 4.0 / (one * one * one * one) - 8.0 / (one * one * one);
        Node nd;
        nd.q = q;
        nd.w = ww * f;
        nd.dw = q * (ww * f * c1);
        nd.d2w = (Sym2::outer(q) * c2 + Sym2::identity() * c1) * (ww * f);
        nodes_.push_back(nd);
        mass += nd.w;
      }
    for (auto &nd : nodes_) {
      nd.w /= mass;
      nd.dw = nd.dw / mass;
      nd.d2w = nd.d2w * (1.0 / mass);
    }
    for (auto &nd : nodes_) second_moment_ += nd.w * nd.q.x * nd.q.x;
  }

  const std::vector<Node> &nodes() const { return nodes_; }
  /// Integral of eta(q) q_1^2 over the disk (discrete).
  double second_moment() const { return second_moment_; }

  static const MollifierRule &standard() {
    static const MollifierRule rule;
    return rule;
  }

private:
  std::vector<Node> nodes_;
  double second_moment_ = 0.0;
};

/// H^delta(p) = (eta_delta * H)(p + p_delta) - (eta_delta * H)(p_delta).
class MollifiedModel final : public HamiltonianModel {
public:
  MollifiedModel(Hamiltonian base, double delta) : base_(std::move(base)), delta_(delta) {
    if (!(delta > 0.0 && delta <= 1.0)) fail(ErrorKind::validation, "mollification needs delta in (0, 1]");
    locate_minimizer();
    offset_ = convolved(shift_);
  }

  std::string name() const override {
    std::ostringstream os;
    os << base_.name() << "~delta=" << delta_;
    return os.str();
  }
  HamiltonianKind kind() const override { return HamiltonianKind::sampled; }
  Smoothness smoothness() const override { return Smoothness::C2; }

  double value(Vec2 p) const override { return convolved(p + shift_) - offset_; }
  std::optional<Vec2> exact_grad(Vec2 p) const override { return convolved_grad(p + shift_); }
  std::optional<Sym2> exact_hess(Vec2 p) const override {
    const Vec2 c = p + shift_;
    // The kernel derivatives integrate to zero; subtracting H(c) removes the
    // leading quadrature error.
    const double h0 = base_(c);
    Sym2 s;
    for (auto &nd : rule().nodes()) s = s + nd.d2w * (base_(c - nd.q * delta_) - h0);
    return s * (1.0 / (delta_ * delta_));
  }
  bool exact_jet(Vec2 p, double &v, Vec2 &g, Sym2 &h) const override {
    const Vec2 c = p + shift_;
    const double h0 = base_(c);
    double sv = 0.0;
    Vec2 sg;
    Sym2 sh;
    for (auto &nd : rule().nodes()) {
      const double d = base_(c - nd.q * delta_) - h0;
      sv += nd.w * d;
      sg += nd.dw * d;
      sh = sh + nd.d2w * d;
    }
    // Weights sum to one, so the subtracted constant returns unchanged.
    v = sv + h0 - offset_;
    g = sg / delta_;
    h = sh * (1.0 / (delta_ * delta_));
    return true;
  }

  /// (eta_delta * H)(p), without the shift.
  double convolved(Vec2 p) const {
    const double h0 = base_(p);
    double s = 0.0;
    for (auto &nd : rule().nodes()) s += nd.w * (base_(p - nd.q * delta_) - h0);
    return s + h0;
  }
  Vec2 convolved_grad(Vec2 p) const {
    const double h0 = base_(p);
    Vec2 g;
    for (auto &nd : rule().nodes()) g += nd.dw * (base_(p - nd.q * delta_) - h0);
    return g / delta_;
  }

  Vec2 minimizer() const { return shift_; }
  double delta() const { return delta_; }
  const Hamiltonian &base() const { return base_; }

  /// Bracket for the minimizer search, |p_delta| <= bracket_factor * delta.
  static constexpr double bracket_factor = 4.0;

private:
  static const MollifierRule &rule() { return MollifierRule::standard(); }

  // Coordinate descent; each line search brackets the root of the partial
  // derivative (monotone by convexity) and bisects it.
  void locate_minimizer() {
    const double box = bracket_factor * delta_;
    Vec2 p{0.0, 0.0};
    for (int sweep = 0; sweep < 200; ++sweep) {
      Vec2 g = convolved_grad(p);
      if (norm(g) <= 1e-10) break;
      for (int axis = 0; axis < 2; ++axis) {
        auto partial = [&](double t) {
          Vec2 q = p;
          (axis == 0 ? q.x : q.y) = t;
          const Vec2 gq = convolved_grad(q);
          return axis == 0 ? gq.x : gq.y;
        };
        double lo = -box, hi = box;
        const double flo = partial(lo), fhi = partial(hi);
        if (flo > 0.0 || fhi < 0.0) {
          std::ostringstream os;
          os << "mollified minimizer not bracketed within |p| <= " << box << " for " << base_.name();
          fail(ErrorKind::numerical, os.str());
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * box; ++it) {
          const double mid = 0.5 * (lo + hi);
          (partial(mid) < 0.0 ? lo : hi) = mid;
        }
        (axis == 0 ? p.x : p.y) = 0.5 * (lo + hi);
      }
    }
    shift_ = p;
  }

  Hamiltonian base_;
  double delta_;
  Vec2 shift_{};
  double offset_ = 0.0;
};

inline Hamiltonian mollify(const Hamiltonian &H, double delta) {
  return Hamiltonian(std::make_shared<MollifiedModel>(H, delta));
}

// ---------------------------------------------------------------------------
// Strong convexification

/// H~(p) = H(p) eta(|p|) + k psi(|p|): eta cuts H off between 4r and 8r and
/// psi is a convex radial function vanishing on B(0, 2r) and growing like
/// |p|^2, where B(0, r) contains the sublevel set {H <= R + 1}.
class StrongifiedModel final : public HamiltonianModel {
public:
  StrongifiedModel(Hamiltonian base, double R) : base_(std::move(base)), level_(R) {
    if (!(R >= 1.0)) fail(ErrorKind::validation, "strongify requires R >= 1");
    double rho = 0.0;
    for (int j = 0; j < 256; ++j) rho = std::max(rho, boundary_radius(base_, unit(2.0 * pi * j / 256), R + 1.0));
    r_ = 1.05 * rho;
    double sup = 0.0;
    for (int j = 0; j < 256; ++j)
      for (int k = 0; k <= 64; ++k) {
        const Vec2 p = unit(2.0 * pi * j / 256) * (r_ * (4.0 + 4.0 * k / 64.0));
        sup = std::max(sup, cutoff_part_hess(p).norm());
      }
    stiffness_ = 1.0 + 8.0 * sup;
  }

  std::string name() const override { return base_.name() + "~strong(R=" + std::to_string(level_) + ")"; }
  HamiltonianKind kind() const override { return base_.kind() == HamiltonianKind::sampled ? HamiltonianKind::sampled : HamiltonianKind::analytic; }
  Smoothness smoothness() const override { return base_.smoothness(); }

  double value(Vec2 p) const override {
    const double r = norm(p);
    const double eta = cutoff(r).value;
    const double h = eta > 0.0 ? base_(p) * eta : 0.0;
    return h + stiffness_ * radial(r).value;
  }
  std::optional<Vec2> exact_grad(Vec2 p) const override {
    const double r = norm(p);
    if (r == 0.0) return base_.grad(p);
    const Vec2 e = p / r;
    const auto c = cutoff(r);
    Vec2 g = e * (stiffness_ * radial(r).d1);
    if (c.value > 0.0) g += base_.grad(p) * c.value + e * (base_(p) * c.d1);
    return g;
  }
  std::optional<Sym2> exact_hess(Vec2 p) const override {
    const double r = norm(p);
    if (r == 0.0) return base_.hess(p);
    Sym2 m = radial_hess(p, radial(r)) * stiffness_;
    if (cutoff(r).value > 0.0) m = m + cutoff_part_hess(p);
    return m;
  }

  double stiffness() const { return stiffness_; }
  /// Radius of the ball on which H~ = H.
  double agreement_radius() const { return r_; }

private:
  Smoothstep cutoff(double r) const {
    auto s = smoothstep5((r - 4.0 * r_) / (4.0 * r_));
    const double w = 4.0 * r_;
    return {1.0 - s.value, -s.d1 / w, -s.d2 / (w * w)};
  }
  // psi'' ramps from 0 at 2r to 2 at 4r; closed-form antiderivatives of the quintic ramp.
  Smoothstep radial(double rad) const {
    const double a = 2.0 * r_, w = 2.0 * r_;
    const double t = (rad - a) / w;
    if (t <= 0.0) return {0.0, 0.0, 0.0};
    if (t >= 1.0) {
      const double s = rad - (a + w);
      return {2.0 * w * w / 7.0 + w * s + s * s, w + 2.0 * s, 2.0};
    }
    const double s1 = t * t * t * t * (2.5 + t * (-3.0 + t));
    const double s2 = t * t * t * t * t * (0.5 + t * (-0.5 + t / 7.0));
    return {2.0 * w * w * s2, 2.0 * w * s1, 2.0 * smoothstep5(t).value};
  }
  static Sym2 radial_hess(Vec2 p, Smoothstep f) {
    const double r = norm(p);
    const Sym2 ee = Sym2::outer(p / r);
    return ee * f.d2 + (Sym2::identity() - ee) * (f.d1 / r);
  }
  Sym2 cutoff_part_hess(Vec2 p) const {
    const double r = norm(p);
    const auto c = cutoff(r);
    if (c.value == 0.0 && c.d1 == 0.0) return {};
    const Vec2 e = p / r;
    return base_.hess(p) * c.value + Sym2::sym_outer(base_.grad(p), e * c.d1) + radial_hess(p, c) * base_(p);
  }

  Hamiltonian base_;
  double level_;
  double r_ = 0.0;
  double stiffness_ = 0.0;
};

/// Returns H~ with H~ = H on {H <= R + 1} satisfying (H1') and (H2).
inline Hamiltonian strongify(const Hamiltonian &H, double R) {
  auto model = std::make_shared<StrongifiedModel>(H, R);
  Hamiltonian out(model);
  for (const Vec2 &p : sublevel_samples(H, R + 1.0, {128, 32})) {
    const double a = H(p), b = out(p);
    if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a)))
      fail(ErrorKind::numerical, "strongify: agreement with H failed on {H <= R + 1}");
  }
  return out;
}

} // namespace aronsson

#endif // ARONSSON_HAMILTONIAN_HPP
