#ifndef ARONSSON_EXPERIMENT_HPP
#define ARONSSON_EXPERIMENT_HPP

// Batch driver: INI configuration, the solve / identities / diagnostics /
// cones pipeline, the checksummed manifest and plot-ready CSV tables.

#include <aronsson/cones.hpp>
#include <aronsson/diagnostics.hpp>
#include <aronsson/identities.hpp>
#include <aronsson/solver.hpp>

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace aronsson {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

inline const std::vector<std::string> &diagnostic_names() {
  static const std::vector<std::string> names{"identities", "estimates", "cones", "annuli"};
  return names;
}

struct ExperimentConfig {
  std::string hamiltonian = "quad";
  std::string boundary = "aronsson";
  Rect domain{-1.0, 1.0, -1.0, 1.0};
  std::vector<int> grid_sizes{33};
  std::vector<double> eps_ladder{0.1};
  /// Empty: no mollification stage.
  std::vector<double> delta_ladder;
  std::set<std::string> diagnostics{"identities", "estimates", "cones", "annuli"};
  std::string output_prefix = "out";
  std::uint64_t seed = 1;
  int cone_trials = 200;
  int identity_points = 100;
  std::vector<double> alphas{0.25, 0.5};
  int annuli_k_max = 12;

  bool selected(const std::string &d) const { return diagnostics.count(d) > 0; }
};

namespace detail {

inline std::string trim(const std::string &s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string &field, const std::string &s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception &) {
  }
  fail(ErrorKind::validation, field + ": '" + s + "' is not a number");
}

inline std::vector<double> parse_number_list(const std::string &field, const std::string &s) {
  std::vector<double> out;
  for (const auto &item : split_list(s)) out.push_back(parse_number(field, item));
  return out;
}

inline long parse_integer(const std::string &field, const std::string &s) {
  const double v = parse_number(field, s);
  if (v != std::floor(v) || std::abs(v) > 1e15) fail(ErrorKind::validation, field + ": '" + s + "' is not an integer");
  return static_cast<long>(v);
}

} // namespace detail

inline Rect parse_domain(const std::string &s) {
  const auto v = detail::parse_number_list("problem.domain", s);
  if (v.size() != 4) fail(ErrorKind::validation, "problem.domain: expected x0,x1,y0,y1");
  return {v[0], v[1], v[2], v[3]};
}

inline void validate(const ExperimentConfig &c) {
  if (c.hamiltonian.empty()) fail(ErrorKind::validation, "problem.hamiltonian: missing");
  if (c.boundary.empty()) fail(ErrorKind::validation, "problem.boundary: missing");
  if (!(c.domain.x1 > c.domain.x0) || !(c.domain.y1 > c.domain.y0))
    fail(ErrorKind::validation, "problem.domain: rectangle must have positive size");
  if (c.grid_sizes.empty()) fail(ErrorKind::validation, "grid.sizes: no grid sizes");
  for (int n : c.grid_sizes)
    if (n < 5 || n % 2 == 0) fail(ErrorKind::validation, "grid.sizes: " + std::to_string(n) + " must be odd and >= 5");
  require_decreasing_ladder(c.eps_ladder, "solver.eps");
  if (!c.delta_ladder.empty()) require_decreasing_ladder(c.delta_ladder, "solver.delta");
  for (const auto &d : c.diagnostics)
    if (std::find(diagnostic_names().begin(), diagnostic_names().end(), d) == diagnostic_names().end())
      fail(ErrorKind::validation, "diagnostics.select: unknown diagnostic '" + d + "'");
  if (c.cone_trials < 1) fail(ErrorKind::validation, "diagnostics.cone_trials: must be >= 1");
  if (c.identity_points < 1) fail(ErrorKind::validation, "diagnostics.identity_points: must be >= 1");
  for (double a : c.alphas)
    if (!(a > 0.0)) fail(ErrorKind::validation, "diagnostics.alphas: entries must be positive");
  if (c.annuli_k_max < 1) fail(ErrorKind::validation, "diagnostics.annuli_k_max: must be >= 1");
  if (c.output_prefix.empty()) fail(ErrorKind::validation, "output.prefix: missing");
}

/// Parses the INI text; every key must be known, and the result is validated.
inline ExperimentConfig parse_config(const std::string &text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    fail(ErrorKind::validation, std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  for (const auto &[section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail(ErrorKind::validation, "config: key '" + section + "' outside a section");
    for (const auto &[key, node] : body) {
      const std::string field = section + "." + key;
      const std::string v = detail::trim(node.data());
      if (field == "problem.hamiltonian") c.hamiltonian = v;
      else if (field == "problem.boundary") c.boundary = v;
      else if (field == "problem.domain") c.domain = parse_domain(v);
      else if (field == "grid.sizes") {
        c.grid_sizes.clear();
        for (const auto &s : detail::split_list(v)) c.grid_sizes.push_back(static_cast<int>(detail::parse_integer(field, s)));
      } else if (field == "solver.eps") c.eps_ladder = detail::parse_number_list(field, v);
      else if (field == "solver.delta") c.delta_ladder = detail::parse_number_list(field, v);
      else if (field == "diagnostics.select") {
        const auto items = detail::split_list(v);
        c.diagnostics = {items.begin(), items.end()};
        if (v == "none") c.diagnostics.clear();
      } else if (field == "diagnostics.cone_trials") c.cone_trials = static_cast<int>(detail::parse_integer(field, v));
      else if (field == "diagnostics.identity_points") c.identity_points = static_cast<int>(detail::parse_integer(field, v));
      else if (field == "diagnostics.alphas") c.alphas = detail::parse_number_list(field, v);
      else if (field == "diagnostics.annuli_k_max") c.annuli_k_max = static_cast<int>(detail::parse_integer(field, v));
      else if (field == "output.prefix") c.output_prefix = v;
      else if (field == "output.seed") {
        const long s = detail::parse_integer(field, v);
        if (s < 0) fail(ErrorKind::validation, "output.seed: must be nonnegative");
        c.seed = static_cast<std::uint64_t>(s);
      } else fail(ErrorKind::validation, "config: unknown key '" + field + "'");
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline json to_json(const ExperimentConfig &c) {
  json d = json::array();
  for (const auto &s : c.diagnostics) d.push_back(s);
  return {{"hamiltonian", c.hamiltonian},
          {"boundary", c.boundary},
          {"domain", {c.domain.x0, c.domain.x1, c.domain.y0, c.domain.y1}},
          {"grid_sizes", c.grid_sizes},
          {"eps_ladder", c.eps_ladder},
          {"delta_ladder", c.delta_ladder},
          {"diagnostics", d},
          {"output_prefix", c.output_prefix},
          {"seed", c.seed},
          {"cone_trials", c.cone_trials},
          {"identity_points", c.identity_points},
          {"alphas", c.alphas},
          {"annuli_k_max", c.annuli_k_max}};
}

// ---------------------------------------------------------------------------
// Report serialization

inline json to_json(const EstimateReport &r) {
  json j{{"id", to_string(r.id)},
         {"lhs", r.lhs_value},
         {"rhs", r.rhs_value},
         {"satisfied", r.satisfied},
         {"slack_rel", r.slack_rel},
         {"slack_abs", r.slack_abs}};
  j["empirical_constant"] = r.empirical_constant ? json(*r.empirical_constant) : json(nullptr);
  json in = json::object();
  for (const auto &[k, v] : r.inputs_echo) in[k] = v;
  j["inputs"] = in;
  return j;
}

inline json to_json(const Thm32Report &r) {
  json j = to_json(static_cast<const EstimateReport &>(r));
  j["eps"] = r.eps;
  j["linf_V"] = r.linf_V;
  j["constant_per_eps"] = r.constant_per_eps;
  j["margin"] = r.margin;
  j["reference"] = r.reference;
  return j;
}

inline json to_json(const IdentityReport &r) {
  json j{{"id", to_string(r.id)},
         {"samples", r.residuals.size()},
         {"max_abs_residual", r.max_abs_residual},
         {"relative_residual", r.relative_residual},
         {"masked", r.masked},
         {"masked_fraction", r.masked_fraction}};
  if (r.refinement_ratio) j["refinement_ratio"] = *r.refinement_ratio;
  if (r.order_estimate) j["order_estimate"] = *r.order_estimate;
  return j;
}

inline json to_json(const Thm23Report &r) {
  json j = to_json(static_cast<const IdentityReport &>(r));
  j["p90_relative"] = r.p90_relative;
  j["min_rhs"] = r.min_rhs;
  return j;
}

inline json to_json(const ComparisonReport &r) {
  return {{"trials", r.n_trials},     {"seed", r.seed},
          {"violations", r.violations}, {"worst_excess", r.worst_excess},
          {"worst_margin", r.worst_margin}, {"eps_slack", r.eps_slack},
          {"passed", r.passed()},
          {"worst_trial",
           {{"vertex", {r.worst_trial.vertex.x, r.worst_trial.vertex.y}},
            {"a", r.worst_trial.a},
            {"excess_above", r.worst_trial.excess_above},
            {"excess_below", r.worst_trial.excess_below},
            {"slack", r.worst_trial.slack}}}};
}

inline json to_json(const LipschitzCharacterization &r) {
  return {{"ok", r.ok},
          {"worst_violation", r.worst_violation},
          {"worst_x", {r.worst_x.x, r.worst_x.y}},
          {"worst_y", {r.worst_y.x, r.worst_y.y}},
          {"segments", r.segments},
          {"slack", r.slack},
          {"seed", r.seed}};
}

inline json to_json(const LogDivergenceTable &t) {
  json cols = json::array();
  for (const auto &c : t.columns)
    cols.push_back({{"label", c.label},
                    {"kind", c.kind == GradientFunctional::log_norm ? "log" : "power"},
                    {"alpha", c.alpha},
                    {"contribution", c.contribution},
                    {"partial_sum", c.partial_sum},
                    {"last_increment_ratio", last_increment_ratio(c)}});
  return {{"k", t.k}, {"columns", cols}};
}

inline json error_json(const Error &e) { return {{"kind", Error::kind_name(e.kind())}, {"message", e.what()}}; }

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::filesystem::path &p, const std::string &s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + p.string());
  out << s;
  if (!out) fail(ErrorKind::io, "write failed for " + p.string());
}

inline void write_json(const std::filesystem::path &p, const json &j) { write_text(p, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path &p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::io, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    fail(ErrorKind::io, p.string() + ": " + e.what());
  }
}

inline std::uint32_t file_crc32(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + p.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

struct ManifestEntry {
  std::string path;
  std::uintmax_t bytes = 0;
  std::uint32_t crc32 = 0;
};

inline ManifestEntry manifest_entry(const std::filesystem::path &root, const std::string &rel) {
  const auto p = root / rel;
  return {rel, std::filesystem::file_size(p), file_crc32(p)};
}

// ---------------------------------------------------------------------------
// Pipeline

struct RunOutcome {
  int exit_code = 0;
  std::filesystem::path manifest;
  std::vector<std::string> files;
  std::optional<Error> error;
};

namespace detail {

/// Point of a rectangle given in unit coordinates of the [-1, 1]^2 reference square.
inline Vec2 relative_point(const Rect &d, double x, double y) {
  return {d.x0 + 0.5 * (x + 1.0) * d.width(), d.y0 + 0.5 * (y + 1.0) * d.height()};
}

inline std::optional<LinearFunction> linear_from_spec(const std::string &spec) {
  if (spec == "zero") return LinearFunction{};
  if (spec.rfind("linear:", 0) != 0) return std::nullopt;
  const auto v = parse_doubles(spec.substr(7));
  if (v.size() != 2 && v.size() != 3) return std::nullopt;
  return LinearFunction{v[0], v[1], v.size() == 3 ? v[2] : 0.0};
}

/// sup over V of |u - exact| when the boundary spec has a closed-form minimizer.
inline std::optional<double> exact_error(const std::string &spec, const GridFunction &u, const Rect &V) {
  const Grid2D &g = u.grid();
  std::function<double(double, double)> f;
  if (spec == "aronsson") f = aronsson_w;
  else if (auto F = linear_from_spec(spec)) f = [F](double x, double y) { return (*F)(x, y); };
  else return std::nullopt;
  const NodeRange r = g.range(V);
  double m = 0.0;
  for (int j = r.j0; j <= r.j1; ++j)
    for (int i = r.i0; i <= r.i1; ++i) m = std::max(m, std::abs(u(i, j) - f(g.x(i), g.y(j))));
  return m;
}

/// Affine function matching u and its central-difference gradient at the node nearest p.
inline LinearFunction tangent_plane(const GridFunction &u, Vec2 p) {
  const Grid2D &g = u.grid();
  const int i = std::clamp(static_cast<int>(std::lround((p.x - g.box().x0) / g.hx())), 1, g.nx() - 2);
  const int j = std::clamp(static_cast<int>(std::lround((p.y - g.box().y0) / g.hy())), 1, g.ny() - 2);
  const double a = (u(i + 1, j) - u(i - 1, j)) / (2.0 * g.hx());
  const double b = (u(i, j + 1) - u(i, j - 1)) / (2.0 * g.hy());
  return {a, b, u(i, j) - a * g.x(i) - b * g.y(j)};
}

template <class F>
json guarded(F &&f) {
  try {
    return f();
  } catch (const Error &e) {
    return {{"error", error_json(e)}};
  }
}

inline const std::vector<std::string> &identity_test_functions() {
  static const std::vector<std::string> names{"quadratic", "sinsin", "saddle", "xy"};
  return names;
}

} // namespace detail

/// Interior rectangles of the estimates: V inside U inside the domain.
inline Rect estimate_region_V(const Rect &d) { return d.inset(0.125); }
inline Rect estimate_region_U(const Rect &d) { return d.inset(0.0625); }

/// Closed-form identity table over the registry test functions.
inline json closed_form_identities(const Hamiltonian &H, int points, std::uint64_t seed) {
  json out = json::array();
  for (const auto &name : detail::identity_test_functions()) {
    const TestFn v = testfn_from_name(name);
    const auto pts = random_points(v, static_cast<std::size_t>(points), seed);
    for (IdentityId id : {IdentityId::lemma21, IdentityId::lemma22, IdentityId::fund1, IdentityId::fund2,
                          IdentityId::fund5, IdentityId::fund6}) {
      json row = detail::guarded([&] { return to_json(check_closed_form(id, H, v, pts)); });
      row["test_function"] = name;
      row["identity"] = to_string(id);
      out.push_back(row);
    }
  }
  return out;
}

/// Estimate reports for the finest solution of a ladder.
inline json estimate_reports(const Hamiltonian &H, const ContinuationResult &run, const Rect &domain) {
  const SolveResult &fine = run.results.back();
  const GridFunction &u = fine.u;
  const Grid2D &g = u.grid();
  const Rect V = estimate_region_V(domain), U = estimate_region_U(domain);
  const double scale = 0.5 * std::min(domain.width(), domain.height());
  json j;
  j["eq1x1"] = detail::guarded([&] { return to_json(check_eq1x1(u, H, 1.0, V, U)); });
  j["thm12"] = detail::guarded([&] {
    const double rb = 0.2 * scale;
    const auto fam = bump_family(g, {V.x0 + rb, V.x1 - rb, V.y0 + rb, V.y1 - rb}, 2, rb);
    const auto r = check_thm12_bounds(u, H, fam, V, U);
    return json{{"lower", to_json(r[0])}, {"upper", to_json(r[1])}};
  });
  j["orthogonality"] = detail::guarded([&] {
    const TestFunction phi = make_bump(g, detail::relative_point(domain, 0.55, 0.3), 0.2 * scale);
    return to_json(orthogonality_report(u, H, 1.0, 0.0, phi, fine.eps));
  });
  j["flatness"] = detail::guarded([&] {
    const Vec2 lo = detail::relative_point(domain, 0.2, 0.2), hi = detail::relative_point(domain, 0.6, 0.6);
    const Rect B{lo.x, hi.x, lo.y, hi.y};
    return to_json(flatness_check(u, H, B, detail::tangent_plane(u, B.center())));
  });
  if (run.results.size() >= 2)
    j["thm32"] = detail::guarded([&] { return to_json(check_thm32_linf(run.results, H, V, U)); });
  else
    j["thm32"] = {{"skipped", "needs at least two eps values"}};
  return j;
}

inline json cone_reports(const Hamiltonian &H, const GridFunction &boundary, const SolveResult &fine, int trials,
                         std::uint64_t seed) {
  const GridFunction &u = fine.u;
  json j;
  j["comparison"] = detail::guarded([&] {
    ComparisonOptions opt;
    opt.seed = seed;
    opt.eps_slack = fine.eps;
    return to_json(comparison_with_cones(u, H, trials, opt));
  });
  j["lipschitz_bound"] = detail::guarded([&] { return to_json(lipschitz_bound_check(u, H, boundary_lipschitz(boundary))); });
  j["lipschitz_characterization"] = detail::guarded([&] {
    LipschitzOptions opt;
    opt.segments = 2000;
    opt.seed = seed;
    const double a = max_cell_H(H, u);
    json r = to_json(lipschitz_characterization(u, H, a, opt));
    r["a"] = a;
    return r;
  });
  return j;
}

inline json solve_summary(const std::string &boundary_spec, const ContinuationResult &run, const Rect &V) {
  json rows = json::array();
  for (const auto &r : run.results) {
    json row{{"eps", r.eps},
             {"iters", r.iters},
             {"converged", r.converged},
             {"grad_norm", r.grad_norm},
             {"grad_threshold", r.grad_threshold},
             {"residual", r.residual},
             {"log_energy", r.log_energy},
             {"log_domain", r.log_domain},
             {"negative_det_fraction", negative_det_fraction(r.u)}};
    const auto err = detail::exact_error(boundary_spec, r.u, V);
    row["sup_error_V"] = err ? json(*err) : json(nullptr);
    rows.push_back(row);
  }
  return {{"ladder", rows}, {"successive_diff", run.successive_diff}};
}

namespace detail {

class FileLog {
public:
  explicit FileLog(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path path(const std::string &rel) { return root_ / rel; }
  void add(const std::string &rel) { files_.push_back(rel); }
  void json_file(const std::string &rel, const json &j) {
    write_json(root_ / rel, j);
    add(rel);
  }
  void csv_file(const std::string &rel, const GridFunction &f) {
    write_csv(f, (root_ / rel).string());
    add(rel);
  }
  const std::vector<std::string> &files() const { return files_; }

private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline std::string eps_tag(std::size_t k) { return std::to_string(k); }

inline void run_pipeline(const ExperimentConfig &c, FileLog &log) {
  const Hamiltonian H = hamiltonian_from_name(c.hamiltonian);
  const Rect V = estimate_region_V(c.domain);

  if (c.selected("identities"))
    log.json_file("identities.json", {{"hamiltonian", H.name()},
                                      {"points", c.identity_points},
                                      {"seed", c.seed},
                                      {"reports", closed_form_identities(H, c.identity_points, c.seed)}});
  if (c.selected("annuli")) {
    const auto t = log_divergence_experiment(c.alphas, c.annuli_k_max);
    const int k_hi = c.annuli_k_max, k_lo = std::min(4, k_hi);
    log.json_file("annuli.json", {{"table", to_json(t)}, {"log_report", to_json(log_divergence_report(t, k_lo, k_hi))}});
  }

  for (int n : c.grid_sizes) {
    const std::string tag = "n" + std::to_string(n);
    const Grid2D g(n, n, c.domain);
    const GridFunction b = boundary_from_spec(c.boundary, g);
    const ContinuationResult run = eps_continuation(H, b, c.eps_ladder);
    for (std::size_t k = 0; k < run.results.size(); ++k)
      log.csv_file("u_" + tag + "_eps" + eps_tag(k) + ".csv", run.results[k].u);
    const SolveResult &fine = run.results.back();
    log.csv_file("residual_" + tag + ".csv", residual_aronsson(H, fine.u, fine.eps));

    json solve = solve_summary(c.boundary, run, V);
    solve["n"] = n;
    solve["hamiltonian"] = H.name();
    solve["boundary"] = c.boundary;
    json stages = json::array();
    if (!c.delta_ladder.empty())
      for (const auto &st : delta_pipeline(H, b, c.delta_ladder, c.eps_ladder, V))
        stages.push_back({{"delta", st.delta},
                          {"coarse", st.coarse},
                          {"linf_on_V", st.linf_on_V},
                          {"converged", st.run.results.back().converged},
                          {"residual", st.run.results.back().residual}});
    solve["delta_stages"] = stages;
    log.json_file("solve_" + tag + ".json", solve);

    if (c.selected("identities")) {
      json rows = json::array();
      for (const auto &r : run.results) {
        json row = guarded([&] { return to_json(check_thm23(H, r.u, r.eps)); });
        row["eps"] = r.eps;
        rows.push_back(row);
      }
      log.json_file("identities_" + tag + ".json", {{"n", n}, {"thm23", rows}});
    }
    if (c.selected("estimates")) {
      json e = estimate_reports(H, run, c.domain);
      e["n"] = n;
      log.json_file("diagnostics_" + tag + ".json", e);
    }
    if (c.selected("cones")) {
      json e = cone_reports(H, b, fine, c.cone_trials, c.seed);
      e["n"] = n;
      log.json_file("cones_" + tag + ".json", e);
    }
  }
}

} // namespace detail

/// Runs the pipeline into output_prefix and writes manifest.json there. Module
/// errors end the run; they are recorded in the manifest and set the exit code.
inline RunOutcome run(const ExperimentConfig &c) {
  namespace fs = std::filesystem;
  validate(c);
  const fs::path root(c.output_prefix);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) fail(ErrorKind::io, "cannot create output directory " + root.string());

  detail::FileLog log(root);
  RunOutcome out;
  try {
    detail::run_pipeline(c, log);
  } catch (const Error &e) {
    out.error = e;
    out.exit_code = e.exit_code();
  }
  json files = json::array();
  for (const auto &rel : log.files()) {
    const ManifestEntry m = manifest_entry(root, rel);
    files.push_back({{"path", m.path}, {"bytes", m.bytes}, {"crc32", m.crc32}});
  }
  json manifest{{"config", to_json(c)},
                {"status", out.error ? "error" : "ok"},
                {"exit_code", out.exit_code},
                {"error", out.error ? error_json(*out.error) : json(nullptr)},
                {"files", files}};
  out.manifest = root / "manifest.json";
  write_json(out.manifest, manifest);
  out.files = log.files();
  return out;
}

/// Files listed in a manifest whose size or checksum does not match the disk.
inline std::vector<std::string> verify_manifest(const std::filesystem::path &prefix) {
  const json m = read_json(prefix / "manifest.json");
  std::vector<std::string> bad;
  for (const auto &f : m.at("files")) {
    const std::string rel = f.at("path").get<std::string>();
    const auto p = prefix / rel;
    if (!std::filesystem::exists(p) || std::filesystem::file_size(p) != f.at("bytes").get<std::uintmax_t>() ||
        file_crc32(p) != f.at("crc32").get<std::uint32_t>())
      bad.push_back(rel);
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Plot tables

namespace detail {

inline std::string csv_value(const json &v) {
  if (v.is_null()) return "nan";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return format_double(v.get<double>());
}

inline std::string size_tag(const std::string &file, const std::string &stem) {
  // stem_n{n}.ext -> n
  const auto a = stem.size() + 2;
  return file.substr(a, file.find('.') - a);
}

} // namespace detail

/// Writes eps_convergence.csv, annuli.csv, delta_linf.csv and one
/// residual_heatmap_n{n}.csv per grid from a finished run directory.
inline std::vector<std::string> emit_plots(const std::string &prefix) {
  namespace fs = std::filesystem;
  const fs::path root(prefix);
  if (prefix.empty() || !fs::is_directory(root)) fail(ErrorKind::io, "missing inputs: " + (prefix.empty() ? std::string("<empty prefix>") : prefix));
  if (!fs::exists(root / "manifest.json")) fail(ErrorKind::io, "missing inputs: manifest.json");
  const json m = read_json(root / "manifest.json");
  std::vector<std::string> listed, absent;
  for (const auto &f : m.at("files")) {
    listed.push_back(f.at("path").get<std::string>());
    if (!fs::exists(root / listed.back())) absent.push_back(listed.back());
  }
  std::vector<std::string> solves, residuals;
  bool annuli = false;
  for (const auto &f : listed) {
    if (f.rfind("solve_n", 0) == 0) solves.push_back(f);
    if (f.rfind("residual_n", 0) == 0) residuals.push_back(f);
    if (f == "annuli.json") annuli = true;
  }
  if (solves.empty()) absent.push_back("solve_n*.json");
  if (!absent.empty()) {
    std::string msg = "missing inputs:";
    for (const auto &a : absent) msg += " " + a;
    fail(ErrorKind::io, msg);
  }

  std::vector<std::string> written;
  std::ostringstream eps_csv, delta_csv;
  eps_csv << "n,eps,sup_error_V,successive_diff,residual,iters,converged,negative_det_fraction\n";
  delta_csv << "n,delta,linf_on_V\n";
  for (const auto &f : solves) {
    const json s = read_json(root / f);
    const std::string n = std::to_string(s.at("n").get<int>());
    const auto &ladder = s.at("ladder");
    const auto &diff = s.at("successive_diff");
    for (std::size_t k = 0; k < ladder.size(); ++k) {
      const auto &r = ladder[k];
      eps_csv << n << ',' << detail::csv_value(r.at("eps")) << ',' << detail::csv_value(r.at("sup_error_V")) << ','
              << (k == 0 ? "nan" : detail::csv_value(diff[k - 1])) << ',' << detail::csv_value(r.at("residual")) << ','
              << detail::csv_value(r.at("iters")) << ',' << detail::csv_value(r.at("converged")) << ','
              << detail::csv_value(r.at("negative_det_fraction")) << '\n';
    }
    for (const auto &st : s.at("delta_stages"))
      delta_csv << n << ',' << detail::csv_value(st.at("delta")) << ',' << detail::csv_value(st.at("linf_on_V")) << '\n';
  }
  write_text(root / "eps_convergence.csv", eps_csv.str());
  written.push_back("eps_convergence.csv");
  write_text(root / "delta_linf.csv", delta_csv.str());
  written.push_back("delta_linf.csv");

  if (annuli) {
    const json t = read_json(root / "annuli.json").at("table");
    std::ostringstream a;
    a << "k,alpha,partial_sum\n";
    for (const auto &col : t.at("columns")) {
      const bool log_col = col.at("kind").get<std::string>() == "log";
      const auto &ps = col.at("partial_sum");
      for (std::size_t k = 0; k < ps.size(); ++k)
        a << t.at("k")[k].get<int>() << ',' << (log_col ? std::string("log") : detail::csv_value(col.at("alpha"))) << ','
          << detail::csv_value(ps[k]) << '\n';
    }
    write_text(root / "annuli.csv", a.str());
    written.push_back("annuli.csv");
  }
  for (const auto &f : residuals) {
    const std::string out = "residual_heatmap_n" + detail::size_tag(f, "residual") + ".csv";
    fs::copy_file(root / f, root / out, fs::copy_options::overwrite_existing);
    written.push_back(out);
  }
  return written;
}

} // namespace aronsson

#endif // ARONSSON_EXPERIMENT_HPP
