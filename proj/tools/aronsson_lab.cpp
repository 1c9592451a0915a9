#include <aronsson/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace aronsson;

namespace {

struct Common {
  std::string hamiltonian = "quad";
  std::string domain = "-1,1,-1,1";
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--hamiltonian", c.hamiltonian, "quad[:a11,a12,a22], quartic, aniso-quartic, maxquad[:a11,a12,a22,b11,b12,b22] or sampled:<csv>");
  cmd->add_option("--domain", c.domain, "x0,x1,y0,y1");
}

void print(const json &j) { std::cout << j.dump(2) << '\n'; }

Vec2 parse_point(const std::string &s) {
  const auto v = detail::parse_number_list("--value", s);
  if (v.size() != 2) fail(ErrorKind::validation, "--value: expected x,y");
  return {v[0], v[1]};
}

// solve ---------------------------------------------------------------------

struct SolveArgs {
  Common common;
  std::string boundary = "aronsson";
  int n = 33;
  std::string eps = "0.1";
  std::string delta;
  std::string out = "solve_out";
};

int cmd_solve(const SolveArgs &a) {
  ExperimentConfig c;
  c.hamiltonian = a.common.hamiltonian;
  c.boundary = a.boundary;
  c.domain = parse_domain(a.common.domain);
  c.grid_sizes = {a.n};
  c.eps_ladder = detail::parse_number_list("--eps", a.eps);
  c.delta_ladder = detail::parse_number_list("--delta", a.delta);
  c.diagnostics.clear();
  c.output_prefix = a.out;
  const RunOutcome r = run(c);
  if (r.error) std::cerr << "error: " << r.error->what() << '\n';
  print({{"manifest", r.manifest.string()}, {"exit_code", r.exit_code}, {"files", r.files}});
  return r.exit_code;
}

// identities ----------------------------------------------------------------

struct IdentityArgs {
  Common common;
  std::string function = "sinsin";
  std::string ids = "lemma21,lemma22,fund1,fund2,fund5,fund6";
  int points = 100;
  std::uint64_t seed = 1;
  int grid = 0;
  std::string u;
  double eps = 0.0;
};

int cmd_identities(const IdentityArgs &a) {
  const Hamiltonian H = hamiltonian_from_name(a.common.hamiltonian);
  json out = json::array();
  if (!a.u.empty()) {
    if (!(a.eps > 0.0)) fail(ErrorKind::validation, "--eps: the solved-field identity needs eps > 0");
    json r = to_json(check_thm23(H, read_csv(a.u), a.eps));
    r["eps"] = a.eps;
    out.push_back(r);
    print(out);
    return 0;
  }
  const TestFn v = testfn_from_name(a.function);
  const auto pts = random_points(v, static_cast<std::size_t>(a.points), a.seed);
  const Rect domain = parse_domain(a.common.domain);
  for (const auto &name : detail::split_list(a.ids)) {
    const IdentityId id = identity_from_string(name);
    json r = a.grid > 0 ? to_json(check_grid_refined(id, H, v, domain, a.grid)) : to_json(check_closed_form(id, H, v, pts));
    r["test_function"] = a.function;
    r["mode"] = a.grid > 0 ? "grid" : "closed_form";
    out.push_back(r);
  }
  print(out);
  return 0;
}

// diagnose ------------------------------------------------------------------

struct DiagnoseArgs {
  Common common;
  std::vector<std::string> u;
  std::string eps;
};

int cmd_diagnose(const DiagnoseArgs &a) {
  const Hamiltonian H = hamiltonian_from_name(a.common.hamiltonian);
  const auto eps = detail::parse_number_list("--eps", a.eps);
  if (eps.size() != a.u.size()) fail(ErrorKind::validation, "--eps: give one eps per --u file");
  require_decreasing_ladder(eps, "--eps");
  ContinuationResult run;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    SolveResult r;
    r.u = read_csv(a.u[k]);
    r.eps = eps[k];
    if (!run.results.empty() && !(r.u.grid() == run.results.front().u.grid()))
      fail(ErrorKind::validation, "--u: all files must share one grid");
    run.results.push_back(std::move(r));
  }
  print(estimate_reports(H, run, run.results.front().u.grid().box()));
  return 0;
}

// cones ---------------------------------------------------------------------

struct ConeArgs {
  Common common;
  double a = 1.0;
  std::string value, check, mcshane, table, out;
  double L = -1.0;
  int trials = 200;
  std::uint64_t seed = 7;
  double eps_slack = 0.0;
};

int cmd_cones(const ConeArgs &a) {
  const Hamiltonian H = hamiltonian_from_name(a.common.hamiltonian);
  if (!(a.a >= 0.0)) fail(ErrorKind::validation, "--a: level must be nonnegative");
  json out;
  out["hamiltonian"] = H.name();
  out["a"] = a.a;
  if (!a.table.empty()) {
    write_text(a.table, ConeFunction(H, a.a).boundary_csv());
    out["table"] = a.table;
  }
  if (!a.value.empty()) {
    const Vec2 x = parse_point(a.value);
    out["x"] = {x.x, x.y};
    out["value"] = cone_value(H, a.a, x);
  }
  if (!a.check.empty()) {
    const GridFunction u = read_csv(a.check);
    ComparisonOptions opt;
    opt.seed = a.seed;
    opt.eps_slack = a.eps_slack;
    out["comparison"] = to_json(comparison_with_cones(u, H, a.trials, opt));
    LipschitzOptions lo;
    lo.seed = a.seed;
    out["lipschitz_characterization"] = to_json(lipschitz_characterization(u, H, a.a, lo));
  }
  if (!a.mcshane.empty()) {
    if (!(a.L >= 0.0)) fail(ErrorKind::validation, "--L: give a nonnegative Lipschitz constant with --mcshane");
    const GridFunction b = read_csv(a.mcshane);
    const GridFunction v = mcshane_extend(b, a.L);
    if (!a.out.empty()) {
      write_csv(v, a.out);
      out["extension"] = a.out;
    }
    out["lipschitz_bound"] = to_json(lipschitz_bound_check(v, H, a.L));
  }
  print(out);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Experiments with exponential approximations of absolute minimizers"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto *s = app.add_subcommand("solve", "Solve along an eps ladder on one grid");
  add_common(s, solve.common);
  s->add_option("--boundary", solve.boundary, "aronsson, zero, linear:a,b[,c] or a grid CSV");
  s->add_option("--n", solve.n, "Nodes per direction (odd)");
  s->add_option("--eps", solve.eps, "Strictly decreasing eps ladder");
  s->add_option("--delta", solve.delta, "Optional strictly decreasing mollification ladder");
  s->add_option("--out", solve.out, "Output directory");

  IdentityArgs ident;
  auto *i = app.add_subcommand("identities", "Check the pointwise and divergence identities");
  add_common(i, ident.common);
  i->add_option("--function", ident.function, "Test function: quadratic, sinsin, saddle, xy, aronsson, linear");
  i->add_option("--ids", ident.ids, "Comma separated identity names");
  i->add_option("--points", ident.points, "Random points (closed-form mode)");
  i->add_option("--seed", ident.seed);
  i->add_option("--grid", ident.grid, "Grid mode on n and 2n-1 nodes");
  i->add_option("--u", ident.u, "Solved field CSV for the solved-field identity");
  i->add_option("--eps", ident.eps, "eps of the solved field");

  DiagnoseArgs diag;
  auto *d = app.add_subcommand("diagnose", "Estimate reports for solved fields");
  add_common(d, diag.common);
  d->add_option("--u", diag.u, "Solved field CSV, repeat for a ladder")->required();
  d->add_option("--eps", diag.eps, "eps of each --u, decreasing")->required();

  ConeArgs cone;
  auto *c = app.add_subcommand("cones", "Cone functions, comparison and McShane extension");
  add_common(c, cone.common);
  c->add_option("--a", cone.a, "Cone level")->required();
  c->add_option("--value", cone.value, "Evaluate C_a at x,y");
  c->add_option("--check-solution", cone.check, "Run comparison trials on a grid CSV");
  c->add_option("--mcshane", cone.mcshane, "Boundary grid CSV to extend");
  c->add_option("--L", cone.L, "Lipschitz constant of the extension");
  c->add_option("--out", cone.out, "Where to write the extension");
  c->add_option("--table", cone.table, "Write the sublevel boundary radii to a CSV");
  c->add_option("--trials", cone.trials);
  c->add_option("--seed", cone.seed);
  c->add_option("--eps-slack", cone.eps_slack);

  std::string config;
  auto *r = app.add_subcommand("run", "Run the full pipeline from a config file");
  r->add_option("--config", config, "INI config")->required();

  std::string prefix;
  auto *p = app.add_subcommand("emit-plots", "Write plot tables from a finished run");
  p->add_option("--prefix", prefix, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*i) return cmd_identities(ident);
    if (*d) return cmd_diagnose(diag);
    if (*c) return cmd_cones(cone);
    if (*r) {
      const RunOutcome out = run(load_config(config));
      if (out.error) std::cerr << "error: " << out.error->what() << '\n';
      std::cout << out.manifest.string() << '\n';
      return out.exit_code;
    }
    if (*p) {
      for (const auto &f : emit_plots(prefix)) std::cout << f << '\n';
      return 0;
    }
  } catch (const Error &e) {
    std::cerr << "error (" << Error::kind_name(e.kind()) << "): " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error &e) {
    std::cerr << "error (io): " << e.what() << '\n';
    return 4;
  }
  return 0;
}
