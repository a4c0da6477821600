#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kstab/config.hpp"

namespace fs = std::filesystem;
using namespace kstab;

namespace {

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("KSTAB_OUTPUT_DIR")) return env;
  return ".";
}

Vector parse_vector(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
  Vector x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    x(static_cast<Eigen::Index>(i)) = v[i];
  return x;
}

int run_kernel(const std::string& family, double gamma, int degree, double a,
               double b, const std::string& xs, const std::string& ys,
               double radius, double t) {
  KernelSpec spec;
  spec.family = kernel_family_from_string(family);
  spec.gamma = gamma;
  spec.degree = degree;
  spec.a = a;
  spec.b = b;
  const Vector x = parse_vector(xs);
  const Vector y = parse_vector(ys);
  spec.input_dim = static_cast<int>(x.size());
  spec.validate();
  std::cout << "k(x,y)," << fmt17(kernel_eval(spec, x, y)) << "\n";
  std::optional<double> rad;
  if (radius > 0.0) rad = radius;
  const GrowthProfile g = growth_profile(spec, rad);
  const char* kind = "?";
  switch (g.kind) {
    case GrowthKind::linear_rate: kind = "linear_rate"; break;
    case GrowthKind::sqrt_rate: kind = "sqrt_rate"; break;
    case GrowthKind::piecewise: kind = "piecewise"; break;
    case GrowthKind::uncalm: kind = "uncalm"; break;
  }
  std::cout << "growth_kind," << kind << "\n";
  std::cout << "growth_rate," << fmt17(g.rate) << "\n";
  if (g.kind == GrowthKind::piecewise)
    std::cout << "growth_breakpoint," << fmt17(g.breakpoint) << "\n";
  if (t >= 0.0)
    std::cout << "g(" << fmt17(t) << "),"
              << fmt17(growth_function(spec, t, rad)) << "\n";
  if (!g.note.empty()) std::cout << "note," << g.note << "\n";
  return 0;
}

int run_metric(const std::string& pa, const std::string& pb, double p,
               const std::string& kernel_family, double gamma, double beta) {
  const DiscreteDistribution P = load_csv(pa, &std::cerr);
  const DiscreteDistribution Q = load_csv(pb, &std::cerr);
  std::cout << "metric,p,value,lower,upper_ot,upper_product\n";
  if (P.dim() == 0 && Q.dim() == 0) {
    const double w = wasserstein1_1d(P, Q);
    std::cout << "wasserstein1," << fmt17(1.0) << "," << fmt17(w) << ","
              << fmt17(w) << "," << fmt17(w) << "," << fmt17(w) << "\n";
  }
  const double prok = prokhorov(P, Q);
  std::cout << "prokhorov,," << fmt17(prok) << ",,,\n";
  GaugeSpec gauge;
  gauge.kernel.family = kernel_family_from_string(kernel_family);
  gauge.kernel.gamma = gamma;
  gauge.kernel.input_dim = std::max(P.dim(), 1);
  gauge.beta = beta;
  std::cout << "d_phi," << fmt17(p) << ","
            << fmt17(d_phi(P, Q, gauge, p)) << ",,,\n";
  const ZetaEstimate z = zeta_p(P, Q, p);
  std::cout << "zeta," << fmt17(p) << ","
            << (z.exact ? fmt17(*z.exact) : std::string()) << ","
            << fmt17(z.best_lower()) << "," << fmt17(z.upper_ot) << ","
            << fmt17(z.upper_product) << "\n";
  return 0;
}

int run_solve(const std::string& dist_path, const std::string& config_path,
              const std::string& out_flag) {
  const DiscreteDistribution dist = load_csv(dist_path, &std::cerr);
  const ExperimentSpec spec = load_experiment_file(config_path);
  ErmConfig ecfg = spec.cfg.erm;
  const ErmSolution sol = solve(dist, ecfg);

  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "solution.csv");
    f << "anchor_index,alpha\n";
    for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
      f << i << "," << fmt17(sol.alpha(i)) << "\n";
  }
  std::ostringstream summary;
  summary << "objective,risk,reg,norm,iters\n"
          << fmt17(sol.objective) << "," << fmt17(sol.risk_term) << ","
          << fmt17(sol.reg_term) << "," << fmt17(sol.rkhs_norm) << ","
          << sol.iterations << "\n";
  std::ofstream(dir / "summary.csv") << summary.str();
  std::cout << summary.str();
  return 0;
}

int verdict_code(const std::string& v) {
  if (v == "pass") return 0;
  if (v == "fail") return 2;
  return 3;
}

int run_experiment(const std::string& config_path, const std::string& out_flag,
                   std::uint64_t seed_override) {
  ExperimentSpec spec = load_experiment_file(config_path);
  if (seed_override) spec.cfg.seed = seed_override;
  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);

  RobustnessReport report;
  std::vector<CurveRow> curves;
  int code = 0;

  if (spec.kind == "quantitative") {
    report = check_quantitative(spec.cfg);
    code = verdict_code(report.verdict);
  } else if (spec.kind == "qualitative") {
    report = check_qualitative(spec.cfg, spec.delta, spec.eps);
    code = verdict_code(report.verdict);
  } else if (spec.kind == "stability") {
    const auto rows =
        stability_curve(spec.cfg.ground_truth, *spec.mixture, spec.t_grid,
                        spec.cfg);
    curves = stability_rows(rows);
    report.experiment = "stability";
    report.channel = "phi_moment";
    report.verdict = "pass";
    for (const CurveRow& r : curves)
      if (r.verdict == "fail") report.verdict = "fail";
    if (!rows.empty()) {
      report.measured = rows.back().deviation;
      report.bound = rows.back().bound;
    }
    code = verdict_code(report.verdict);
  } else if (spec.kind == "consistency" || spec.kind == "consistency_uniform") {
    const ConsistencyReport rep =
        spec.kind == "consistency"
            ? consistency_curve(spec.cfg.ground_truth, spec.cfg, spec.delta)
            : consistency_uniform(spec.family, spec.cfg, spec.delta);
    curves = consistency_rows(rep);
    report.experiment = spec.kind;
    report.channel = "deviation_quantiles";
    report.verdict = "pass";
    report.measured = rep.rows.empty() ? 0.0 : rep.rows.back().median;
    report.echo = {{"theta_true", fmt17(rep.theta_true)},
                   {"delta", fmt17(rep.delta)},
                   {"gamma_hat", fmt17(rep.gamma_hat)},
                   {"alpha_hat", fmt17(rep.alpha_hat)},
                   {"fit_residual", fmt17(rep.fit_residual)},
                   {"fit_points", std::to_string(rep.fit_points)}};
  } else if (spec.kind == "solution") {
    report = solution_stability(spec.cfg.ground_truth, spec.cfg.q(), spec.cfg);
    code = verdict_code(report.verdict);
  } else {
    std::cerr << "unknown experiment kind: " << spec.kind << "\n";
    return 1;
  }

  {
    std::ofstream f(dir / "report.csv");
    write_report_csv(report, f);
  }
  if (!curves.empty()) {
    std::ofstream f(dir / "curves.csv");
    write_curves_csv(curves, f);
  }
  std::cout << report.experiment << " verdict: " << report.verdict << "\n";
  return code;
}

int run_report(const std::string& curves_path, const std::string& out_flag) {
  std::ifstream f(curves_path);
  if (!f) {
    std::cerr << "cannot read " << curves_path << "\n";
    return 1;
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 7) cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) {
    std::cerr << "empty curves file\n";
    return 1;
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      std::cout << std::setw(static_cast<int>(width[i]) + 2) << r[i];
    std::cout << "\n";
  }
  // gnuplot-compatible copy: whitespace-separated, empty cells as nan,
  // numeric strings passed through untouched
  const fs::path dir = output_dir(out_flag);
  fs::create_directories(dir);
  std::ofstream dat(dir / "curves.dat");
  dat << "#";
  for (const auto& c : rows[0]) dat << " " << c;
  dat << "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) dat << " ";
      dat << (rows[r][i].empty() ? "nan" : rows[r][i]);
    }
    dat << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel ERM stability and robustness toolkit"};
  app.require_subcommand(1);

  auto* kernel = app.add_subcommand("kernel", "evaluate a kernel and its growth profile");
  std::string kfamily = "gaussian", kx = "0", ky = "0";
  double kgamma = 1.0, ka = 1.0, kb = 1.0, kradius = 0.0, kt = -1.0;
  int kdegree = 1;
  kernel->add_option("--family", kfamily, "kernel family");
  kernel->add_option("--gamma", kgamma, "scale parameter");
  kernel->add_option("--degree", kdegree, "polynomial degree");
  kernel->add_option("--a", ka, "sigmoid slope");
  kernel->add_option("--b", kb, "sigmoid offset");
  kernel->add_option("--x", kx, "first input, comma-separated");
  kernel->add_option("--y", ky, "second input, comma-separated");
  kernel->add_option("--radius", kradius, "domain radius for the growth profile");
  kernel->add_option("--t", kt, "evaluate the growth function at t");

  auto* metric = app.add_subcommand("metric", "distances between two distribution CSVs");
  std::string ma, mb, mkernel = "gaussian";
  double mp = 2.0, mgamma = 1.0, mbeta = 10.0;
  metric->add_option("first", ma, "first distribution CSV")->required()->check(CLI::ExistingFile);
  metric->add_option("second", mb, "second distribution CSV")->required()->check(CLI::ExistingFile);
  metric->add_option("--p", mp, "metric order p");
  metric->add_option("--kernel", mkernel, "gauge kernel family");
  metric->add_option("--gamma", mgamma, "gauge kernel scale");
  metric->add_option("--beta", mbeta, "hypothesis ball radius");

  auto* solve_cmd = app.add_subcommand("solve", "regularized ERM on a distribution CSV");
  std::string sdist, sconfig, sout;
  solve_cmd->add_option("dist", sdist, "distribution CSV")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--config", sconfig, "experiment config JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", sout, "output directory");

  auto* experiment = app.add_subcommand("experiment", "run a robustness/consistency experiment");
  std::string econfig, eout;
  std::uint64_t eseed = 0;
  experiment->add_option("--config", econfig, "experiment config JSON")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out", eout, "output directory");
  experiment->add_option("--seed", eseed, "master seed override");

  auto* report = app.add_subcommand("report", "render a curves CSV");
  std::string rcurves, rout;
  report->add_option("curves", rcurves, "curves CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--out", rout, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage errors exit 1 regardless of the parser's own code
  }

  try {
    if (kernel->parsed())
      return run_kernel(kfamily, kgamma, kdegree, ka, kb, kx, ky, kradius, kt);
    if (metric->parsed()) return run_metric(ma, mb, mp, mkernel, mgamma, mbeta);
    if (solve_cmd->parsed()) return run_solve(sdist, sconfig, sout);
    if (experiment->parsed()) return run_experiment(econfig, eout, eseed);
    if (report->parsed()) return run_report(rcurves, rout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
