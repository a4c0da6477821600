#ifndef KSTAB_ROBUSTNESS_HPP
#define KSTAB_ROBUSTNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "kstab/erm.hpp"

namespace kstab {

// round-trip-exact float formatting used by every report writer
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ExperimentConfig {
  DiscreteDistribution ground_truth;
  std::optional<DiscreteDistribution> contaminated;  // explicit Q
  PerturbMode mode = PerturbMode::shift_y;           // else perturb(P, ...)
  double magnitude = 0.0;
  ErmConfig erm;
  std::vector<std::size_t> n_grid = {20};
  std::size_t replications = 100;
  bool use_schedule = false;  // lambda_N = sched_c * N^sched_power
  double sched_c = 0.5;
  double sched_power = -0.5;
  std::uint64_t seed = 1;
  double p = 2.0;  // metric order

  void validate() const {
    ground_truth.validate();
    if (contaminated) contaminated->validate();
    erm.validate();
    if (n_grid.empty()) throw std::invalid_argument("experiment: empty N grid");
    for (std::size_t n : n_grid)
      if (n < 1) throw std::invalid_argument("experiment: N must be >= 1");
    if (replications < 1)
      throw std::invalid_argument("experiment: M must be >= 1");
    if (p < 1.0) throw std::invalid_argument("experiment: p must be >= 1");
    for (std::size_t n : n_grid)
      if (lambda_for(n) < 0.0)
        throw std::invalid_argument("experiment: lambda_N must be >= 0");
  }

  double lambda_for(std::size_t n) const {
    if (!use_schedule) return erm.lambda;
    return sched_c * std::pow(static_cast<double>(n), sched_power);
  }

  DiscreteDistribution q() const {
    if (contaminated) return *contaminated;
    return perturb(ground_truth, mode, magnitude, rng::derive(seed, 7001));
  }
};

// Law of the optimal value: M atoms, one per replication.
struct LawEstimate {
  DiscreteDistribution law;
  std::string source;
  std::size_t n = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
};

// M replications; replication j draws sample j from the stream keyed by
// (seed, j), so results are independent of execution order.
inline LawEstimate law_of_estimator(const DiscreteDistribution& dist,
                                    const ExperimentConfig& cfg, std::size_t n,
                                    double lambda_n,
                                    std::uint64_t seed_override = 0) {
  cfg.validate();
  const std::uint64_t seed = seed_override ? seed_override : cfg.seed;
  ErmConfig ecfg = cfg.erm;
  ecfg.lambda = lambda_n;
  std::vector<double> values;
  values.reserve(cfg.replications);
  std::size_t failures = 0;
  for (std::size_t j = 0; j < cfg.replications; ++j) {
    try {
      const auto pts = sample(dist, n, seed, j);
      values.push_back(solve(empirical(pts), ecfg).objective);
    } catch (const std::exception&) {
      ++failures;
    }
  }
  if (values.empty())
    throw std::runtime_error("law_of_estimator: all replications failed");
  std::vector<Point> atoms;
  atoms.reserve(values.size());
  for (double v : values) atoms.emplace_back(v);
  LawEstimate out;
  out.law = DiscreteDistribution(
      std::move(atoms),
      std::vector<double>(values.size(), 1.0 / static_cast<double>(values.size())));
  out.n = n;
  out.lambda = lambda_n;
  out.seed = seed;
  out.failures = failures;
  return out;
}

struct RobustnessReport {
  std::string experiment;
  double measured = 0.0;
  double bound = 0.0;
  double se = 0.0;
  std::string channel;
  std::string verdict;  // pass | fail | inconclusive
  std::vector<std::pair<std::string, std::string>> echo;
};

inline void write_report_csv(const RobustnessReport& r, std::ostream& os) {
  os << "experiment,param,value\n";
  os << r.experiment << ",measured," << fmt17(r.measured) << "\n";
  os << r.experiment << ",bound," << fmt17(r.bound) << "\n";
  os << r.experiment << ",se," << fmt17(r.se) << "\n";
  os << r.experiment << ",channel," << r.channel << "\n";
  os << r.experiment << ",verdict," << r.verdict << "\n";
  for (const auto& [k, v] : r.echo)
    os << r.experiment << "," << k << "," << v << "\n";
}

namespace detail {

inline std::vector<double> law_values(const LawEstimate& le) {
  std::vector<double> v;
  v.reserve(le.law.size());
  for (const Point& z : le.law.atoms()) v.push_back(z.y);
  std::sort(v.begin(), v.end());
  return v;
}

// W1 between two equal-weight scalar samples = mean |sorted gap|
inline double w1_sorted(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("w1_sorted: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// bootstrap SE of the W1 estimate from B paired resamples
inline double bootstrap_se_w1(const std::vector<double>& a,
                              const std::vector<double>& b,
                              std::uint64_t seed, std::size_t B = 200) {
  const std::size_t m = a.size();
  std::vector<double> vals(B);
  std::vector<double> ra(m), rb(m);
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t i = 0; i < m; ++i) {
      ra[i] = a[static_cast<std::size_t>(rng::uniform(seed, 2 * bi, i) * m) % m];
      rb[i] = b[static_cast<std::size_t>(rng::uniform(seed, 2 * bi + 1, i) * m) % m];
    }
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    vals[bi] = w1_sorted(ra, rb);
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(B);
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(B - 1));
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

// W1 distance between the laws of the optimal value under P^N and Q^N,
// versus the Fortet-Mourier bound constant * zeta_p(P, Q).
inline RobustnessReport check_quantitative(const ExperimentConfig& cfg) {
  cfg.validate();
  const LipschitzProfile prof =
      lipschitz_profile(cfg.erm.loss, cfg.erm.kernel, cfg.erm.beta);
  const DiscreteDistribution P = cfg.ground_truth;
  const DiscreteDistribution Q = cfg.q();
  const std::size_t N = cfg.n_grid.front();
  const double lam = cfg.lambda_for(N);

  const LawEstimate lp = law_of_estimator(P, cfg, N, lam);
  const LawEstimate lq = law_of_estimator(Q, cfg, N, lam);
  const auto va = detail::law_values(lp);
  const auto vb = detail::law_values(lq);
  const double measured = detail::w1_sorted(va, vb);
  const double se =
      detail::bootstrap_se_w1(va, vb, rng::derive(cfg.seed, 17));

  const ZetaEstimate zeta = zeta_p(P, Q, prof.order);
  const double upper = prof.constant * zeta.best_upper();
  const double lower_or_exact =
      prof.constant * (zeta.exact ? *zeta.exact : zeta.best_lower());

  RobustnessReport r;
  r.experiment = "quantitative";
  r.measured = measured;
  r.se = se;
  if (zeta.exact) {
    r.bound = prof.constant * *zeta.exact;
    r.channel = zeta.exact_channel;
  } else {
    r.bound = upper;
    r.channel = "upper";
  }
  if (measured <= lower_or_exact + 3.0 * se)
    r.verdict = "pass";
  else if (measured > upper + 3.0 * se)
    r.verdict = "fail";
  else
    r.verdict = "inconclusive";
  r.echo = {{"N", std::to_string(N)},
            {"M", std::to_string(cfg.replications)},
            {"lambda_N", fmt17(lam)},
            {"p", fmt17(prof.order)},
            {"constant", fmt17(prof.constant)},
            {"zeta_upper", fmt17(zeta.best_upper())},
            {"zeta_lower", fmt17(zeta.best_lower())},
            {"seed", std::to_string(cfg.seed)},
            {"failures",
             std::to_string(lp.failures + lq.failures)}};
  return r;
}

// Empirical shape of qualitative robustness: if d_phi(P,Q) <= delta then
// the Prokhorov distance between the two laws should be <= eps. Also
// echoes the regularization side condition lambda_N <= eps / (6 beta^2).
inline RobustnessReport check_qualitative(const ExperimentConfig& cfg,
                                          double delta, double eps) {
  cfg.validate();
  if (delta <= 0.0 || eps <= 0.0)
    throw std::invalid_argument("check_qualitative: delta, eps must be > 0");
  const DiscreteDistribution P = cfg.ground_truth;
  const DiscreteDistribution Q = cfg.q();
  const GaugeSpec gauge{cfg.erm.loss, cfg.erm.kernel, cfg.erm.beta};
  const double dphi = d_phi(P, Q, gauge, cfg.p);
  const std::size_t N = cfg.n_grid.front();
  const double lam = cfg.lambda_for(N);
  const bool side_ok = lam <= eps / (6.0 * cfg.erm.beta * cfg.erm.beta);

  RobustnessReport r;
  r.experiment = "qualitative";
  r.bound = eps;
  r.channel = "prokhorov";
  r.echo = {{"N", std::to_string(N)},
            {"M", std::to_string(cfg.replications)},
            {"lambda_N", fmt17(lam)},
            {"delta", fmt17(delta)},
            {"eps", fmt17(eps)},
            {"d_phi", fmt17(dphi)},
            {"side_condition_ok", side_ok ? "1" : "0"},
            {"seed", std::to_string(cfg.seed)}};
  if (dphi > delta) {
    // premise fails: the implication is vacuous
    r.measured = dphi;
    r.verdict = "pass";
    r.echo.emplace_back("premise", "vacuous");
    return r;
  }
  const LawEstimate lp = law_of_estimator(P, cfg, N, lam);
  const LawEstimate lq = law_of_estimator(Q, cfg, N, lam);
  r.measured = prokhorov(lp.law, lq.law);
  r.verdict = r.measured <= eps ? "pass" : "fail";
  r.echo.emplace_back("premise", "holds");
  return r;
}

// One row of a curves CSV; nan columns render empty.
struct CurveRow {
  double n = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double p90 = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double measured = std::numeric_limits<double>::quiet_NaN();
  std::string verdict;
};

inline void write_curves_csv(const std::vector<CurveRow>& rows,
                             std::ostream& os) {
  os << "N,t,median,p90,bound,measured,verdict\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt17(v); };
  for (const CurveRow& r : rows)
    os << cell(r.n) << "," << cell(r.t) << "," << cell(r.median) << ","
       << cell(r.p90) << "," << cell(r.bound) << "," << cell(r.measured) << ","
       << r.verdict << "\n";
}

struct StabilityRow {
  double t = 0.0;
  double theta = 0.0;     // exact optimal value at Q_t
  double dphi = 0.0;      // d_phi(Q_t, P)
  double deviation = 0.0; // |theta(Q_t) - theta(P)|
  double bound = 0.0;     // t * (phi-moment of P + phi-moment of H)
};

// Exact optimal values along the contamination path Q_t = (1-t) P + t H,
// solved with lambda = 0 on the ball (finite support, exact).
inline std::vector<StabilityRow> stability_curve(
    const DiscreteDistribution& P, const DiscreteDistribution& H,
    std::vector<double> t_grid, const ExperimentConfig& cfg) {
  cfg.validate();
  std::sort(t_grid.begin(), t_grid.end());
  ErmConfig ecfg = cfg.erm;
  ecfg.lambda = 0.0;
  const double theta_p = solve(P, ecfg).objective;
  const GaugeSpec gauge{cfg.erm.loss, cfg.erm.kernel, cfg.erm.beta};
  const double phi_sum = moment(P, gauge, 1.0) + moment(H, gauge, 1.0);
  std::vector<StabilityRow> rows;
  for (double t : t_grid) {
    if (t < 0.0 || t > 1.0)
      throw std::invalid_argument("stability_curve: t must be in [0,1]");
    const DiscreteDistribution Qt = mix(P, H, t);
    StabilityRow r;
    r.t = t;
    r.theta = solve(Qt, ecfg).objective;
    r.dphi = t == 0.0 ? 0.0 : d_phi(Qt, P, gauge, cfg.p);
    r.deviation = std::abs(r.theta - theta_p);
    r.bound = t * phi_sum;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<CurveRow> stability_rows(
    const std::vector<StabilityRow>& stab) {
  std::vector<CurveRow> rows;
  for (const StabilityRow& s : stab) {
    CurveRow r;
    r.t = s.t;
    r.median = s.theta;
    r.p90 = s.dphi;
    r.bound = s.bound;
    r.measured = s.deviation;
    r.verdict = s.deviation <= s.bound + 1e-12 ? "pass" : "fail";
    rows.push_back(r);
  }
  return rows;
}

struct ConsistencyReport {
  struct Row {
    std::size_t n = 0;
    double lambda = 0.0;
    double median = 0.0;
    double p90 = 0.0;
    double exceed_freq = 0.0;  // fraction of replications with deviation >= delta
  };
  std::vector<Row> rows;
  double theta_true = 0.0;
  double delta = 0.0;      // deviation threshold of the tail fit
  double gamma_hat = 0.0;  // fitted exponential rate
  double alpha_hat = 0.0;  // fitted prefactor
  double fit_residual = std::numeric_limits<double>::quiet_NaN();
  std::size_t fit_points = 0;
};

// Deviation quantiles of |theta_hat(P_N, lambda_N) - theta(P)| along the N
// grid, plus a least-squares exponential-tail fit of the exceedance
// frequencies: log freq(N) ~ log(alpha) - gamma N.
inline ConsistencyReport consistency_curve(const DiscreteDistribution& P,
                                           const ExperimentConfig& cfg,
                                           double delta = 0.05) {
  cfg.validate();
  if (delta <= 0.0)
    throw std::invalid_argument("consistency_curve: delta must be > 0");
  ErmConfig exact = cfg.erm;
  exact.lambda = 0.0;
  ConsistencyReport rep;
  rep.theta_true = solve(P, exact).objective;
  rep.delta = delta;
  for (std::size_t n : cfg.n_grid) {
    const double lam = cfg.lambda_for(n);
    const LawEstimate le = law_of_estimator(
        P, cfg, n, lam, rng::derive(cfg.seed, static_cast<std::uint64_t>(n)));
    std::vector<double> dev;
    dev.reserve(le.law.size());
    std::size_t exceed = 0;
    for (const Point& z : le.law.atoms()) {
      const double d = std::abs(z.y - rep.theta_true);
      dev.push_back(d);
      if (d >= delta) ++exceed;
    }
    ConsistencyReport::Row row;
    row.n = n;
    row.lambda = lam;
    row.median = detail::quantile(dev, 0.5);
    row.p90 = detail::quantile(dev, 0.9);
    row.exceed_freq =
        static_cast<double>(exceed) / static_cast<double>(dev.size());
    rep.rows.push_back(row);
  }
  // least-squares line through (N, log freq) over the strictly positive
  // frequencies; needs at least two points
  std::vector<double> xs, ys;
  for (const auto& r : rep.rows)
    if (r.exceed_freq > 0.0) {
      xs.push_back(static_cast<double>(r.n));
      ys.push_back(std::log(r.exceed_freq));
    }
  rep.fit_points = xs.size();
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    rep.gamma_hat = -slope;
    rep.alpha_hat = std::exp(icept);
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = ys[i] - (icept + slope * xs[i]);
      rss += e * e;
    }
    rep.fit_residual = std::sqrt(rss / n);
  }
  return rep;
}

// Worst case of the per-N medians/p90s over a finite family of ground
// truths (each compared to its own exact value).
inline ConsistencyReport consistency_uniform(
    const std::vector<DiscreteDistribution>& family,
    const ExperimentConfig& cfg, double delta = 0.05) {
  if (family.empty())
    throw std::invalid_argument("consistency_uniform: empty family");
  ConsistencyReport worst;
  for (std::size_t k = 0; k < family.size(); ++k) {
    ExperimentConfig c = cfg;
    c.seed = rng::derive(cfg.seed, 100 + k);
    const ConsistencyReport rep = consistency_curve(family[k], c, delta);
    if (k == 0) {
      worst = rep;
      continue;
    }
    for (std::size_t i = 0; i < worst.rows.size(); ++i) {
      worst.rows[i].median = std::max(worst.rows[i].median, rep.rows[i].median);
      worst.rows[i].p90 = std::max(worst.rows[i].p90, rep.rows[i].p90);
      worst.rows[i].exceed_freq =
          std::max(worst.rows[i].exceed_freq, rep.rows[i].exceed_freq);
    }
  }
  return worst;
}

inline std::vector<CurveRow> consistency_rows(const ConsistencyReport& rep) {
  std::vector<CurveRow> rows;
  for (const auto& r : rep.rows) {
    CurveRow c;
    c.n = static_cast<double>(r.n);
    c.median = r.median;
    c.p90 = r.p90;
    c.measured = r.exceed_freq;
    rows.push_back(c);
  }
  return rows;
}

// Per-replication check of the solution bound
// ||f(P_N) - f(Q_N)||_k <= sqrt((3/alpha) E_{P_N x Q_N}[c_p ||z - z'||])
// with strong-convexity modulus alpha = 2 lambda_N. Samples are coupled
// by replication index (identical uniform streams).
inline RobustnessReport solution_stability(const DiscreteDistribution& P,
                                           const DiscreteDistribution& Q,
                                           const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.erm.loss.family != LossFamily::squared)
    throw std::invalid_argument(
        "solution_stability: strongly convex (squared) loss required");
  const std::size_t N = cfg.n_grid.front();
  const double lam = cfg.lambda_for(N);
  if (lam <= 0.0)
    throw std::invalid_argument("solution_stability: lambda_N must be > 0");
  const double alpha = 2.0 * lam;
  ErmConfig ecfg = cfg.erm;
  ecfg.lambda = lam;

  std::size_t satisfied = 0;
  double max_ratio = 0.0;
  double max_dist = 0.0;
  for (std::size_t j = 0; j < cfg.replications; ++j) {
    const auto sp = sample(P, N, cfg.seed, j);
    const auto sq = sample(Q, N, cfg.seed, j);
    const ErmSolution fp = solve(empirical(sp), ecfg);
    const ErmSolution fq = solve(empirical(sq), ecfg);
    const double dist = solution_distance(fp, fq, cfg.erm.kernel);
    double coupling = 0.0;
    for (const Point& za : sp)
      for (const Point& zb : sq)
        coupling += fm_cost_weight(za, zb, cfg.p) * point_distance(za, zb);
    coupling /= static_cast<double>(N) * static_cast<double>(N);
    const double bound = std::sqrt(3.0 / alpha * coupling);
    max_dist = std::max(max_dist, dist);
    if (dist <= bound + 1e-12) {
      ++satisfied;
    }
    if (bound > 0.0) max_ratio = std::max(max_ratio, dist / bound);
  }

  RobustnessReport r;
  r.experiment = "solution_stability";
  r.measured =
      static_cast<double>(satisfied) / static_cast<double>(cfg.replications);
  r.bound = 1.0;
  r.channel = "product_coupling";
  r.verdict = satisfied == cfg.replications ? "pass" : "fail";
  r.echo = {{"N", std::to_string(N)},
            {"M", std::to_string(cfg.replications)},
            {"lambda_N", fmt17(lam)},
            {"alpha", fmt17(alpha)},
            {"p", fmt17(cfg.p)},
            {"max_ratio", fmt17(max_ratio)},
            {"max_distance", fmt17(max_dist)},
            {"seed", std::to_string(cfg.seed)}};
  return r;
}

}  // namespace kstab

#endif  // KSTAB_ROBUSTNESS_HPP
