#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "kstab/robustness.hpp"

using namespace kstab;

namespace {

Point pt(double x, double y) {
  Vector v(1);
  v << x;
  return Point(v, y);
}

DiscreteDistribution reference_p() {
  return DiscreteDistribution(
      {pt(-0.6, -0.3), pt(-0.2, -0.1), pt(0.1, 0.05), pt(0.1, 0.25),
       pt(0.5, 0.25)},
      {0.2, 0.2, 0.2, 0.2, 0.2});
}

DiscreteDistribution shift_y(const DiscreteDistribution& P, double dy) {
  std::vector<Point> atoms = P.atoms();
  for (Point& z : atoms) z.y += dy;
  return DiscreteDistribution(std::move(atoms),
                              std::vector<double>(P.weights()));
}

ExperimentConfig base_cfg() {
  ExperimentConfig c;
  c.ground_truth = reference_p();
  c.erm.kernel = KernelSpec{KernelFamily::gaussian, 0.125, 1, 1.0, 1.0, 1};
  c.erm.loss.family = LossFamily::squared;
  c.erm.lambda = 0.1;
  c.erm.beta = 10.0;
  c.n_grid = {20};
  c.replications = 50;
  c.seed = 42;
  c.p = 2.0;
  return c;
}

}  // namespace

TEST_CASE("law_of_estimator basics") {
  auto cfg = base_cfg();
  SUBCASE("dirac ground truth gives a constant law") {
    cfg.ground_truth = DiscreteDistribution({pt(0.0, 1.0)}, {1.0});
    cfg.replications = 8;
    const auto le = law_of_estimator(cfg.ground_truth, cfg, 5, 0.5);
    REQUIRE(le.law.size() == 8);
    for (const Point& z : le.law.atoms())
      CHECK(z.y == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(le.failures == 0);
  }
  SUBCASE("M = 1 single-atom law") {
    cfg.replications = 1;
    const auto le = law_of_estimator(cfg.ground_truth, cfg, 10, 0.1);
    CHECK(le.law.size() == 1);
    CHECK(le.law.weights()[0] == 1.0);
  }
  SUBCASE("replication values are order-independent") {
    cfg.replications = 6;
    const auto le = law_of_estimator(cfg.ground_truth, cfg, 12, 0.1);
    // recompute replication 4 in isolation: same (seed, stream) -> same value
    ErmConfig ecfg = cfg.erm;
    ecfg.lambda = 0.1;
    const auto pts = sample(cfg.ground_truth, 12, cfg.seed, 4);
    CHECK(solve(empirical(pts), ecfg).objective ==
          le.law.atoms()[4].y);
  }
  SUBCASE("within-replication permutation leaves the estimate unchanged") {
    ErmConfig ecfg = cfg.erm;
    auto pts = sample(cfg.ground_truth, 15, cfg.seed, 0);
    const double v1 = solve(empirical(pts), ecfg).objective;
    std::rotate(pts.begin(), pts.begin() + 7, pts.end());
    std::swap(pts[0], pts[3]);
    CHECK(solve(empirical(pts), ecfg).objective ==
          doctest::Approx(v1).epsilon(1e-12));
  }
}

TEST_CASE("check_quantitative") {
  SUBCASE("identical measures pass with a zero bound") {
    auto cfg = base_cfg();
    cfg.contaminated = reference_p();
    const auto r = check_quantitative(cfg);
    CHECK(r.verdict == "pass");
    CHECK(r.bound == doctest::Approx(0.0));
    CHECK(r.measured == doctest::Approx(0.0));
  }
  SUBCASE("reference pair: verdict pass, channel exact") {
    auto cfg = base_cfg();
    cfg.contaminated = shift_y(reference_p(), 0.05);
    cfg.replications = 200;
    const auto r = check_quantitative(cfg);
    CHECK(r.verdict == "pass");
    CHECK(r.channel == "unit_ball");
    CHECK(r.measured <= r.bound + 3.0 * r.se);
  }
  SUBCASE("deterministic dirac pair: forced couplings on both sides") {
    auto cfg = base_cfg();
    cfg.ground_truth = DiscreteDistribution({pt(0.1, 0.4)}, {1.0});
    cfg.contaminated = DiscreteDistribution({pt(0.1, 0.6)}, {1.0});
    cfg.replications = 4;
    cfg.n_grid = {6};
    const auto r = check_quantitative(cfg);
    // both laws are single points; measured = |theta_a - theta_b| exactly
    ErmConfig ecfg = cfg.erm;
    const double ta = solve(cfg.ground_truth, ecfg).objective;
    const double tb = solve(*cfg.contaminated, ecfg).objective;
    CHECK(r.measured == doctest::Approx(std::abs(ta - tb)).epsilon(1e-12));
    CHECK(r.verdict == "pass");
  }
  SUBCASE("unsupported loss-kernel combination is rejected") {
    auto cfg = base_cfg();
    cfg.erm.loss.family = LossFamily::hinge;
    CHECK_THROWS_AS(check_quantitative(cfg), std::invalid_argument);
  }
}

TEST_CASE("check_qualitative") {
  auto cfg = base_cfg();
  cfg.erm.lambda = 0.001;
  cfg.replications = 30;
  SUBCASE("identical measures: tiny prokhorov, pass") {
    cfg.contaminated = reference_p();
    const auto r = check_qualitative(cfg, 1.0, 0.5);
    CHECK(r.verdict == "pass");
    CHECK(r.measured <= 0.05);
  }
  SUBCASE("side condition echo") {
    cfg.contaminated = reference_p();
    // lambda_N = 0.001 <= eps/(6 beta^2) = 0.6/600 = 0.001 -> ok
    auto r = check_qualitative(cfg, 1.0, 0.6);
    bool found = false;
    for (const auto& [k, v] : r.echo)
      if (k == "side_condition_ok") {
        found = true;
        CHECK(v == "1");
      }
    CHECK(found);
    cfg.erm.lambda = 0.5;
    r = check_qualitative(cfg, 1.0, 0.6);
    for (const auto& [k, v] : r.echo)
      if (k == "side_condition_ok") CHECK(v == "0");
  }
  SUBCASE("premise failure is vacuous") {
    cfg.contaminated = shift_y(reference_p(), 3.0);
    const auto r = check_qualitative(cfg, 1e-6, 0.5);
    CHECK(r.verdict == "pass");
    bool vacuous = false;
    for (const auto& [k, v] : r.echo)
      if (k == "premise" && v == "vacuous") vacuous = true;
    CHECK(vacuous);
  }
  CHECK_THROWS_AS(check_qualitative(cfg, -1.0, 0.5), std::invalid_argument);
}

TEST_CASE("stability_curve") {
  auto cfg = base_cfg();
  cfg.erm.kernel.gamma = 2.0;
  const auto H = shift_y(reference_p(), 0.02);
  const auto rows =
      stability_curve(reference_p(), H, {0.2, 0.0, 0.1, 0.05, 0.01}, cfg);
  REQUIRE(rows.size() == 5);
  // sorted by t; t = 0 row has both distances exactly zero
  CHECK(rows[0].t == 0.0);
  CHECK(rows[0].deviation == 0.0);
  CHECK(rows[0].dphi == 0.0);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    CHECK(rows[i].t <= rows[i + 1].t);
    // monotone decay of the deviation toward t = 0
    CHECK(rows[i].deviation <= rows[i + 1].deviation + 1e-12);
  }
  // deviation bounded by t * (phi-moment of P + phi-moment of H)
  for (const auto& r : rows) CHECK(r.deviation <= r.bound + 1e-12);
  CHECK_THROWS_AS(stability_curve(reference_p(), H, {2.0}, cfg),
                  std::invalid_argument);
}

TEST_CASE("consistency_curve") {
  auto cfg = base_cfg();
  cfg.erm.kernel.gamma = 2.0;
  cfg.use_schedule = true;
  cfg.n_grid = {10, 100, 1000};
  cfg.replications = 100;
  const auto rep = consistency_curve(reference_p(), cfg, 0.003);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.theta_true == doctest::Approx(0.002).epsilon(1e-6));
  for (const auto& r : rep.rows) {
    CHECK(r.median >= 0.0);
    CHECK(r.p90 >= r.median - 1e-12);
    CHECK(r.lambda == doctest::Approx(0.5 / std::sqrt(double(r.n))));
  }
  // medians decrease along the grid (allowing one inversion)
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i)
    if (rep.rows[i + 1].median > rep.rows[i].median) ++inversions;
  CHECK(inversions <= 1);
  SUBCASE("dirac ground truth: deviation is the regularization bias only") {
    cfg.n_grid = {5, 50};
    cfg.replications = 10;
    const auto d = consistency_curve(
        DiscreteDistribution({pt(0.0, 1.0)}, {1.0}), cfg, 0.5);
    // lambda_N -> 0 shrinks the bias
    CHECK(d.rows[1].median < d.rows[0].median);
  }
  SUBCASE("fixed lambda leaves a deviation floor") {
    cfg.use_schedule = false;
    cfg.erm.lambda = 0.1;
    cfg.n_grid = {2000};
    cfg.replications = 40;
    const auto d = consistency_curve(reference_p(), cfg, 0.5);
    CHECK(d.rows[0].median > 1e-4);  // does not vanish
  }
}

TEST_CASE("consistency_uniform worst case dominates each member") {
  auto cfg = base_cfg();
  cfg.erm.kernel.gamma = 2.0;
  cfg.use_schedule = true;
  cfg.n_grid = {10, 100};
  cfg.replications = 40;
  const std::vector<DiscreteDistribution> family = {
      reference_p(), shift_y(reference_p(), 0.1)};
  const auto worst = consistency_uniform(family, cfg, 0.003);
  REQUIRE(worst.rows.size() == 2);
  for (std::size_t k = 0; k < family.size(); ++k) {
    ExperimentConfig c = cfg;
    c.seed = rng::derive(cfg.seed, 100 + k);
    const auto rep = consistency_curve(family[k], c, 0.003);
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
      CHECK(worst.rows[i].median >= rep.rows[i].median - 1e-15);
  }
  CHECK_THROWS_AS(consistency_uniform({}, cfg), std::invalid_argument);
}

TEST_CASE("solution_stability") {
  auto cfg = base_cfg();
  cfg.replications = 30;
  SUBCASE("identical measures with identical streams: distance zero") {
    const auto r = solution_stability(reference_p(), reference_p(), cfg);
    CHECK(r.verdict == "pass");
    CHECK(r.measured == 1.0);
    for (const auto& [k, v] : r.echo)
      if (k == "max_distance") CHECK(std::stod(v) == doctest::Approx(0.0));
  }
  SUBCASE("distances shrink with the contamination magnitude") {
    double prev = std::numeric_limits<double>::infinity();
    for (double mag : {0.1, 0.01, 0.001}) {
      const auto r =
          solution_stability(reference_p(), shift_y(reference_p(), mag), cfg);
      double maxd = 0.0;
      for (const auto& [k, v] : r.echo)
        if (k == "max_distance") maxd = std::stod(v);
      CHECK(maxd < prev);
      prev = maxd;
    }
  }
  SUBCASE("non-strongly-convex loss rejected") {
    cfg.erm.loss.family = LossFamily::hinge;
    CHECK_THROWS_AS(solution_stability(reference_p(), reference_p(), cfg),
                    std::invalid_argument);
  }
}

TEST_CASE("reports are byte-identical across reruns") {
  auto cfg = base_cfg();
  cfg.contaminated = shift_y(reference_p(), 0.05);
  cfg.replications = 40;
  const auto render = [&] {
    std::ostringstream os;
    write_report_csv(check_quantitative(cfg), os);
    return os.str();
  };
  CHECK(render() == render());
}

TEST_CASE("curves csv rendering") {
  CurveRow r;
  r.t = 0.5;
  r.measured = 1.0 / 3.0;
  r.verdict = "pass";
  std::ostringstream os;
  write_curves_csv({r}, os);
  CHECK(os.str() ==
        "N,t,median,p90,bound,measured,verdict\n"
        ",0.5,,,,0.33333333333333331,pass\n");
}
