#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "kstab/distribution.hpp"

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

// gauge with phi(z) = y^2 exactly: squared loss, linear kernel, x = 0 atoms
GaugeSpec y2_gauge() {
  GaugeSpec g;
  g.loss.family = LossFamily::squared;
  g.kernel = KernelSpec{KernelFamily::linear, 1.0, 1, 1.0, 1.0, 1};
  g.beta = 10.0;
  return g;
}

}  // namespace

TEST_CASE("validation") {
  CHECK_THROWS_AS(DiscreteDistribution({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDistribution({pt(0, 0)}, {0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDistribution({pt(0, 0)}, {1.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscreteDistribution({pt(0, 0), pt(1, 0)}, {1.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      DiscreteDistribution({pt(0, std::numeric_limits<double>::quiet_NaN())},
                           {1.0}),
      std::invalid_argument);
  // inconsistent dimensions
  Vector two(2);
  two << 0, 0;
  CHECK_THROWS_AS(DiscreteDistribution({pt(0, 0), Point(two, 0.0)}, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK(reference_p().size() == 5);
  CHECK(reference_p().dim() == 1);
  CHECK(DiscreteDistribution::dirac(Point(2.0)).dim() == 0);
}

TEST_CASE("point geometry") {
  const Point a = pt(3.0, 4.0);
  CHECK(a.znorm() == doctest::Approx(5.0));
  CHECK(a.z().size() == 2);
  CHECK(point_distance(pt(0, 0), pt(3, 4)) == doctest::Approx(5.0));
  CHECK_THROWS_AS(point_distance(Point(1.0), pt(0, 0)), std::invalid_argument);
}

TEST_CASE("sampling is reproducible and order-independent") {
  const auto P = reference_p();
  const auto s1 = sample(P, 50, 9, 3);
  const auto s2 = sample(P, 50, 9, 3);
  REQUIRE(s1.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(s1[i].x(0) == s2[i].x(0));
    CHECK(s1[i].y == s2[i].y);
  }
  // draw i is a pure function of (seed, stream, i): a longer run agrees on
  // its prefix
  const auto s3 = sample(P, 80, 9, 3);
  for (std::size_t i = 0; i < 50; ++i) CHECK(s3[i].y == s1[i].y);
  // different stream differs somewhere
  const auto s4 = sample(P, 50, 9, 4);
  bool any_diff = false;
  for (std::size_t i = 0; i < 50; ++i)
    any_diff = any_diff || s4[i].y != s1[i].y;
  CHECK(any_diff);
  CHECK_THROWS_AS(sample(P, 0, 1), std::invalid_argument);
}

TEST_CASE("sampling hits atoms with roughly the right frequencies") {
  const auto P = reference_p();
  const auto s = sample(P, 20000, 123);
  std::vector<int> counts(5, 0);
  for (const Point& z : s)
    for (std::size_t k = 0; k < 5; ++k)
      if (z.x(0) == P.atoms()[k].x(0) && z.y == P.atoms()[k].y) ++counts[k];
  for (int c : counts) CHECK(std::abs(c / 20000.0 - 0.2) < 0.02);
}

TEST_CASE("empirical") {
  const auto e = empirical({pt(0, 1), pt(0, 1), pt(1, 2)});
  CHECK(e.size() == 3);
  CHECK(e.weights()[0] == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(empirical({}), std::invalid_argument);
}

TEST_CASE("moment and membership") {
  // phi = y^2, p = 1: second moment
  const auto g = y2_gauge();
  const DiscreteDistribution d(
      {Point(Vector::Zero(1), 1.0), Point(Vector::Zero(1), -2.0)}, {0.5, 0.5});
  CHECK(moment(d, g, 1.0) == doctest::Approx(2.5));
  CHECK(moment(d, g, 2.0) == doctest::Approx(0.5 + 8.0));
  CHECK(membership(d, g, 1.0, 2.5));
  CHECK(!membership(d, g, 1.0, 2.4));
  CHECK_THROWS_AS(moment(d, g, 0.5), std::invalid_argument);
}

TEST_CASE("mix is affine in t and exact at the endpoints") {
  const auto P = reference_p();
  auto H = perturb(P, PerturbMode::shift_y, 0.0, 1);  // copy
  const auto M0 = mix(P, H, 0.0);
  CHECK(M0.size() == P.size());
  for (std::size_t i = 0; i < P.size(); ++i)
    CHECK(M0.weights()[i] == P.weights()[i]);
  const auto M1 = mix(P, H, 1.0);
  CHECK(M1.size() == H.size());
  const auto M = mix(P, H, 0.25);
  CHECK(M.size() == 10);
  double s = 0.0;
  for (double w : M.weights()) s += w;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(M.weights()[0] == doctest::Approx(0.15));
  CHECK(M.weights()[5] == doctest::Approx(0.05));
  CHECK_THROWS_AS(mix(P, H, 1.5), std::invalid_argument);
}

TEST_CASE("perturb") {
  const auto P = reference_p();
  SUBCASE("magnitude zero is the identity") {
    const auto Q = perturb(P, PerturbMode::shift_x, 0.0, 77);
    for (std::size_t i = 0; i < P.size(); ++i) {
      CHECK(Q.atoms()[i].x(0) == P.atoms()[i].x(0));
      CHECK(Q.atoms()[i].y == P.atoms()[i].y);
    }
  }
  SUBCASE("shift_y moves only y, within magnitude") {
    const auto Q = perturb(P, PerturbMode::shift_y, 0.01, 77);
    for (std::size_t i = 0; i < P.size(); ++i) {
      CHECK(Q.atoms()[i].x(0) == P.atoms()[i].x(0));
      CHECK(std::abs(Q.atoms()[i].y - P.atoms()[i].y) <= 0.01);
    }
    // deterministic in the seed
    const auto Q2 = perturb(P, PerturbMode::shift_y, 0.01, 77);
    for (std::size_t i = 0; i < P.size(); ++i)
      CHECK(Q.atoms()[i].y == Q2.atoms()[i].y);
  }
  SUBCASE("quantize rounds toward zero") {
    const auto Q = perturb(P, PerturbMode::quantize, 0.25, 0);
    CHECK(Q.atoms()[0].x(0) == doctest::Approx(-0.5));  // -0.6 -> -0.5
    CHECK(Q.atoms()[0].y == doctest::Approx(-0.25));
    CHECK(Q.atoms()[2].y == doctest::Approx(0.0));      // 0.05 -> 0
  }
  CHECK_THROWS_AS(perturb(P, PerturbMode::shift_y, -1.0, 0),
                  std::invalid_argument);
}

TEST_CASE("csv round trip is byte-exact") {
  const auto P = reference_p();
  std::ostringstream os;
  save_csv(P, os);
  const std::string first = os.str();
  std::istringstream is(first);
  const auto Q = load_csv(is);
  std::ostringstream os2;
  save_csv(Q, os2);
  CHECK(first == os2.str());
  CHECK(Q.size() == P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    CHECK(Q.atoms()[i].x(0) == P.atoms()[i].x(0));
    CHECK(Q.atoms()[i].y == P.atoms()[i].y);
    CHECK(Q.weights()[i] == P.weights()[i]);
  }
}

TEST_CASE("csv loader normalizes slightly-off weights with a warning") {
  std::istringstream is("x_0,y,weight\n0,1,0.5\n1,2,0.5001\n");
  std::ostringstream warn;
  const auto d = load_csv(is, &warn);
  CHECK(warn.str().find("renormalizing") != std::string::npos);
  CHECK(d.weights()[0] + d.weights()[1] == doctest::Approx(1.0));
  std::istringstream bad("x_0,y,weight\n0,1\n");
  CHECK_THROWS_AS(load_csv(bad), std::runtime_error);
  std::istringstream empty("");
  CHECK_THROWS_AS(load_csv(empty), std::runtime_error);
}
