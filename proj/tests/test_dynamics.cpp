#include <doctest.h>

#include <cmath>
#include <random>

#include "mfjp/dynamics.hpp"
#include "mfjp/error.hpp"

using namespace mfjp;

namespace {

double cw_drift_x(double beta, double h, double x) {
  const double e = beta * (2 * x - 1) + h;
  return (1 - x) * std::exp(e) - x * std::exp(-e);
}

/// Roots of the 1-d Curie-Weiss drift by bracketing on a fine grid plus bisection.
std::vector<double> cw_roots(double beta, double h) {
  std::vector<double> roots;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double a = static_cast<double>(i) / n;
    double b = static_cast<double>(i + 1) / n;
    double fa = cw_drift_x(beta, h, a);
    double fb = cw_drift_x(beta, h, b);
    if (fa == 0.0) {
      roots.push_back(a);
      continue;
    }
    if (fb == 0.0 || fa * fb > 0) continue;
    for (int k = 0; k < 200; ++k) {
      const double m = 0.5 * (a + b);
      const double fm = cw_drift_x(beta, h, m);
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  return roots;
}

SimplexPoint random_point(std::mt19937_64& rng, int d) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(d);
  for (int i = 0; i < d; ++i) w[i] = expo(rng);
  return SimplexPoint::normalized(w);
}

}  // namespace

TEST_CASE("drift examples") {
  const Vector v = drift(catalog::nonint(), SimplexPoint{2.0 / 3, 1.0 / 3});
  CHECK(std::abs(v[0]) < 1e-15);
  CHECK(std::abs(v[1]) < 1e-15);
  const Vector w = drift(catalog::curie_weiss(), SimplexPoint{0.5, 0.5});
  CHECK(w.cwiseAbs().maxCoeff() == 0.0);
  const Vector c = drift(catalog::curie_weiss(), SimplexPoint{1.0, 0.0});
  CHECK(c[1] == doctest::Approx(std::exp(-1.5)).epsilon(1e-14));
}

TEST_CASE("drift conserves mass") {
  std::mt19937_64 rng(5);
  const Model models[] = {catalog::nonint(), catalog::curie_weiss(1.5, 0.1), catalog::cyc3(1, 2)};
  for (const auto& m : models)
    for (int k = 0; k < 1000; ++k)
      REQUIRE(std::abs(drift(m, random_point(rng, m.states())).sum()) <= 1e-12);
}

TEST_CASE("McKean-Vlasov flow") {
  // linear relaxation: x(t) = 1/3 (1 - e^{-3t}) from x(0) = 0
  const auto path = mve_flow(catalog::nonint(), SimplexPoint{1.0, 0.0}, 20.0, 0.01);
  CHECK(path.times.front() == 0.0);
  CHECK(path.times.back() == 20.0);
  CHECK(distance(path.points.back(), SimplexPoint{2.0 / 3, 1.0 / 3}) < 1e-6);
  const auto mid = mve_flow(catalog::nonint(), SimplexPoint{1.0, 0.0}, 0.5, 0.01);
  CHECK(mid.points.back()[1] == doctest::Approx((1 - std::exp(-1.5)) / 3).epsilon(1e-9));

  const auto still = mve_flow(catalog::curie_weiss(), SimplexPoint{0.5, 0.5}, 10.0, 0.1);
  for (const auto& p : still.points) CHECK(distance(p, SimplexPoint{0.5, 0.5}) < 1e-9);

  const auto roots = cw_roots(1.5, 0.0);
  REQUIRE(roots.size() == 3);
  const auto up = mve_flow(catalog::curie_weiss(), SimplexPoint{0.1, 0.9}, 60.0, 0.01);
  CHECK(std::abs(up.points.back()[1] - roots[2]) < 1e-6);

  CHECK_THROWS_AS(mve_flow(catalog::nonint(), SimplexPoint{1.0, 0.0}, 1.0, 0.0), Error);
  try {
    mve_flow(catalog::nonint(10, 10), SimplexPoint{1.0, 0.0}, 10.0, 1.0);
    FAIL("expected StepRejected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepRejected);
  }
}

TEST_CASE("flow decreases the drift near stable points") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const auto path = mve_flow(cw, SimplexPoint{0.3, 0.7}, 30.0, 0.01);
  const std::size_t from = path.points.size() * 9 / 10;
  for (std::size_t i = from + 1; i < path.points.size(); ++i) {
    const double prev = drift(cw, path.points[i - 1]).cwiseAbs().maxCoeff();
    const double cur = drift(cw, path.points[i]).cwiseAbs().maxCoeff();
    CHECK(cur <= prev + 1e-15);
  }
}

TEST_CASE("attractors of the catalog models") {
  const auto nonint = find_attractors(catalog::nonint());
  REQUIRE(nonint.fixed_points.size() == 1);
  CHECK(nonint.fixed_points[0].stability == Stability::Stable);
  CHECK(distance(nonint.fixed_points[0].location, SimplexPoint{2.0 / 3, 1.0 / 3}) < 1e-9);

  const auto cw = find_attractors(catalog::curie_weiss(1.5, 0.0));
  const auto roots = cw_roots(1.5, 0.0);
  REQUIRE(cw.fixed_points.size() == 3);
  // lexicographic order on (xi[down], xi[up]) lists the upper root first
  CHECK(std::abs(cw.fixed_points[0].location[1] - roots[2]) < 1e-9);
  CHECK(std::abs(cw.fixed_points[1].location[1] - 0.5) < 1e-9);
  CHECK(std::abs(cw.fixed_points[2].location[1] - roots[0]) < 1e-9);
  CHECK(cw.fixed_points[0].stability == Stability::Stable);
  CHECK(cw.fixed_points[1].stability == Stability::Unstable);
  CHECK(cw.fixed_points[2].stability == Stability::Stable);
  CHECK(std::abs(roots[0] + roots[2] - 1.0) < 1e-9);
  for (const auto& fp : cw.fixed_points) CHECK(fp.drift_norm <= 1e-10);

  const auto asym = find_attractors(catalog::curie_weiss(1.5, 0.1));
  const auto asym_roots = cw_roots(1.5, 0.1);
  REQUIRE(asym.stable_count() == 2);
  REQUIRE(asym_roots.size() == 3);
  const auto stable = asym.stable();
  CHECK(std::abs(stable[0][1] - asym_roots[2]) < 1e-9);
  CHECK(std::abs(stable[1][1] - asym_roots[0]) < 1e-9);
}

TEST_CASE("bistability onset in beta") {
  for (double beta : {0.5, 1.0, 1.5, 2.0}) {
    const auto set = find_attractors(catalog::curie_weiss(beta, 0.0));
    const auto roots = cw_roots(beta, 0.0);
    CHECK(set.fixed_points.size() == roots.size());
    CHECK(set.stable_count() == (roots.size() == 3 ? 2u : 1u));
    CHECK(roots.size() == (beta > 1.0 ? 3u : 1u));
  }
}

TEST_CASE("attractor search is deterministic and rejects too few starts") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  AttractorOptions opt;
  opt.seed = 99;
  opt.threads = 3;
  const auto a = find_attractors(cw, opt);
  opt.threads = 1;
  const auto b = find_attractors(cw, opt);
  REQUIRE(a.fixed_points.size() == b.fixed_points.size());
  for (std::size_t i = 0; i < a.fixed_points.size(); ++i)
    CHECK(a.fixed_points[i].location.weights() == b.fixed_points[i].location.weights());
  opt.n_starts = 5;
  CHECK_THROWS_AS(find_attractors(cw, opt), Error);
}

TEST_CASE("cyclic model has a stable interior point") {
  const auto set = find_attractors(catalog::cyc3());
  REQUIRE(set.fixed_points.size() == 1);
  CHECK(set.fixed_points[0].stability == Stability::Stable);
  CHECK(distance(set.fixed_points[0].location, SimplexPoint{1.0 / 3, 1.0 / 3, 1.0 / 3}) < 1e-9);
}

TEST_CASE("basins") {
  const Model cw = catalog::curie_weiss(1.5, 0.0);
  const auto set = find_attractors(cw);
  const auto stable = set.stable();
  for (std::size_t i = 0; i < stable.size(); ++i)
    CHECK(basin_of(cw, set, stable[i]) == static_cast<int>(i));
  CHECK(basin_of(cw, set, SimplexPoint{0.1, 0.9}) == 0);
  CHECK(basin_of(cw, set, SimplexPoint{0.9, 0.1}) == 1);
  try {
    basin_of(cw, set, SimplexPoint{0.5, 0.5});
    FAIL("expected Unresolved");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unresolved);
  }
}
