#include <doctest.h>

#include <cmath>
#include <random>

#include "mfjp/dynamics.hpp"
#include "mfjp/error.hpp"
#include "mfjp/quasipotential.hpp"

using namespace mfjp;

namespace {

SimplexPoint on_line(double x) { return SimplexPoint{1.0 - x, x}; }

/// Binary relative entropy of (1-x, x) with respect to (2/3, 1/3).
double nonint_entropy(double x) {
  auto term = [](double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; };
  return term(1.0 - x, 2.0 / 3.0) + term(x, 1.0 / 3.0);
}

/// Two-state family with three stable points: the up-rate is exp(f(u)) with
/// u = 2 xi[up] - 1 and f(u) = b u + a u^3 (1 - u^2); the down-rate is exp(-f(u)).
Model three_well(double a, double b) {
  const std::string f = "(b*(2*xi[up]-1)+a*(2*xi[up]-1)*(2*xi[up]-1)*(2*xi[up]-1)*"
                        "(1-(2*xi[up]-1)*(2*xi[up]-1)))";
  return Model("three_well", {"down", "up"}, {{0, 1}, {1, 0}}, {"exp(" + f + ")", "exp(-" + f + ")"},
               {{"a", a}, {"b", b}});
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("1-d oracle reproduces closed forms") {
  const Model m = catalog::nonint();
  CHECK(hj_oracle_1d(m, 0.3, 0.3) == 0.0);
  CHECK(hj_oracle_1d(m, 1.0 / 3.0, 1.0) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  for (double x : {0.0, 0.05, 0.2, 0.5, 0.77, 0.99}) {
    INFO("x = " << x);
    CHECK(hj_oracle_1d(m, 1.0 / 3.0, x) == doctest::Approx(nonint_entropy(x)).epsilon(1e-8));
  }
  // moving toward the attractor is free
  CHECK(hj_oracle_1d(m, 0.9, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(hj_oracle_1d(m, -0.1, 0.5), Error);
  CHECK_THROWS_AS(hj_oracle_1d(catalog::cyc3(), 0.1, 0.5), Error);
}

TEST_CASE("segment cost vanishes on the flow and is asymmetric against it") {
  const Model cw = catalog::curie_weiss(1.5, 0.0);
  const CostLattice lattice(cw, 100);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(5, 95);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = pick(rng);
    const SimplexPoint here = on_line(k / 100.0);
    const double v = drift(cw, here)[1];
    if (std::abs(v) < 1e-12) continue;
    const int step = v > 0 ? 1 : -1;
    const auto node = lattice.nearest_node(here);
    const auto next = lattice.nearest_node(on_line((k + step) / 100.0));
    INFO("k = " << k);
    CHECK(lattice.arc_cost(node, next) <= 1e-3);
    CHECK(lattice.arc_cost(next, node) > lattice.arc_cost(node, next));
  }
  CHECK(lattice.arc_cost(0, 0) == std::numeric_limits<double>::infinity());
  const auto [zero, duration] = segment_cost(cw, on_line(0.3).weights(), on_line(0.3).weights());
  CHECK(zero == 0.0);
  CHECK(duration > 0.0);
}

TEST_CASE("forbidden balls remove nodes") {
  const Model cw = catalog::curie_weiss(1.5, 0.0);
  const auto masked = build_cost_lattice(cw, 50, {Ball{on_line(0.5), 0.05}});
  const auto centre = masked.lattice.nearest_node(on_line(0.5));
  CHECK(masked.mask[static_cast<std::size_t>(centre)] == 0);
  CHECK(masked.mask[static_cast<std::size_t>(masked.lattice.nearest_node(on_line(0.2)))] == 1);
  const auto dist = masked.lattice.distances_from(masked.lattice.nearest_node(on_line(0.1)), &masked.mask);
  CHECK(std::isinf(dist[static_cast<std::size_t>(centre)]));
  CHECK(std::isinf(dist[static_cast<std::size_t>(masked.lattice.nearest_node(on_line(0.9)))]));
  CHECK_THROWS_AS(masked.lattice.shortest_path(masked.lattice.nearest_node(on_line(0.1)),
                                               masked.lattice.nearest_node(on_line(0.9)), &masked.mask),
                  Error);
  CHECK_THROWS_AS(CostLattice(cw, 10), Error);
}

TEST_CASE("quasipotential basics") {
  const Model m = catalog::nonint();
  const CostLattice lattice(m, 200);
  const auto r = quasipotential(lattice, SimplexPoint{2.0 / 3, 1.0 / 3}, SimplexPoint{0.0, 1.0});
  CHECK(rel_gap(r.value, std::log(3.0)) <= 0.02);
  CHECK(r.path.points.front().weights().isApprox(lattice.point(lattice.nearest_node(SimplexPoint{2.0 / 3, 1.0 / 3})).weights()));
  CHECK(r.path.points.back()[1] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < r.path.times.size(); ++i) CHECK(r.path.times[i] > r.path.times[i - 1]);

  const auto polished = quasipotential(lattice, SimplexPoint{2.0 / 3, 1.0 / 3}, SimplexPoint{0.0, 1.0}, true);
  CHECK(polished.polished);
  CHECK(polished.value <= r.value + 1e-12);
  CHECK(rel_gap(polished.value, std::log(3.0)) <= 0.02);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const SimplexPoint p = on_line(unif(rng));
    CHECK(quasipotential(lattice, p, p).value == 0.0);
  }
}

TEST_CASE("symmetric wells have equal barriers") {
  const Model cw = catalog::curie_weiss(1.5, 0.0);
  const auto set = find_attractors(cw);
  const auto wells = set.stable();
  REQUIRE(wells.size() == 2);
  const CostLattice lattice(cw, 200);
  const double up = quasipotential(lattice, wells[0], wells[1]).value;
  const double down = quasipotential(lattice, wells[1], wells[0]).value;
  CHECK(up > 0.0);
  CHECK(rel_gap(up, down) <= 0.02);
}

TEST_CASE("lattice agrees with the 1-d oracle on two-state catalog models") {
  // endpoints are lattice nodes so the comparison isolates path discretisation from snapping
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> node(0, 200);
  for (const Model& m : {catalog::nonint(), catalog::curie_weiss()}) {
    const CostLattice lattice(m, 200);
    for (int i = 0; i < 50; ++i) {
      const double a = node(rng) / 200.0;
      const double b = node(rng) / 200.0;
      const double lat = quasipotential(lattice, on_line(a), on_line(b)).value;
      const double exact = hj_oracle_1d(m, a, b);
      INFO(m.name() << " " << a << " -> " << b << " lattice " << lat << " oracle " << exact);
      CHECK((std::abs(lat - exact) <= 1e-3 || rel_gap(lat, exact) <= 0.02));
    }
  }
}

TEST_CASE("triangle inequality on the lattice") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const Model& m : {catalog::curie_weiss(1.5, 0.1), catalog::nonint()}) {
    const CostLattice lattice(m, 100);
    for (int i = 0; i < 200; ++i) {
      const SimplexPoint a = on_line(unif(rng));
      const SimplexPoint b = on_line(unif(rng));
      const SimplexPoint c = on_line(unif(rng));
      CHECK(quasipotential(lattice, a, c).value <=
            quasipotential(lattice, a, b).value + quasipotential(lattice, b, c).value + 5e-3);
    }
  }
  const Model cyc = catalog::cyc3(1, 2);
  const CostLattice lattice(cyc, 30);
  std::exponential_distribution<double> expo(1.0);
  auto random_point = [&] { return SimplexPoint::normalized(Vector{{expo(rng), expo(rng), expo(rng)}}); };
  for (int i = 0; i < 200; ++i) {
    const SimplexPoint a = random_point();
    const SimplexPoint b = random_point();
    const SimplexPoint c = random_point();
    CHECK(quasipotential(lattice, a, c).value <=
          quasipotential(lattice, a, b).value + quasipotential(lattice, b, c).value + 5e-3);
  }
}

TEST_CASE("refinement between M and 2M on attractor pairs") {
  for (const Model& m : {catalog::curie_weiss(1.5, 0.0), catalog::curie_weiss(1.5, 0.1)}) {
    const auto wells = find_attractors(m).stable();
    REQUIRE(wells.size() == 2);
    const auto coarse = vtilde_matrix(CostLattice(m, 100), wells);
    const auto fine = vtilde_matrix(CostLattice(m, 200), wells);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (i != j) CHECK(rel_gap(coarse.v(i, j), fine.v(i, j)) <= 0.05);
  }
}

TEST_CASE("cost matrix structure") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const auto wells = find_attractors(cw).stable();
  const CostLattice lattice(cw, 200);
  const auto two = vtilde_matrix(lattice, wells);
  CHECK(two.size() == 2);
  CHECK(two.vtilde == two.v);
  CHECK(two.v(0, 1) == doctest::Approx(hj_oracle_1d(cw, wells[0][1], wells[1][1])).epsilon(0.02));

  const auto one = vtilde_matrix(lattice, {wells[0]});
  CHECK(one.size() == 1);
  CHECK(one.v(0, 0) == 0.0);
  CHECK_THROWS_AS(vtilde_matrix(lattice, wells, {.rho0 = 0.9}), Error);
}

TEST_CASE("three wells: the middle well blocks the outer corridor") {
  const Model m = three_well(4.0, 0.5);
  const auto wells = find_attractors(m).stable();
  REQUIRE(wells.size() == 3);
  const auto coarse = vtilde_matrix(CostLattice(m, 100), wells);
  const auto fine = vtilde_matrix(CostLattice(m, 200), wells);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(fine.vtilde(i, j) >= fine.v(i, j));
      if (std::isfinite(fine.vtilde(i, j)))
        CHECK(rel_gap(coarse.vtilde(i, j), fine.vtilde(i, j)) <= 0.05);
      CHECK(rel_gap(coarse.v(i, j), fine.v(i, j)) <= 0.05);
    }
  // in one dimension the outer wells cannot reach each other without crossing the middle one
  CHECK(std::isinf(fine.vtilde(0, 2)));
  CHECK(std::isinf(fine.vtilde(2, 0)));
  CHECK(fine.v(0, 2) > fine.v(0, 1));
  CHECK(fine.v(0, 2) == doctest::Approx(hj_oracle_1d(m, wells[0][1], wells[2][1])).epsilon(0.02));

  const CostLattice lattice(m, 100);
  const QuasipotentialField field(lattice, wells);
  for (int i = 0; i < 3; ++i) {
    CHECK(field(i, wells[static_cast<std::size_t>(i)]) == 0.0);
    CHECK(field.values(i).size() == static_cast<std::size_t>(lattice.node_count()));
  }
  CHECK(field(0, wells[2]) == doctest::Approx(coarse.v(0, 2)));
}
