#include <doctest.h>

#include <cmath>
#include <random>

#include "mfjp/action.hpp"
#include "mfjp/dynamics.hpp"
#include "mfjp/error.hpp"

using namespace mfjp;

namespace {

SimplexPoint random_point(std::mt19937_64& rng, int d) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(d);
  for (int i = 0; i < d; ++i) w[i] = expo(rng);
  return SimplexPoint::normalized(w);
}

Vector random_velocity(std::mt19937_64& rng, int d, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  v.array() -= v.mean();
  return v;
}

/// Dual objective of a two-state model in the up-coordinate x with dual variable p:
/// p v - m_du (e^p - 1 - p) - m_ud (e^{-p} - 1 + p) - p (m_du - m_ud).
double dual_1d(double p, double v, double m_du, double m_ud) {
  return p * v - m_du * (std::exp(p) - 1.0) - m_ud * (std::exp(-p) - 1.0);
}

/// Brute-force supremum over p in [-10, 10]: dense scan then golden-section polish.
double dual_grid_sup(double v, double m_du, double m_ud) {
  double best_p = -10.0;
  double best = dual_1d(best_p, v, m_du, m_ud);
  const int n = 20000;
  for (int i = 1; i <= n; ++i) {
    const double p = -10.0 + 20.0 * i / n;
    const double f = dual_1d(p, v, m_du, m_ud);
    if (f > best) {
      best = f;
      best_p = p;
    }
  }
  double lo = best_p - 2e-3;
  double hi = best_p + 2e-3;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double a = hi - r * (hi - lo);
    const double b = lo + r * (hi - lo);
    if (dual_1d(a, v, m_du, m_ud) > dual_1d(b, v, m_du, m_ud))
      hi = b;
    else
      lo = a;
  }
  return std::max(best, dual_1d(0.5 * (lo + hi), v, m_du, m_ud));
}

/// Closed-form 1-d Lagrangian for NONINT(a, b) in the coordinate x = xi[up].
double nonint_lagrangian_1d(double x, double v, double a, double b) {
  const double mdu = (1.0 - x) * a;
  const double mud = x * b;
  if (mdu == 0.0 || mud == 0.0) {
    if (mdu == 0.0 && v > 0.0) return INFINITY;
    if (mud == 0.0 && v < 0.0) return INFINITY;
    if (v == 0.0) return mdu + mud;
    const double m = mdu + mud;
    return v * std::log(std::abs(v) / m) - std::abs(v) + m;
  }
  const double y = (v + std::sqrt(v * v + 4.0 * mdu * mud)) / (2.0 * mdu);
  return dual_1d(std::log(y), v, mdu, mud);
}

}  // namespace

TEST_CASE("tau and its transform") {
  CHECK(tau_star(0.0) == 0.0);
  CHECK(tau_star(-1.0) == 1.0);
  CHECK(tau_star(std::exp(1.0) - 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isinf(tau_star(-1.5)));
  CHECK(tau(0.0) == 0.0);
  CHECK(tau(1e-6) == doctest::Approx(0.5e-12).epsilon(1e-9));
  CHECK(tau(2.0) == doctest::Approx(std::exp(2.0) - 3.0).epsilon(1e-15));
  CHECK(tau(-5e-5) == doctest::Approx(std::expm1(-5e-5) + 5e-5).epsilon(1e-10));
  // Fenchel-Young: tau(u) + tau*(w) >= u w, equality at w = e^u - 1
  for (double u : {-3.0, -0.2, 0.0, 0.7, 2.5}) {
    CHECK(tau(u) + tau_star(std::expm1(u)) == doctest::Approx(u * std::expm1(u)).epsilon(1e-12));
    CHECK(tau(u) + tau_star(0.3) >= u * 0.3 - 1e-15);
  }
}

TEST_CASE("Lagrangian vanishes at the drift") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const SimplexPoint xi{0.3, 0.7};
  const auto lv = lagrangian(cw, xi, drift(cw, xi));
  CHECK(lv.value <= 1e-15);
  CHECK(lv.alpha.cwiseAbs().maxCoeff() <= 1e-12);
  const auto gen = lagrangian(catalog::cyc3(1, 2), SimplexPoint{0.2, 0.5, 0.3},
                              drift(catalog::cyc3(1, 2), SimplexPoint{0.2, 0.5, 0.3}));
  CHECK(gen.value <= 1e-15);
}

TEST_CASE("Lagrangian against a dense dual grid") {
  const Model m = catalog::nonint();
  for (const auto& [x, v] : std::vector<std::pair<double, double>>{
           {0.5, 0.0}, {0.5, 0.3}, {0.2, -0.1}, {0.9, 0.05}, {1.0 / 3, 0.4}}) {
    const SimplexPoint xi{1 - x, x};
    const Vector vel{{-v, v}};
    const double oracle = dual_grid_sup(v, (1 - x) * 1.0, x * 2.0);
    CHECK(std::abs(lagrangian(m, xi, vel).value - oracle) <= 1e-8);
    CHECK(std::abs(lagrangian(m, xi, vel, LagrangianMethod::Generic).value - oracle) <= 1e-8);
  }
}

TEST_CASE("infinite action") {
  const Model m = catalog::nonint();
  const auto lv = lagrangian(m, SimplexPoint{0.0, 1.0}, Vector{{-0.1, 0.1}});
  CHECK(lv.infinite);
  CHECK(std::isinf(lv.value));
  CHECK(lagrangian(m, SimplexPoint{0.0, 1.0}, Vector{{-0.1, 0.1}}, LagrangianMethod::Generic).infinite);
  // flow into an empty state from a populated one is fine
  CHECK_FALSE(lagrangian(m, SimplexPoint{0.0, 1.0}, Vector{{0.1, -0.1}}).infinite);
  // on the cycle, mass cannot reach z2 through the empty z1 at first order
  const Model cyc = catalog::cyc3();
  CHECK(lagrangian(cyc, SimplexPoint{1.0, 0.0, 0.0}, Vector{{-0.1, 0.0, 0.1}}).infinite);
  CHECK_FALSE(lagrangian(cyc, SimplexPoint{1.0, 0.0, 0.0}, Vector{{-0.1, 0.1, 0.0}}).infinite);
  CHECK_FALSE(lagrangian(cyc, SimplexPoint{0.5, 0.5, 0.0}, Vector{{-0.1, 0.0, 0.1}}).infinite);
  CHECK(lagrangian(cyc, SimplexPoint{0.5, 0.5, 0.0}, Vector{{0.1, -0.2, 0.1}}).infinite);
  CHECK(lagrangian(cyc, SimplexPoint{0.5, 0.0, 0.5}, Vector{{0.1, -0.1, 0.0}}).infinite);
}

TEST_CASE("boundary values match the limiting closed form") {
  const Model m = catalog::nonint();
  // empty up state, zero velocity: sup is m_du = 1, approached as the dual diverges
  const auto a = lagrangian(m, SimplexPoint{1.0, 0.0}, Vector{{0.0, 0.0}}, LagrangianMethod::Generic);
  CHECK(a.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(lagrangian(m, SimplexPoint{1.0, 0.0}, Vector{{0.0, 0.0}}).value == 1.0);
  const auto b = lagrangian(m, SimplexPoint{1.0, 0.0}, Vector{{-0.5, 0.5}});
  CHECK(b.value == doctest::Approx(nonint_lagrangian_1d(0.0, 0.5, 1.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("Lagrangian properties at random inputs") {
  std::mt19937_64 rng(21);
  const Model models[] = {catalog::curie_weiss(1.5, 0.1), catalog::cyc3(1.0, 2.0),
                          Model("four", {"a", "b", "c", "d"},
                                {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}, {2, 1}},
                                {"1+xi[b]", "2", "0.5+xi[a]", "1", "exp(xi[c])", "0.3"})};
  for (const auto& m : models) {
    const int d = m.states();
    for (int k = 0; k < 500; ++k) {
      const SimplexPoint xi = random_point(rng, d);
      const Vector v = random_velocity(rng, d, 0.5);
      const auto lv = lagrangian(m, xi, v);
      REQUIRE(lv.value >= 0.0);
      REQUIRE(lv.converged);
      REQUIRE(lv.gradient_norm <= 1e-8);
      const Vector f = drift(m, xi);
      if ((v - f).cwiseAbs().maxCoeff() > 1e-3) REQUIRE(lv.value > 0.0);
      // convexity in v
      const Vector v2 = random_velocity(rng, d, 0.5);
      const double w = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
      const double mix = lagrangian(m, xi, w * v + (1 - w) * v2).value;
      REQUIRE(mix <= w * lv.value + (1 - w) * lagrangian(m, xi, v2).value + 1e-8);
      // the two forms of the action density agree
      const Vector l = controlled_rates(m, xi, lv.alpha);
      REQUIRE(std::abs(rate_form_density(m, xi, l) - lv.value) <= 1e-9 * std::max(1.0, lv.value));
      // and the controlled rates reproduce the velocity
      Vector vel = Vector::Zero(d);
      for (int e = 0; e < m.edge_count(); ++e) {
        const Edge& edge = m.edges()[static_cast<std::size_t>(e)];
        vel[edge.from] -= xi[edge.from] * l[e];
        vel[edge.to] += xi[edge.from] * l[e];
      }
      REQUIRE((vel - v).cwiseAbs().maxCoeff() <= 1e-8);
      // Legendre duality with the Hamiltonian
      REQUIRE(std::abs(lv.alpha.dot(v) - hamiltonian(m, xi, lv.alpha) - lv.value) <= 1e-9);
    }
  }
}

TEST_CASE("closed form agrees with the generic optimiser") {
  std::mt19937_64 rng(17);
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  for (int k = 0; k < 1000; ++k) {
    const SimplexPoint xi = random_point(rng, 2);
    const Vector v = random_velocity(rng, 2, 1.0);
    const double a = lagrangian(cw, xi, v, LagrangianMethod::ClosedForm).value;
    const double b = lagrangian(cw, xi, v, LagrangianMethod::Generic).value;
    REQUIRE(std::abs(a - b) <= 1e-9 * std::max(1.0, a));
  }
  CHECK_THROWS_AS(lagrangian(catalog::cyc3(), SimplexPoint{0.2, 0.3, 0.5}, Vector::Zero(3),
                             LagrangianMethod::ClosedForm),
                  Error);
}

TEST_CASE("path action") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const FlowPath flow = mve_flow(cw, SimplexPoint{0.6, 0.4}, 5.0, 0.01);
  CHECK(path_action(cw, ControlledPath{flow.times, flow.points}) <= 1e-6);

  const SimplexPoint xi{0.35, 0.65};
  const double T = 2.5;
  const double constant = path_action(cw, ControlledPath{{0.0, T}, {xi, xi}});
  const double density = lagrangian(cw, xi, Vector::Zero(2)).value;
  CHECK(std::abs(constant - T * density) <= 1e-6 * T * density);

  // NONINT straight path x: 1/3 -> 2/3 over T = 1, against a midpoint time
  // discretisation with 1000 steps and a brute-force dual at each step
  const Model m = catalog::nonint();
  const double v = 1.0 / 3.0;
  double oracle = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = 1.0 / 3 + v * (i + 0.5) / 1000.0;
    oracle += dual_grid_sup(v, (1 - x) * 1.0, x * 2.0) / 1000.0;
  }
  const double value =
      path_action(m, ControlledPath{{0.0, 1.0}, {SimplexPoint{2.0 / 3, 1.0 / 3}, SimplexPoint{1.0 / 3, 2.0 / 3}}});
  CHECK(std::abs(value - oracle) <= 1e-4);

  CHECK_THROWS_AS(path_action(m, ControlledPath{{0.0}, {xi}}), Error);
  try {
    path_action(m, ControlledPath{{0.0, 1.0}, {SimplexPoint{0.0, 1.0}, SimplexPoint{0.0, 1.0}}});
  } catch (...) {
    FAIL("zero velocity at a corner has finite action");
  }
  try {
    path_action(catalog::cyc3(), ControlledPath{{0.0, 1.0}, {SimplexPoint{1.0, 0.0, 0.0},
                                                             SimplexPoint{0.9, 0.0, 0.1}}});
    FAIL("expected InfiniteAction");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfiniteAction);
  }
}

TEST_CASE("terminal cost") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const SimplexPoint nu{0.7, 0.3};
  const FlowPath flow = mve_flow(cw, nu, 1.5, 0.01);
  CHECK(terminal_cost(cw, nu, flow.points.back(), 1.5, 4).value <= 1e-5);

  const SimplexPoint target{0.2, 0.8};
  const double v2 = terminal_cost(cw, nu, target, 3.0, 2).value;
  const double v4 = terminal_cost(cw, nu, target, 3.0, 4).value;
  const double v8 = terminal_cost(cw, nu, target, 3.0, 8).value;
  CHECK(v4 <= v2 * (1 + 1e-9));
  CHECK(v8 <= v4 * (1 + 1e-9));

  // semi-Lagrangian dynamic programme on x = xi[up]: 200 space intervals, 200 time
  // steps, continuous controls on a velocity grid with linear interpolation
  const Model m = catalog::nonint();
  const int nx = 200;
  const int nt = 200;
  const double T = 2.0;
  const double dt = T / nt;
  const double x0 = 1.0 / 3;
  std::vector<double> xs(nx + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = static_cast<double>(i) / nx;
  auto interp = [&](const std::vector<double>& f, double x) {
    const int i = std::min(nx - 1, static_cast<int>(x * nx));
    const double s = x * nx - i;
    return (1 - s) * f[i] + s * f[i + 1];
  };
  std::vector<double> value(nx + 1, INFINITY);
  for (int i = 1; i < nx; ++i)
    value[i] = dt * nonint_lagrangian_1d(0.5 * (x0 + xs[i]), (xs[i] - x0) / dt, 1.0, 2.0);
  for (int step = 1; step < nt; ++step) {
    std::vector<double> next(nx + 1, INFINITY);
    for (int i = 1; i < nx; ++i) {
      for (int k = 0; k <= 1200; ++k) {
        const double v = -3.0 + 6.0 * k / 1200;
        const double xp = xs[i] - v * dt;
        if (!(xp > xs[1] && xp < xs[nx - 1])) continue;
        next[i] = std::min(next[i], interp(value, xp) +
                                        dt * nonint_lagrangian_1d(0.5 * (xs[i] + xp), v, 1.0, 2.0));
      }
    }
    value = std::move(next);
  }
  const double oracle = interp(value, 2.0 / 3);
  const double computed =
      terminal_cost(m, SimplexPoint{2.0 / 3, 1.0 / 3}, SimplexPoint{1.0 / 3, 2.0 / 3}, T, 8).value;
  INFO(computed, " ", oracle);
  CHECK(std::abs(computed - oracle) <= 0.03 * oracle);

  // independent particles: S_T is the relative entropy of the best transport plan
  // pi(z, z') against nu(z) P_T(z, z'); one free parameter r = pi(up, down)
  const double decay = 1.0 - std::exp(-3.0 * T);
  const double p_du = decay / 3.0;
  const double p_ud = 2.0 * decay / 3.0;
  auto plan_entropy = [&](double r) {
    const double plan[4] = {1.0 / 3 - r, 1.0 / 3 + r, r, 1.0 / 3 - r};
    const double ref[4] = {2.0 / 3 * (1 - p_du), 2.0 / 3 * p_du, 1.0 / 3 * p_ud, 1.0 / 3 * (1 - p_ud)};
    double s = 0.0;
    for (int k = 0; k < 4; ++k)
      if (plan[k] > 0) s += plan[k] * std::log(plan[k] / ref[k]);
    return s;
  };
  double exact = INFINITY;
  for (int k = 0; k <= 100000; ++k) exact = std::min(exact, plan_entropy(k / 300000.0));
  CHECK(computed >= exact - 1e-6);
  CHECK(computed <= 1.02 * exact);
}

TEST_CASE("simplex projection") {
  const Vector p = project_to_simplex(Vector{{0.5, 0.8, -0.2}});
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p[0] == doctest::Approx(0.35));
  CHECK(p[1] == doctest::Approx(0.65));
  const Vector q = project_to_simplex(Vector{{0.2, 0.3, 0.5}});
  CHECK((q - Vector{{0.2, 0.3, 0.5}}).norm() < 1e-15);
}
