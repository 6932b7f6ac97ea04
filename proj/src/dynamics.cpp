#include "mfjp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "mfjp/error.hpp"
#include "mfjp/parallel.hpp"
#include "mfjp/rng.hpp"

namespace mfjp {

namespace {

constexpr double kFixedPointTol = 1e-10;
constexpr double kJacobianStep = 1e-6;
constexpr double kStabilityTol = 1e-10;

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Vector drift_at(const Model& model, const Vector& x) {
  Vector out(x.size());
  drift(model, {x.data(), static_cast<std::size_t>(x.size())},
        {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

/// Largest total exit rate at x; sets the explicit step size.
double stiffness(const Model& model, const Vector& x) {
  std::vector<double> r(static_cast<std::size_t>(model.edge_count()));
  model.rates({x.data(), static_cast<std::size_t>(x.size())}, r);
  Vector out = Vector::Zero(model.states());
  for (std::size_t k = 0; k < r.size(); ++k) out[model.edges()[k].from] += std::abs(r[k]);
  return std::max(1.0, out.maxCoeff());
}

void check_stage(const Vector& x) {
  if (x.minCoeff() < -1e-9)
    throw Error(ErrorKind::StepRejected, "integration stage left the simplex (min coordinate " +
                                             std::to_string(x.minCoeff()) + ")");
}

void renormalize(Vector& x) {
  x = x.cwiseMax(0.0);
  x /= x.sum();
}

void rk4_step(const Model& model, Vector& x, double h) {
  const Vector k1 = drift_at(model, x);
  Vector stage = x + 0.5 * h * k1;
  check_stage(stage);
  const Vector k2 = drift_at(model, stage);
  stage = x + 0.5 * h * k2;
  check_stage(stage);
  const Vector k3 = drift_at(model, stage);
  stage = x + h * k3;
  check_stage(stage);
  const Vector k4 = drift_at(model, stage);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_stage(x);
  renormalize(x);
}

/// Flows x for duration t with an automatically chosen step.
void advance(const Model& model, Vector& x, double t) {
  const double h_max = 0.25 / stiffness(model, x);
  const auto steps = static_cast<long>(std::ceil(t / h_max));
  const double h = t / static_cast<double>(steps);
  for (long s = 0; s < steps; ++s) rk4_step(model, x, h);
}

Vector full_from_tangent(const Vector& y) {
  Vector x(y.size() + 1);
  x.head(y.size()) = y;
  x[y.size()] = 1.0 - y.sum();
  return x;
}

bool inside(const Vector& x) { return x.minCoeff() >= 0.0; }

std::vector<std::complex<double>> tangent_spectrum(const Model& model, const SimplexPoint& xi) {
  const Matrix j = tangent_jacobian(model, xi);
  std::vector<std::complex<double>> out;
  if (j.size() == 0) return out;
  Eigen::EigenSolver<Matrix> es(j, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()[i]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

/// Hyperbolic points are classified by the linearisation. When the largest real part
/// is within tolerance of zero, the point is probed by flowing from perturbations of
/// size 1e-2 along each tangent axis and checking that every one moves closer.
Stability classify(const Model& model, const SimplexPoint& xi,
                   const std::vector<std::complex<double>>& spectrum) {
  bool any_negative = false;
  bool any_positive = false;
  for (const auto& ev : spectrum) {
    if (ev.real() < -kStabilityTol) any_negative = true;
    if (ev.real() > kStabilityTol) any_positive = true;
  }
  const bool hyperbolic =
      std::all_of(spectrum.begin(), spectrum.end(),
                  [](const auto& ev) { return std::abs(ev.real()) > kStabilityTol; });
  if (!any_positive && !hyperbolic) {
    const int n = model.states() - 1;
    bool attracting = true;
    for (int c = 0; c < n && attracting; ++c) {
      for (double sign : {1.0, -1.0}) {
        Vector x = xi.weights();
        x[c] += sign * 1e-2;
        x[n] -= sign * 1e-2;
        if (!inside(x)) continue;
        const double before = (x - xi.weights()).cwiseAbs().maxCoeff();
        advance(model, x, 100.0);
        if (!((x - xi.weights()).cwiseAbs().maxCoeff() < before)) attracting = false;
      }
    }
    if (attracting) return Stability::Stable;
    return any_negative ? Stability::Saddle : Stability::Unstable;
  }
  if (!any_positive) return Stability::Stable;
  return any_negative ? Stability::Saddle : Stability::Unstable;
}

SimplexPoint random_simplex_point(CounterRng& rng, int d) {
  Vector w(d);
  for (int i = 0; i < d; ++i) w[i] = rng.exponential();
  return SimplexPoint::normalized(w);
}

/// Degenerate equilibria are only located to about eps^(1/k), so Newton lands on a
/// small cloud of points. Two polished points are one equilibrium when the drift stays
/// negligible on the segment between them.
bool flat_segment(const Model& model, const SimplexPoint& a, const SimplexPoint& b) {
  if (distance(a, b) > 1e-2) return false;
  for (int k = 1; k < 16; ++k) {
    const double s = k / 16.0;
    const Vector x = (1.0 - s) * a.weights() + s * b.weights();
    if (max_abs(drift_at(model, x)) > 1e-8) return false;
  }
  return true;
}

bool lexicographic_less(const SimplexPoint& a, const SimplexPoint& b) {
  return std::lexicographical_compare(a.weights().begin(), a.weights().end(),
                                      b.weights().begin(), b.weights().end());
}

}  // namespace

// ---------------------------------------------------------------------------

void drift(const Model& model, std::span<const double> xi, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto& edges = model.edges();
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = edges[static_cast<std::size_t>(k)];
    const double flux = xi[static_cast<std::size_t>(e.from)] * model.rate(k, xi);
    out[static_cast<std::size_t>(e.from)] -= flux;
    out[static_cast<std::size_t>(e.to)] += flux;
  }
}

Vector drift(const Model& model, const SimplexPoint& xi) {
  if (xi.size() != model.states())
    throw Error(ErrorKind::Domain, "simplex point has the wrong dimension");
  return drift_at(model, xi.weights());
}

FlowPath mve_flow(const Model& model, const SimplexPoint& start, double t_max, double dt) {
  if (!(dt > 0.0) || !(t_max >= dt))
    throw Error(ErrorKind::InvalidArgument, "flow needs dt > 0 and t_max >= dt");
  if (start.size() != model.states())
    throw Error(ErrorKind::Domain, "simplex point has the wrong dimension");
  FlowPath path;
  Vector x = start.weights();
  double t = 0.0;
  path.times.push_back(t);
  path.points.push_back(start);
  while (t < t_max) {
    double h = dt;
    if (t + h > t_max * (1.0 - 1e-12)) h = t_max - t;
    rk4_step(model, x, h);
    t = (t + h > t_max * (1.0 - 1e-12)) ? t_max : t + h;
    path.times.push_back(t);
    path.points.emplace_back(x);
  }
  path.terminal_drift_norm = max_abs(drift_at(model, x));
  return path;
}

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Saddle: return "saddle";
  }
  return "unknown";
}

std::vector<SimplexPoint> AttractorSet::stable() const {
  std::vector<SimplexPoint> out;
  for (const auto& fp : fixed_points)
    if (fp.stability == Stability::Stable) out.push_back(fp.location);
  return out;
}

std::size_t AttractorSet::stable_count() const {
  return static_cast<std::size_t>(
      std::count_if(fixed_points.begin(), fixed_points.end(),
                    [](const FixedPoint& fp) { return fp.stability == Stability::Stable; }));
}

Matrix tangent_jacobian(const Model& model, const SimplexPoint& xi) {
  const int d = model.states();
  const int n = d - 1;
  Matrix j(n, n);
  for (int c = 0; c < n; ++c) {
    Vector plus = xi.weights();
    Vector minus = xi.weights();
    plus[c] += kJacobianStep;
    plus[n] -= kJacobianStep;
    minus[c] -= kJacobianStep;
    minus[n] += kJacobianStep;
    const Vector diff = drift_at(model, plus) - drift_at(model, minus);
    j.col(c) = diff.head(n) / (2.0 * kJacobianStep);
  }
  return j;
}

bool polish_fixed_point(const Model& model, SimplexPoint& xi) {
  const int n = model.states() - 1;
  Vector y = xi.weights().head(n);
  Vector f = drift_at(model, full_from_tangent(y));
  double norm = max_abs(f);
  for (int iter = 0; iter < 60 && norm > kFixedPointTol * 1e-3; ++iter) {
    const Matrix j = tangent_jacobian(model, SimplexPoint::normalized(full_from_tangent(y)));
    Eigen::FullPivLU<Matrix> lu(j);
    if (!lu.isInvertible()) break;
    const Vector step = lu.solve(-f.head(n));
    bool improved = false;
    for (double a = 1.0; a > 1e-6; a *= 0.5) {
      const Vector trial = y + a * step;
      const Vector full = full_from_tangent(trial);
      if (!inside(full)) continue;
      const Vector ft = drift_at(model, full);
      if (max_abs(ft) < norm) {
        y = trial;
        f = ft;
        norm = max_abs(ft);
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (norm > kFixedPointTol) return false;
  xi = SimplexPoint::normalized(full_from_tangent(y));
  return max_abs(drift_at(model, xi.weights())) <= kFixedPointTol;
}

AttractorSet find_attractors(const Model& model, const AttractorOptions& options) {
  const int d = model.states();
  const int n_starts = options.n_starts == 0 ? 10 * d : options.n_starts;
  if (n_starts < 10 * d)
    throw Error(ErrorKind::InvalidArgument,
                "attractor search needs at least " + std::to_string(10 * d) + " starts");

  struct StartResult {
    std::vector<SimplexPoint> found;
    std::vector<StartDiagnostic> diagnostics;
  };
  std::vector<StartResult> results(static_cast<std::size_t>(n_starts));

  parallel_for(n_starts, options.threads, [&](long s) {
    StartResult& res = results[static_cast<std::size_t>(s)];
    CounterRng rng(options.seed, static_cast<std::uint64_t>(s), 0x61747472ULL);
    const SimplexPoint start = random_simplex_point(rng, d);

    SimplexPoint direct = start;
    if (polish_fixed_point(model, direct)) res.found.push_back(direct);

    Vector x = start.weights();
    bool settled = false;
    for (double t = 0.0; t < 5000.0 && !settled; t += 50.0) {
      advance(model, x, 50.0);
      if (max_abs(drift_at(model, x)) > 1e-5) continue;
      SimplexPoint candidate(x);
      if (!polish_fixed_point(model, candidate)) {
        res.diagnostics.push_back({static_cast<int>(s), ErrorKind::NonConvergent,
                                   "Newton polishing stalled after flowing to t=" +
                                       std::to_string(t + 50.0)});
        continue;
      }
      // non-hyperbolic attractors are approached only algebraically, hence the loose radius
      if (distance(candidate, SimplexPoint(x)) < 5e-2 &&
          classify(model, candidate, tangent_spectrum(model, candidate)) == Stability::Stable) {
        res.found.push_back(candidate);
        settled = true;
      }
    }
    if (!settled)
      res.diagnostics.push_back({static_cast<int>(s), ErrorKind::LimitCycleSuspected,
                                 "trajectory did not settle at a stable point by t=5000"});
  });

  AttractorSet set;
  std::vector<SimplexPoint> all;
  for (auto& r : results) {
    all.insert(all.end(), r.found.begin(), r.found.end());
    set.diagnostics.insert(set.diagnostics.end(), r.diagnostics.begin(), r.diagnostics.end());
  }
  for (const auto& diag : set.diagnostics)
    if (diag.kind == ErrorKind::LimitCycleSuspected)
      throw Error(ErrorKind::LimitCycleSuspected,
                  "start " + std::to_string(diag.start) + ": " + diag.message);

  std::sort(all.begin(), all.end(), lexicographic_less);
  std::vector<SimplexPoint> unique;
  for (const auto& p : all) {
    auto same = std::find_if(unique.begin(), unique.end(), [&](const SimplexPoint& q) {
      return distance(p, q) < options.merge_radius || flat_segment(model, p, q);
    });
    if (same == unique.end()) {
      unique.push_back(p);
    } else if (max_abs(drift_at(model, p.weights())) < max_abs(drift_at(model, same->weights()))) {
      *same = p;
    }
  }
  std::sort(unique.begin(), unique.end(), lexicographic_less);
  for (const auto& p : unique) {
    FixedPoint fp{p, Stability::Stable, tangent_spectrum(model, p),
                  max_abs(drift_at(model, p.weights()))};
    fp.stability = classify(model, p, fp.spectrum);
    set.fixed_points.push_back(std::move(fp));
  }
  return set;
}

int basin_of(const Model& model, const AttractorSet& attractors, const SimplexPoint& start,
             double t_cap) {
  const auto stable = attractors.stable();
  if (stable.empty()) throw Error(ErrorKind::InvalidArgument, "no stable attractors");
  Vector x = start.weights();
  for (double t = 0.0;; t += 1.0) {
    const SimplexPoint here(x);
    for (std::size_t i = 0; i < stable.size(); ++i)
      if (distance(here, stable[i]) < 1e-4) return static_cast<int>(i);
    if (max_abs(drift_at(model, x)) < 1e-14)
      throw Error(ErrorKind::Unresolved, "flow is stuck at a non-stable equilibrium");
    if (t >= t_cap) break;
    advance(model, x, 1.0);
  }
  throw Error(ErrorKind::Unresolved,
              "flow did not reach a stable attractor by t=" + std::to_string(t_cap));
}

}  // namespace mfjp
