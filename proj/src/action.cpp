#include "mfjp/action.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mfjp/dynamics.hpp"
#include "mfjp/error.hpp"

namespace mfjp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGradientTol = 1e-10;

// 8-point Gauss-Legendre on [0, 1]
constexpr std::array<double, 8> kGlNodes = {
    0.019855071751231856, 0.10166676129318664, 0.2372337950418355, 0.4082826787521751,
    0.5917173212478249,   0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
constexpr std::array<double, 8> kGlWeights = {
    0.050614268145188129, 0.11119051722668724, 0.15685332293894364, 0.18134189168918099,
    0.18134189168918099,  0.15685332293894364, 0.11119051722668724, 0.050614268145188129};

LagrangianValue infinite_value(int d) {
  LagrangianValue out;
  out.value = kInf;
  out.alpha = Vector::Zero(d);
  out.infinite = true;
  return out;
}

}  // namespace

double hamiltonian(const Model& model, const SimplexPoint& xi, const Vector& p) {
  double h = 0.0;
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = model.edges()[static_cast<std::size_t>(k)];
    h += xi[e.from] * model.rate(k, xi.span()) * std::expm1(p[e.to] - p[e.from]);
  }
  return h;
}

// ---------------------------------------------------------------------------
// ActionDensity

ActionDensity::ActionDensity(const Model& model, const SimplexPoint& xi)
    : edges_(&model.edges()),
      states_(model.states()),
      masses_(model.edge_count()),
      drift_(Vector::Zero(model.states())),
      full_support_(xi.weights().minCoeff() > 0.0) {
  if (xi.size() != states_) throw Error(ErrorKind::Domain, "simplex point has the wrong dimension");
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = (*edges_)[static_cast<std::size_t>(k)];
    masses_[k] = xi[e.from] * model.rate(k, xi.span());
    drift_[e.from] -= masses_[k];
    drift_[e.to] += masses_[k];
  }
}

// The supremum is finite iff v is a nonnegative combination of the active edge
// vectors; by Gale's theorem this fails exactly when some state set with no active
// edge leaving it has net negative velocity.
bool ActionDensity::feasible(const Vector& v) const {
  if (full_support_) return true;
  if (states_ > 20) throw Error(ErrorKind::CapExceeded, "feasibility check limited to 20 states");
  const double tol = 1e-13 * std::max(1.0, v.cwiseAbs().maxCoeff());
  std::vector<unsigned> leaves(static_cast<std::size_t>(states_), 0u);
  for (std::size_t k = 0; k < edges_->size(); ++k) {
    if (masses_[static_cast<Eigen::Index>(k)] > 0.0) {
      const Edge& e = (*edges_)[k];
      leaves[static_cast<std::size_t>(e.from)] |= 1u << e.to;
    }
  }
  const unsigned all = (1u << states_) - 1u;
  for (unsigned set = 1; set < all; ++set) {
    bool closed = true;
    double net = 0.0;
    for (int z = 0; z < states_ && closed; ++z) {
      if (!(set >> z & 1u)) continue;
      if (leaves[static_cast<std::size_t>(z)] & ~set) closed = false;
      net += v[z];
    }
    if (closed && net < -tol) return false;
  }
  return true;
}

LagrangianValue ActionDensity::operator()(const Vector& v, LagrangianMethod method,
                                          const Vector* warm_start) const {
  if (v.size() != states_) throw Error(ErrorKind::Domain, "velocity has the wrong dimension");
  if (std::abs(v.sum()) > 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::Domain, "velocity components must sum to zero");
  if (!feasible(v)) return infinite_value(states_);
  const bool two_state = states_ == 2 && edges_->size() == 2;
  if (method == LagrangianMethod::ClosedForm && !two_state)
    throw Error(ErrorKind::InvalidArgument, "closed-form Lagrangian needs a two-state model");
  if (method == LagrangianMethod::ClosedForm ||
      (method == LagrangianMethod::Auto && two_state))
    return closed_form(v);
  return generic(v, warm_start);
}

// Two states, gauge alpha(1) = 0, a = alpha(0). With m1 the mass on 0->1 and m2 the
// mass on 1->0, stationarity reads m2 y^2 - v0 y - m1 = 0 for y = e^a.
LagrangianValue ActionDensity::closed_form(const Vector& v) const {
  const bool forward = (*edges_)[0].from == 0;
  const double m1 = forward ? masses_[0] : masses_[1];
  const double m2 = forward ? masses_[1] : masses_[0];
  const double v0 = v[0];
  const double w0 = v0 - drift_[0];
  LagrangianValue out;
  out.alpha = Vector::Zero(2);
  double a = 0.0;
  if (m1 > 0.0 && m2 > 0.0) {
    const double root = std::sqrt(v0 * v0 + 4.0 * m1 * m2);
    const double y = v0 >= 0.0 ? (v0 + root) / (2.0 * m2) : (2.0 * m1) / (root - v0);
    a = std::log(y);
    out.value = a * w0 - m1 * tau(-a) - m2 * tau(a);
    out.gradient_norm = std::abs(w0 + m1 * std::expm1(-a) - m2 * std::expm1(a));
  } else if (m2 == 0.0) {
    // state 1 is empty: only 0 -> 1 can carry mass
    if (v0 > 0.0) return infinite_value(2);
    if (v0 == 0.0) {
      a = kInf;
      out.value = m1;
    } else {
      a = -std::log(-v0 / m1);
      out.value = a * v0 + v0 + m1;
    }
  } else {
    if (v0 < 0.0) return infinite_value(2);
    if (v0 == 0.0) {
      a = -kInf;
      out.value = m2;
    } else {
      a = std::log(v0 / m2);
      out.value = a * v0 - v0 + m2;
    }
  }
  out.alpha[0] = a;
  out.value = std::max(out.value, 0.0);
  return out;
}

LagrangianValue ActionDensity::generic(const Vector& v, const Vector* warm_start) const {
  const int n = states_ - 1;
  const Vector w = v - drift_;
  Vector alpha = Vector::Zero(states_);
  if (warm_start && warm_start->size() == states_ && warm_start->allFinite()) {
    alpha = *warm_start;
    alpha.array() -= alpha[n];
  }

  auto objective = [&](const Vector& a) {
    double f = a.dot(w);
    for (std::size_t k = 0; k < edges_->size(); ++k) {
      const Edge& e = (*edges_)[k];
      const double m = masses_[static_cast<Eigen::Index>(k)];
      if (m > 0.0) f -= m * tau(a[e.to] - a[e.from]);
    }
    return f;
  };
  auto gradient = [&](const Vector& a, Vector& g, Matrix& h) {
    g = w;
    h = Matrix::Zero(states_, states_);
    for (std::size_t k = 0; k < edges_->size(); ++k) {
      const Edge& e = (*edges_)[k];
      const double m = masses_[static_cast<Eigen::Index>(k)];
      if (m == 0.0) continue;
      const double u = a[e.to] - a[e.from];
      const double d1 = m * std::expm1(u);
      const double d2 = m * std::exp(u);
      g[e.to] -= d1;
      g[e.from] += d1;
      h(e.to, e.to) -= d2;
      h(e.from, e.from) -= d2;
      h(e.to, e.from) += d2;
      h(e.from, e.to) += d2;
    }
  };

  if (objective(alpha) < 0.0) alpha.setZero();
  double f = objective(alpha);
  Vector g;
  Matrix h;
  LagrangianValue out;
  out.converged = false;
  for (int iter = 0; iter < 500; ++iter) {
    gradient(alpha, g, h);
    const double gnorm = g.head(n).cwiseAbs().maxCoeff();
    out.gradient_norm = gnorm;
    if (gnorm <= kGradientTol) {
      out.converged = true;
      break;
    }
    Matrix neg = -h.topLeftCorner(n, n);
    const double scale = std::max(1e-300, neg.diagonal().cwiseAbs().maxCoeff());
    Vector step;
    for (double mu = 0.0;; mu = (mu == 0.0 ? 1e-12 * scale : mu * 100.0)) {
      Eigen::LLT<Matrix> llt(neg + mu * Matrix::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        step = llt.solve(g.head(n));
        if (step.allFinite()) break;
      }
      if (mu > 1e300) {
        step = g.head(n);
        break;
      }
    }
    const double slope = g.head(n).dot(step);
    bool accepted = false;
    for (double t = 1.0; t > 1e-10; t *= 0.5) {
      Vector trial = alpha;
      trial.head(n) += t * step;
      const double ft = objective(trial);
      if (std::isfinite(ft) && ft > f && ft >= f + 1e-4 * t * slope) {
        alpha = trial;
        f = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // below roundoff in f the Armijo test is blind; accept the Newton step if it
      // shrinks the gradient
      Vector trial = alpha;
      trial.head(n) += step;
      Vector gt;
      Matrix ht;
      gradient(trial, gt, ht);
      const double ft = objective(trial);
      if (!(gt.head(n).cwiseAbs().maxCoeff() < gnorm) || !std::isfinite(ft)) break;
      alpha = trial;
      f = ft;
    }
  }
  out.alpha = alpha;
  out.value = std::max(f, 0.0);
  return out;
}

LagrangianValue lagrangian(const Model& model, const SimplexPoint& xi, const Vector& v,
                           LagrangianMethod method) {
  return ActionDensity(model, xi)(v, method);
}

Vector controlled_rates(const Model& model, const SimplexPoint& xi, const Vector& alpha) {
  Vector l(model.edge_count());
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = model.edges()[static_cast<std::size_t>(k)];
    l[k] = model.rate(k, xi.span()) * std::exp(alpha[e.to] - alpha[e.from]);
  }
  return l;
}

double rate_form_density(const Model& model, const SimplexPoint& xi, const Vector& l) {
  double s = 0.0;
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = model.edges()[static_cast<std::size_t>(k)];
    const double lambda = model.rate(k, xi.span());
    const double m = xi[e.from] * lambda;
    if (m == 0.0) continue;
    s += m * tau_star(l[k] / lambda - 1.0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Path actions

namespace {

Vector lerp(const Vector& a, const Vector& b, double s) { return (1.0 - s) * a + s * b; }

double density_at(const Model& model, const Vector& x, const Vector& v) {
  const LagrangianValue lv = ActionDensity(model, SimplexPoint::normalized(x))(v);
  return lv.infinite ? kInf : lv.value;
}

double gl_panels(const Model& model, const Vector& a, const Vector& b, const Vector& v, double T,
                 int panels) {
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      const double s = (p + kGlNodes[i]) / panels;
      sum += kGlWeights[i] * density_at(model, lerp(a, b, s), v);
    }
  }
  return sum * T / panels;
}

bool converged_pair(double prev, double cur) {
  return std::abs(cur - prev) <= 1e-6 * std::abs(cur) || std::abs(cur - prev) <= 1e-14;
}

double segment_action(const Model& model, const Vector& a, const Vector& b, double T) {
  const Vector v = (b - a) / T;
  const double fa = density_at(model, a, v);
  const double fb = density_at(model, b, v);
  if (!std::isfinite(fa) || !std::isfinite(fb)) {
    double prev = gl_panels(model, a, b, v, T, 1);
    for (int panels = 2; panels <= 4096; panels *= 2) {
      const double cur = gl_panels(model, a, b, v, T, panels);
      if (!std::isfinite(cur)) return kInf;
      if (converged_pair(prev, cur)) return cur;
      prev = cur;
    }
    return prev;
  }
  // composite Simpson on 2^k intervals; endpoint and odd-node sums are reused
  double ends = fa + fb;
  double evens = 0.0;
  double odds = density_at(model, lerp(a, b, 0.5), v);
  if (!std::isfinite(odds)) return kInf;
  double prev = (ends + 4.0 * odds) * (T / 2.0) / 3.0;
  for (int intervals = 4; intervals <= (1 << 16); intervals *= 2) {
    evens += odds;
    odds = 0.0;
    for (int i = 1; i < intervals; i += 2)
      odds += density_at(model, lerp(a, b, static_cast<double>(i) / intervals), v);
    if (!std::isfinite(odds)) return kInf;
    const double cur = (ends + 4.0 * odds + 2.0 * evens) * (T / intervals) / 3.0;
    if (converged_pair(prev, cur)) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace

double segment_action_gl(const Model& model, const Vector& from, const Vector& to, double T) {
  return gl_panels(model, from, to, (to - from) / T, T, 1);
}

double path_action(const Model& model, const ControlledPath& path) {
  if (path.points.size() < 2 || path.points.size() != path.times.size())
    throw Error(ErrorKind::InvalidArgument, "path needs at least two nodes and one time per node");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.points.size(); ++k) {
    const double dt = path.times[k + 1] - path.times[k];
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "path times must increase strictly");
    const double s = segment_action(model, path.points[k].weights(), path.points[k + 1].weights(), dt);
    if (!std::isfinite(s))
      throw Error(ErrorKind::InfiniteAction, "segment " + std::to_string(k) + " has infinite action");
    total += s;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Terminal cost

Vector project_to_simplex(const Vector& y) {
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (y.array() - theta).cwiseMax(0.0).matrix();
}

namespace {

struct KnotProblem {
  const Model& model;
  std::vector<Vector> knots;  // including both fixed endpoints
  std::vector<double> durations;

  double segment(std::size_t k) const {
    return segment_action_gl(model, knots[k], knots[k + 1], durations[k]);
  }
  double total() const {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) s += segment(k);
    return s;
  }
};

/// Gradient with respect to the first d-1 coordinates of each interior knot (the
/// last coordinate absorbs the change).
Vector knot_gradient(KnotProblem& p) {
  const int d = static_cast<int>(p.knots.front().size());
  const std::size_t interior = p.knots.size() - 2;
  Vector g = Vector::Zero(static_cast<Eigen::Index>(interior) * (d - 1));
  constexpr double h = 1e-6;
  for (std::size_t k = 1; k <= interior; ++k) {
    const Vector saved = p.knots[k];
    for (int c = 0; c < d - 1; ++c) {
      auto local = [&](double shift) {
        p.knots[k] = saved;
        p.knots[k][c] += shift;
        p.knots[k][d - 1] -= shift;
        return p.segment(k - 1) + p.segment(k);
      };
      const bool up_ok = saved[d - 1] - h >= 0.0;
      const bool down_ok = saved[c] - h >= 0.0;
      double deriv = 0.0;
      if (up_ok && down_ok)
        deriv = (local(h) - local(-h)) / (2.0 * h);
      else if (up_ok)
        deriv = (local(h) - local(0.0)) / h;
      else if (down_ok)
        deriv = (local(0.0) - local(-h)) / h;
      if (!std::isfinite(deriv)) deriv = 0.0;
      g[static_cast<Eigen::Index>(k - 1) * (d - 1) + c] = deriv;
    }
    p.knots[k] = saved;
  }
  return g;
}

std::vector<Vector> moved_knots(const std::vector<Vector>& knots, const Vector& step) {
  const int d = static_cast<int>(knots.front().size());
  std::vector<Vector> out = knots;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    Vector x = knots[k];
    for (int c = 0; c < d - 1; ++c) {
      const double delta = step[static_cast<Eigen::Index>(k - 1) * (d - 1) + c];
      x[c] += delta;
      x[d - 1] -= delta;
    }
    out[k] = project_to_simplex(x);
  }
  return out;
}

Vector knot_difference(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  const int d = static_cast<int>(a.front().size());
  Vector out(static_cast<Eigen::Index>(a.size() - 2) * (d - 1));
  for (std::size_t k = 1; k + 1 < a.size(); ++k)
    out.segment(static_cast<Eigen::Index>(k - 1) * (d - 1), d - 1) = (a[k] - b[k]).head(d - 1);
  return out;
}

struct KnotResult {
  std::vector<Vector> knots;
  bool converged;
  int iterations;
};

KnotResult optimize_knots(const Model& model, std::vector<Vector> knots,
                          const std::vector<double>& durations) {
  KnotProblem p{model, std::move(knots), durations};
  if (p.knots.size() <= 2) return {p.knots, true, 0};
  double f = p.total();
  if (!std::isfinite(f)) throw Error(ErrorKind::InfiniteAction, "initial path has infinite action");
  Vector g = knot_gradient(p);
  double step_size = 1e-2 / std::max(1e-12, g.cwiseAbs().maxCoeff());
  int small_steps = 0;
  int iter = 0;
  constexpr int kMaxIter = 5000;
  for (; iter < kMaxIter && small_steps < 3; ++iter) {
    bool accepted = false;
    std::vector<Vector> next;
    double f_next = f;
    for (double t = step_size; t > 1e-16; t *= 0.5) {
      next = moved_knots(p.knots, -t * g);
      KnotProblem trial{model, next, durations};
      f_next = trial.total();
      const Vector moved = knot_difference(p.knots, next);
      if (std::isfinite(f_next) && f_next <= f - 1e-4 * g.dot(moved)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Vector s = knot_difference(next, p.knots);
    const double improvement = (f - f_next) / std::max(std::abs(f_next), 1e-12);
    small_steps = improvement < 1e-7 ? small_steps + 1 : 0;
    p.knots = std::move(next);
    f = f_next;
    const Vector g_next = knot_gradient(p);
    const Vector y = g_next - g;
    const double sy = s.dot(y);
    step_size = sy > 0.0 ? s.squaredNorm() / sy
                         : 1e-2 / std::max(1e-12, g_next.cwiseAbs().maxCoeff());
    g = g_next;
    if (g.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return {p.knots, iter < kMaxIter, iter};
}

ControlledPath to_path(const std::vector<Vector>& knots, double dt) {
  ControlledPath path;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    path.times.push_back(dt * static_cast<double>(k));
    path.points.push_back(SimplexPoint::normalized(knots[k]));
  }
  path.times.back() = dt * static_cast<double>(knots.size() - 1);
  return path;
}

}  // namespace

TerminalCostResult terminal_cost(const Model& model, const SimplexPoint& from,
                                 const SimplexPoint& to, double T, int segments) {
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "terminal cost needs T > 0");
  if (segments < 1) throw Error(ErrorKind::InvalidArgument, "terminal cost needs at least one segment");

  std::vector<Vector> knots;
  TerminalCostResult coarse;
  bool have_coarse = false;
  if (segments % 2 == 0 && segments >= 2) {
    coarse = terminal_cost(model, from, to, T, segments / 2);
    have_coarse = true;
    for (std::size_t k = 0; k + 1 < coarse.path.points.size(); ++k) {
      knots.push_back(coarse.path.points[k].weights());
      knots.push_back(0.5 * (coarse.path.points[k].weights() + coarse.path.points[k + 1].weights()));
    }
    knots.push_back(to.weights());
  } else {
    for (int k = 0; k <= segments; ++k)
      knots.push_back(lerp(from.weights(), to.weights(), static_cast<double>(k) / segments));
  }

  const double dt = T / segments;
  KnotResult opt =
      optimize_knots(model, std::move(knots), std::vector<double>(static_cast<std::size_t>(segments), dt));
  TerminalCostResult out;
  out.path = to_path(opt.knots, dt);
  out.path.points.front() = from;
  out.path.points.back() = to;
  out.value = path_action(model, out.path);
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  if (have_coarse && coarse.value < out.value) {
    // the coarse optimum is also a feasible path with this many segments
    std::vector<Vector> refined;
    for (std::size_t k = 0; k + 1 < coarse.path.points.size(); ++k) {
      refined.push_back(coarse.path.points[k].weights());
      refined.push_back(0.5 * (coarse.path.points[k].weights() + coarse.path.points[k + 1].weights()));
    }
    refined.push_back(to.weights());
    out.path = to_path(refined, dt);
    out.path.points.front() = from;
    out.path.points.back() = to;
    out.value = coarse.value;
  }
  return out;
}

TerminalCostResult polish_path(const Model& model, const ControlledPath& path) {
  if (path.points.size() < 2) throw Error(ErrorKind::InvalidArgument, "path needs two nodes");
  std::vector<Vector> knots;
  std::vector<double> durations;
  for (std::size_t k = 0; k < path.points.size(); ++k) {
    knots.push_back(path.points[k].weights());
    if (k > 0) durations.push_back(path.times[k] - path.times[k - 1]);
  }
  const double before = path_action(model, path);
  KnotResult opt = optimize_knots(model, std::move(knots), durations);
  TerminalCostResult out;
  out.path.times = path.times;
  for (const auto& x : opt.knots) out.path.points.push_back(SimplexPoint::normalized(x));
  out.path.points.front() = path.points.front();
  out.path.points.back() = path.points.back();
  out.value = path_action(model, out.path);
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  if (before < out.value) {
    out.path = path;
    out.value = before;
  }
  return out;
}

}  // namespace mfjp
