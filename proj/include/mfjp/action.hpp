#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mfjp/model.hpp"

namespace mfjp {

/// τ(u) = e^u - u - 1, with a series for small |u| to avoid cancellation.
template <class T>
T tau(T u) {
  using std::abs;
  using std::exp;
  using std::expm1;
  if (abs(u) < T(1e-4)) return u * u * (T(0.5) + u * (T(1) / T(6) + u / T(24)));
  return expm1(u) - u;
}

/// Legendre transform of τ: +inf below -1, 1 at -1, (u+1) log(u+1) - u above.
template <class T>
T tau_star(T u) {
  using std::log1p;
  if (u < T(-1)) return std::numeric_limits<T>::infinity();
  if (u == T(-1)) return T(1);
  if (u == T(0)) return T(0);
  return (u + T(1)) * log1p(u) - u;
}

/// H(ξ, p) = Σ_e ξ(z) λ_e(ξ) (e^{p(z') - p(z)} - 1).
double hamiltonian(const Model& model, const SimplexPoint& xi, const Vector& p);

struct LagrangianValue {
  double value = 0.0;   ///< +inf when `infinite`
  Vector alpha;         ///< dual maximiser, alpha(last) = 0
  bool infinite = false;
  bool converged = true;
  double gradient_norm = 0.0;
};

enum class LagrangianMethod { Auto, Generic, ClosedForm };

/// Local action density sup_α { α·(v - Λ*_ξ ξ) - Σ_e τ(Δα) ξ(z) λ_e(ξ) }.
/// Auto uses the scalar closed form for two-state models. An unattainable velocity
/// (mass leaving or bypassing empty states) is flagged `infinite`.
LagrangianValue lagrangian(const Model& model, const SimplexPoint& xi, const Vector& v,
                           LagrangianMethod method = LagrangianMethod::Auto);

/// Dual problem at a fixed point ξ: edge masses ξ(z) λ_e(ξ) and the drift are
/// computed once, so many velocities can be evaluated cheaply (warm starts allowed).
class ActionDensity {
 public:
  ActionDensity(const Model& model, const SimplexPoint& xi);

  LagrangianValue operator()(const Vector& v, LagrangianMethod method = LagrangianMethod::Auto,
                             const Vector* warm_start = nullptr) const;

  const Vector& masses() const noexcept { return masses_; }
  const Vector& drift() const noexcept { return drift_; }

 private:
  bool feasible(const Vector& v) const;
  LagrangianValue closed_form(const Vector& v) const;
  LagrangianValue generic(const Vector& v, const Vector* warm_start) const;

  const std::vector<Edge>* edges_;
  int states_;
  Vector masses_;
  Vector drift_;
  bool full_support_;
};

/// Controlled rates l_e = λ_e(ξ) e^{α(z') - α(z)} for a dual maximiser α.
Vector controlled_rates(const Model& model, const SimplexPoint& xi, const Vector& alpha);

/// Σ_e ξ(z) λ_e τ*(l_e / λ_e - 1).
double rate_form_density(const Model& model, const SimplexPoint& xi, const Vector& l);

/// Piecewise-linear path with strictly increasing times.
struct ControlledPath {
  std::vector<double> times;
  std::vector<SimplexPoint> points;
};

/// ∫ L(μ, μ̇) dt along the interpolant, composite Simpson per segment refined by
/// doubling until successive values agree to 1e-6 relative. Segments with an
/// infinite endpoint density use an open Gauss-Legendre rule instead.
/// Throws InfiniteAction.
double path_action(const Model& model, const ControlledPath& path);

/// Action of one straight segment of duration T by 8-point Gauss-Legendre; +inf if
/// some node has infinite density.
double segment_action_gl(const Model& model, const Vector& from, const Vector& to, double T);

struct TerminalCostResult {
  double value = 0.0;
  ControlledPath path;
  bool converged = true;
  int iterations = 0;
};

/// Upper bound on S_T(ξ|ν): minimises the path action over piecewise-linear paths
/// made of `segments` equal-duration pieces (segments - 1 free interior knots).
/// Knot coordinates move by projected gradient descent with Barzilai-Borwein steps,
/// central-difference gradients and Armijo backtracking, stopping when the relative
/// improvement drops below 1e-7. Even segment counts are warm-started from the
/// optimum at half the count, so the value never increases along 2, 4, 8, ...
TerminalCostResult terminal_cost(const Model& model, const SimplexPoint& from,
                                 const SimplexPoint& to, double T, int segments);

/// Knot optimisation of an existing path with its own segment durations; endpoints
/// and times stay fixed. Never returns a worse path than the input.
TerminalCostResult polish_path(const Model& model, const ControlledPath& path);

/// Euclidean projection onto the probability simplex.
Vector project_to_simplex(const Vector& y);

}  // namespace mfjp
