#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "mfjp/error.hpp"
#include "mfjp/model.hpp"

namespace mfjp {

/// Mean-field drift Λ*_ξ ξ: net probability flux into each state. Components sum to zero.
Vector drift(const Model& model, const SimplexPoint& xi);
void drift(const Model& model, std::span<const double> xi, std::span<double> out);

struct FlowPath {
  std::vector<double> times;
  std::vector<SimplexPoint> points;
  double terminal_drift_norm = 0.0;  ///< max-norm of the drift at the last point
};

/// Classical RK4 with renormalisation after each step. The last step is shortened to
/// land on t_max. Throws StepRejected if a stage point leaves the simplex by more
/// than 1e-9.
FlowPath mve_flow(const Model& model, const SimplexPoint& start, double t_max, double dt);

enum class Stability { Stable, Unstable, Saddle };

std::string_view to_string(Stability s);

struct FixedPoint {
  SimplexPoint location;
  Stability stability;
  std::vector<std::complex<double>> spectrum;  ///< tangent-space Jacobian eigenvalues
  double drift_norm = 0.0;
};

struct StartDiagnostic {
  int start = 0;
  ErrorKind kind = ErrorKind::NonConvergent;
  std::string message;
};

/// All fixed points found, ordered lexicographically by location. The stable ones,
/// in that same order, form the attractor index set L.
struct AttractorSet {
  std::vector<FixedPoint> fixed_points;
  std::vector<StartDiagnostic> diagnostics;

  std::vector<SimplexPoint> stable() const;
  std::size_t stable_count() const;
};

/// Tangent-space Jacobian of the drift (coordinates ξ(0..d-2), last state eliminated),
/// by central differences with step 1e-6.
Matrix tangent_jacobian(const Model& model, const SimplexPoint& xi);

/// Newton polishing of a fixed-point guess; returns false if it does not reach
/// drift norm 1e-10 inside the simplex.
bool polish_fixed_point(const Model& model, SimplexPoint& xi);

struct AttractorOptions {
  int n_starts = 0;  ///< 0 means 10 * |Z|; smaller positive values are rejected
  std::uint64_t seed = 1;
  int threads = 0;
  double merge_radius = 1e-6;
};

/// Multi-start search. Every start is flowed until it settles near a stable point and
/// also polished directly by Newton so unstable equilibria are found too. A start
/// whose trajectory never settles raises LimitCycleSuspected.
AttractorSet find_attractors(const Model& model, const AttractorOptions& options = {});

/// Index into attractors.stable() of the attractor whose 1e-4 neighbourhood the flow
/// from `start` enters. Throws Unresolved if the flow does not get there by t_cap,
/// or stops at a non-stable equilibrium.
int basin_of(const Model& model, const AttractorSet& attractors, const SimplexPoint& start,
             double t_cap = 1e4);

}  // namespace mfjp
