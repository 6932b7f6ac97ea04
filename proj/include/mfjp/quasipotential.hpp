#pragma once

#include <cstdint>
#include <vector>

#include "mfjp/action.hpp"
#include "mfjp/cost_matrix.hpp"
#include "mfjp/dynamics.hpp"
#include "mfjp/model.hpp"

namespace mfjp {

struct Ball {
  SimplexPoint center;
  double radius;
};

/// Node mask: 1 = present.
using NodeMask = std::vector<char>;

struct ShortestPath {
  double value = 0.0;
  std::vector<std::int64_t> nodes;
  ControlledPath path;  ///< polygonal minimiser with the optimal arc durations
};

/// Lattice M_1^M(Z) with arcs to every node within max-norm hop 2/M. Each arc costs
/// the straight-segment action minimised over its duration T in [1e-3, 1e3]
/// (Brent on log T). Arcs are built once; forbidden regions are node masks
/// applied per query, so one lattice serves all constrained searches.
class CostLattice {
 public:
  static constexpr double kTMin = 1e-3;
  static constexpr double kTMax = 1e3;

  CostLattice(const Model& model, int M, int threads = 0);

  int resolution() const noexcept { return index_.N(); }
  std::int64_t node_count() const noexcept { return index_.size(); }
  const LatticeIndex& index() const noexcept { return index_; }
  SimplexPoint point(std::int64_t node) const;
  std::int64_t nearest_node(const SimplexPoint& xi) const;

  /// Nodes outside every ball (open balls, max-norm).
  NodeMask mask_excluding(const std::vector<Ball>& forbidden) const;

  /// Arc (from, to) cost, or +inf when absent or of infinite action.
  double arc_cost(std::int64_t from, std::int64_t to) const;
  double arc_duration(std::int64_t from, std::int64_t to) const;
  std::int64_t arc_count() const noexcept { return static_cast<std::int64_t>(targets_.size()); }

  /// Dijkstra from source to target over nodes allowed by `mask` (all if null).
  /// Throws Unreachable.
  ShortestPath shortest_path(std::int64_t source, std::int64_t target,
                             const NodeMask* mask = nullptr) const;

  /// Dijkstra distances from source to every node (+inf where unreachable).
  std::vector<double> distances_from(std::int64_t source, const NodeMask* mask = nullptr) const;

  const Model& model() const noexcept { return *model_; }

 private:
  const Model* model_;
  LatticeIndex index_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int64_t> targets_;
  std::vector<double> costs_;
  std::vector<double> durations_;
};

/// Straight-segment action from `from` to `to` minimised over T in the lattice bracket;
/// returns (cost, T). Cost is +inf if every duration has infinite action.
std::pair<double, double> segment_cost(const Model& model, const Vector& from, const Vector& to);

/// Lattice with the given forbidden balls removed from its default mask.
struct MaskedLattice {
  CostLattice lattice;
  NodeMask mask;
};
MaskedLattice build_cost_lattice(const Model& model, int M, const std::vector<Ball>& forbidden = {},
                                 int threads = 0);

struct QuasipotentialResult {
  double value = 0.0;
  ControlledPath path;
  bool polished = false;
};

/// V(ν, ξ) by Dijkstra between the nearest lattice nodes. With `polish`, the
/// polygonal minimiser is refined by knot optimisation (never increasing the value).
QuasipotentialResult quasipotential(const CostLattice& lattice, const SimplexPoint& from,
                                    const SimplexPoint& to, bool polish = false);
QuasipotentialResult quasipotential(const Model& model, const SimplexPoint& from,
                                    const SimplexPoint& to, int M, bool polish = false);

/// One quarter of the smallest pairwise max-norm distance between attractors.
double default_exclusion_radius(const std::vector<SimplexPoint>& attractors);

struct VtildeOptions {
  double rho0 = -1.0;  ///< negative selects default_exclusion_radius
  int threads = 0;
};

/// Ṽ and V between stable attractors on a lattice of resolution M. Pairs disconnected
/// by the exclusions get +inf (Unreachable).
CostMatrix vtilde_matrix(const CostLattice& lattice, const std::vector<SimplexPoint>& attractors,
                         const VtildeOptions& options = {});
CostMatrix vtilde_matrix(const Model& model, const AttractorSet& attractors, int M,
                         const VtildeOptions& options = {});

/// V(K_i, ·) on every lattice node, one Dijkstra per attractor.
class QuasipotentialField {
 public:
  QuasipotentialField(const CostLattice& lattice, const std::vector<SimplexPoint>& attractors);

  /// Value at the nearest lattice node.
  double operator()(int attractor, const SimplexPoint& xi) const;
  const std::vector<double>& values(int attractor) const {
    return values_[static_cast<std::size_t>(attractor)];
  }

 private:
  const CostLattice* lattice_;
  std::vector<std::vector<double>> values_;
};

/// Exact quasipotential for a two-state model in the coordinate x = ξ(second state):
/// ∫ max(0, g) going up, ∫ max(0, -g) going down, with
/// g(x) = log[x λ_{1,0}(x) / ((1 - x) λ_{0,1}(x))]. Tanh-sinh quadrature to 1e-12,
/// split at the zeros of g. Throws Domain outside [0, 1].
double hj_oracle_1d(const Model& model, double x_from, double x_to);

}  // namespace mfjp
