#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfjp/cost_matrix.hpp"
#include "mfjp/model.hpp"

namespace mfjp {

/// Subset of the attractor indices {0, .., l-1} as a bit mask.
using Subset = std::uint32_t;

constexpr int kMaxAttractors = 8;

/// Ties between costs are decided with this relative tolerance.
constexpr double kTieTolerance = 1e-12;

/// A W-graph on {0, .., l-1}: every node outside W has one arrow, nodes in W have none,
/// and there are no closed cycles.
struct WGraph {
  Subset w = 0;
  std::vector<int> target;  ///< arrow target per node, -1 for members of W

  int arrow_count() const;
  /// Member of W reached by following the arrows from `node`.
  int root(int node) const;
};

/// All W-graphs, in lexicographic order of the target vector.
std::vector<WGraph> enumerate_wgraphs(int l, Subset w);

/// Sum of the costs along the arrows of g; +inf when any arrow is unreachable.
double wgraph_cost(const Matrix& vtilde, const WGraph& g);

struct WGraphMin {
  double value;
  WGraph graph;
};
/// Exact minimum of the graph cost over G(W). Throws AllInfinite when every graph
/// uses an unreachable pair.
WGraphMin min_wgraph_cost(const Matrix& vtilde, Subset w);

/// Freidlin-Wentzell graph quantities for every nonempty W.
class FwQuantities {
 public:
  explicit FwQuantities(const Matrix& vtilde, int threads = 0);

  int size() const noexcept { return l_; }
  /// min over G(W)
  double min_cost(Subset w) const { return min_all_[w]; }
  /// min over G_{i,j}(W), +inf when empty
  double min_cost_via(Subset w, int i, int j) const;
  double i_ij(Subset w, int i, int j) const;
  double i_i(Subset w, int i) const;
  /// W(i) = min over G({i})
  double w_of(int i) const { return min_cost(Subset{1} << i); }
  std::vector<double> w_values() const;

 private:
  int l_;
  std::vector<double> min_all_;
  std::vector<double> min_via_;  // [w][i][j]
};

inline FwQuantities fw_quantities(const Matrix& vtilde, int threads = 0) {
  return FwQuantities(vtilde, threads);
}

/// s(xi) = min_i {W(i) + V(K_i, xi)} - min_j W(j).
double stationary_rate(const std::vector<double>& w_values,
                       const std::function<double(int, const SimplexPoint&)>& v_from,
                       const SimplexPoint& xi);

/// Indices i with W(i) within 1e-9 of the minimum.
std::vector<int> global_minimisers(const std::vector<double>& w_values);

struct LambdaResult {
  double lambda = 0.0;       ///< graph formula
  double cross_check = 0.0;  ///< max V_k from the cycle hierarchy
  bool agree = true;
};
/// Throws Disagreement when the two computations differ by more than 1e-9.
LambdaResult lambda_constant(const Matrix& vtilde);

/// Graph formula alone: min over G({i}) minus min over G({i, j}).
double lambda_graph_formula(const FwQuantities& fw);

struct CycleNode {
  int level = 0;
  std::vector<int> members;  ///< indices into the previous level; attractor index at level 0
  double vtilde = 0.0;       ///< exit cost
  double vhat = 0.0;         ///< largest exit cost among members (unused at level 0)
  std::vector<int> arrows;   ///< minimising targets at this level
};

struct HierarchyReport {
  Matrix vtilde;
  std::vector<double> w;
  double lambda = 0.0;
  double lambda_cross_check = 0.0;
  int m = 0;  ///< levels[m + 1] is the singleton top
  std::vector<std::vector<CycleNode>> levels;
  std::vector<Matrix> level_costs;   ///< pair costs between the elements of each level
  std::vector<std::vector<int>> a;   ///< a[k]: indices into levels[k]
  std::vector<double> c;             ///< c[k] for k = 0..m
  double c_star = 0.0;
  std::vector<int> l0_tilde;         ///< global minimisers of s (attractor indices)
  std::string tree;

  /// Attractor indices inside a node.
  std::vector<int> attractors_of(int level, int node) const;
};

/// Cycle hierarchy, A_k sets, c_k and c*. Throws NonTermination if the recursion does not
/// reach a singleton by level l + 1 and Disagreement if A_0 differs from the minimisers of W.
HierarchyReport build_cycle_hierarchy(const Matrix& vtilde, int threads = 0);

inline HierarchyReport build_cycle_hierarchy(const CostMatrix& cost, int threads = 0) {
  return build_cycle_hierarchy(cost.vtilde, threads);
}

}  // namespace mfjp
