#pragma once

#include <Eigen/Dense>

namespace mfjp {

/// Pairwise costs between the stable attractors K_1..K_l (0-based here). Unreachable
/// pairs hold +inf; diagonals are ignored.
struct CostMatrix {
  Eigen::MatrixXd vtilde;  ///< cost from K_i to K_j avoiding the other attractors
  Eigen::MatrixXd v;       ///< unconstrained quasipotential V(K_i, K_j)

  int size() const noexcept { return static_cast<int>(vtilde.rows()); }
};

}  // namespace mfjp
