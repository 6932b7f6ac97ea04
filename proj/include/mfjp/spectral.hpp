#pragma once

#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "mfjp/model.hpp"

namespace mfjp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Generator of the N-particle empirical measure on the enumerated lattice.
struct GeneratorMatrix {
  int N = 0;
  LatticeIndex index;
  SparseMatrix q;

  std::int64_t dimension() const noexcept { return index.size(); }
  /// Two-state models give a birth-death chain; node k of the chain has k particles in
  /// the second state.
  bool birth_death() const noexcept { return index.dim() == 2; }
  std::int64_t chain_node(int k) const;
};

constexpr std::int64_t kDenseCap = 4000;
constexpr std::int64_t kTridiagonalCap = 200001;

GeneratorMatrix build_generator(const Model& model, int N, int threads = 0);

/// Solves p Q = 0 with p summing to one. Birth-death chains use the detailed-balance
/// product in log space and are cross-checked against the residual.
Vector invariant_measure(const GeneratorMatrix& gen);

/// Natural log of the invariant measure; exact in the tails for birth-death chains.
Vector invariant_log_measure(const GeneratorMatrix& gen);

struct Reversibility {
  double residual = 0.0;
  bool reversible = false;
};
Reversibility check_reversibility(const GeneratorMatrix& gen, const Vector& measure);

/// Modulus of the second eigenvalue of a reversible generator.
double second_eigenvalue(const GeneratorMatrix& gen, const Vector& measure);

/// Eigenpairs of the symmetrised generator, eigenvalues ascending and nonnegative
/// (eigenvalue k of -Q). Dense, so limited to kDenseCap states.
struct Spectrum {
  Vector values;
  Matrix vectors;  ///< orthonormal columns in the sqrt(p)-weighted coordinates
};
Spectrum symmetric_spectrum(const GeneratorMatrix& gen, const Vector& measure);

/// Total-variation distance between the law at time t started from `start` and the
/// invariant measure, for each t. Uses the eigendecomposition, so t may be astronomically
/// large.
std::vector<double> tv_mixing_curve(const GeneratorMatrix& gen, const Vector& measure,
                                    const LatticeMeasure& start, const std::vector<double>& times);

struct SpectralReport {
  int N = 0;
  Vector measure;
  double reversibility_residual = 0.0;
  double lambda2 = 0.0;
  std::optional<Vector> spectrum;
};
SpectralReport spectral_report(const Model& model, int N, bool full_spectrum = false, int threads = 0);

/// Least-squares line through the points (N, log lambda2). Needs two distinct sizes.
struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
};
ScalingFit log_scaling_fit(const std::vector<int>& sizes, const std::vector<double>& lambda2);

}  // namespace mfjp
