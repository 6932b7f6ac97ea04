#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfjp/expr.hpp"

namespace mfjp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A probability vector on the state space. Construction tolerates round-off
/// (entries down to -1e-9, total mass within 1e-6 of one) and renormalises, so
/// stored weights are nonnegative and sum to one within 1e-12.
class SimplexPoint {
 public:
  static constexpr double kTolerance = 1e-12;

  explicit SimplexPoint(Vector weights);
  SimplexPoint(std::initializer_list<double> weights);

  /// Clamps negative entries to zero and rescales; for arbitrary positive-mass input.
  static SimplexPoint normalized(Vector weights);

  const Vector& weights() const noexcept { return weights_; }
  Eigen::Index size() const noexcept { return weights_.size(); }
  double operator[](Eigen::Index i) const { return weights_[i]; }
  std::span<const double> span() const noexcept {
    return {weights_.data(), static_cast<std::size_t>(weights_.size())};
  }

 private:
  Vector weights_;
};

/// Max-norm distance; all simplex balls in the library use this metric.
double distance(const SimplexPoint& a, const SimplexPoint& b);

/// A point of the N-particle lattice: integer occupation counts summing to N.
class LatticeMeasure {
 public:
  LatticeMeasure() = default;
  explicit LatticeMeasure(std::vector<int> counts);

  const std::vector<int>& counts() const noexcept { return counts_; }
  int N() const noexcept { return n_; }
  SimplexPoint to_simplex() const;

  friend bool operator==(const LatticeMeasure&, const LatticeMeasure&) = default;

 private:
  std::vector<int> counts_;
  int n_ = 0;
};

/// Nearest lattice point (largest-remainder rounding of N * xi).
LatticeMeasure nearest_lattice_point(const SimplexPoint& xi, int N);

/// Lexicographic ranking of the compositions of N into d nonnegative parts.
class LatticeIndex {
 public:
  static constexpr std::int64_t kCap = 5'000'000;

  LatticeIndex(int N, int d);

  int N() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  std::int64_t size() const noexcept { return size_; }

  std::int64_t rank(std::span<const int> counts) const;
  void unrank(std::int64_t index, std::span<int> counts) const;
  std::vector<int> unrank(std::int64_t index) const;

  /// Advances counts to the lexicographic successor; false after the last point.
  static bool next(std::span<int> counts);

 private:
  std::int64_t compositions(int n, int parts) const {
    return table_[static_cast<std::size_t>(n) * static_cast<std::size_t>(d_ + 1) +
                  static_cast<std::size_t>(parts)];
  }

  int n_;
  int d_;
  std::int64_t size_;
  std::vector<std::int64_t> table_;
};

/// Number of compositions of N into d parts, as a double (for cap checks).
double lattice_size(int N, int d);

std::vector<LatticeMeasure> lattice_enumerate(int N, int d);

struct Edge {
  int from;
  int to;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Finite-state mean-field model: labelled states, an allowed-transition digraph,
/// and one rate expression per edge.
class Model {
 public:
  Model(std::string name, std::vector<std::string> labels, std::vector<Edge> edges,
        std::vector<std::string> rate_sources, std::map<std::string, double> params = {});

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  int states() const noexcept { return static_cast<int>(labels_.size()); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
  const RateExpr& rate_expr(int edge) const { return rates_[static_cast<std::size_t>(edge)]; }
  const std::vector<std::string>& rate_sources() const noexcept { return sources_; }
  const std::map<std::string, double>& params() const noexcept { return params_; }

  int label_index(std::string_view label) const;
  /// Edge index of (from, to), or -1.
  int edge_index(int from, int to) const;

  double rate(int edge, std::span<const double> xi) const {
    return rates_[static_cast<std::size_t>(edge)](xi);
  }
  void rates(std::span<const double> xi, std::span<double> out) const;

 private:
  std::string name_;
  std::vector<std::string> labels_;
  std::vector<Edge> edges_;
  std::vector<std::string> sources_;
  std::vector<RateExpr> rates_;
  std::map<std::string, double> params_;
};

/// |Z| x |Z| generator of a single particle at empirical measure xi; rows sum to zero.
Matrix rate_matrix(const Model& model, const SimplexPoint& xi);

bool is_irreducible(int states, std::span<const Edge> edges);

struct ValidationReport {
  bool irreducible = false;
  double c = 0.0;  ///< smallest rate over the validation grid
  double C = 0.0;  ///< largest rate over the validation grid
  std::vector<double> edge_min;
  std::vector<double> edge_max;
  int grid_resolution = 0;
};

/// Checks irreducibility and positive rate bounds on the lattice of the given
/// resolution. Throws NotIrreducible or RateOutOfBounds. Lipschitz continuity is
/// not checked.
ValidationReport validate_model(const Model& model, int grid_resolution = 100);

namespace catalog {

/// Independent particles: down->up at rate a, up->down at rate b.
Model nonint(double a = 1.0, double b = 2.0);
/// Curie-Weiss flip rates exp(+-(beta (2x - 1) + h)) with x = xi[up].
Model curie_weiss(double beta = 1.5, double h = 0.0);
/// Three states on a directed cycle, rate a + b xi[next].
Model cyc3(double a = 1.0, double b = 1.0);

/// Looks up "nonint", "cw" or "cyc3"; missing parameters take the defaults.
Model by_name(std::string_view name, const std::map<std::string, double>& params = {});

}  // namespace catalog

}  // namespace mfjp
