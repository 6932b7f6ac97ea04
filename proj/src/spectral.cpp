#include "mfjp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "mfjp/error.hpp"
#include "mfjp/parallel.hpp"

namespace mfjp {

namespace {

struct RowEntries {
  std::vector<std::int64_t> cols;
  std::vector<double> values;
};

double max_abs_residual(const GeneratorMatrix& gen, const Vector& p) {
  const Vector r = (p.transpose() * gen.q).transpose();
  return r.cwiseAbs().maxCoeff();
}

struct Chain {
  std::vector<double> birth;  // k -> k + 1, k = 0..N-1
  std::vector<double> death;  // k -> k - 1, index k = 1..N (slot 0 unused)
};

Chain chain_rates(const GeneratorMatrix& gen) {
  Chain c;
  c.birth.resize(static_cast<std::size_t>(gen.N));
  c.death.assign(static_cast<std::size_t>(gen.N + 1), 0.0);
  for (int k = 0; k < gen.N; ++k) {
    const auto here = gen.chain_node(k);
    const auto up = gen.chain_node(k + 1);
    c.birth[static_cast<std::size_t>(k)] = gen.q.coeff(here, up);
    c.death[static_cast<std::size_t>(k + 1)] = gen.q.coeff(up, here);
  }
  return c;
}

/// Number of eigenvalues below sigma of the N x N tridiagonal A A^T, where A is the
/// bidiagonal factor of the symmetrised chain. Differential stationary qd recursion, so
/// tiny eigenvalues keep full relative accuracy.
int count_below(const Chain& c, double sigma) {
  const auto n = c.birth.size();
  int negatives = 0;
  double t = c.birth[0] - sigma;
  for (std::size_t k = 0;; ++k) {
    double p = t + c.death[k + 1];
    if (p == 0.0) p = -std::numeric_limits<double>::min();
    if (p < 0.0) ++negatives;
    if (k + 1 == n) break;
    t = c.birth[k + 1] * (t / p) - sigma;
  }
  return negatives;
}

double smallest_chain_eigenvalue(const Chain& c) {
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.birth.size(); ++k) hi = std::min(hi, c.birth[k] + c.death[k + 1]);
  hi *= 2.0;
  double lo = hi;
  while (count_below(c, lo) > 0) {
    lo *= 0.5;
    if (lo < std::numeric_limits<double>::min())
      throw Error(ErrorKind::SolveFailed, "second eigenvalue underflows");
  }
  for (int it = 0; it < 400 && hi / lo - 1.0 > 1e-15; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (count_below(c, mid) > 0)
      hi = mid;
    else
      lo = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

std::int64_t GeneratorMatrix::chain_node(int k) const {
  const int counts[2] = {N - k, k};
  return index.rank(counts);
}

GeneratorMatrix build_generator(const Model& model, int N, int threads) {
  if (N < 1) throw Error(ErrorKind::Domain, "N must be positive");
  GeneratorMatrix gen{N, LatticeIndex(N, model.states()), {}};
  const std::int64_t n = gen.index.size();
  const int d = model.states();
  std::vector<RowEntries> rows(static_cast<std::size_t>(n));

  parallel_for(static_cast<long>(n), threads, [&](long row) {
    std::vector<int> counts(static_cast<std::size_t>(d));
    gen.index.unrank(row, counts);
    std::vector<double> xi(static_cast<std::size_t>(d));
    for (int z = 0; z < d; ++z) xi[static_cast<std::size_t>(z)] = static_cast<double>(counts[static_cast<std::size_t>(z)]) / N;
    std::vector<double> rates(static_cast<std::size_t>(model.edge_count()));
    model.rates(xi, rates);
    RowEntries& out = rows[static_cast<std::size_t>(row)];
    double total = 0.0;
    for (int e = 0; e < model.edge_count(); ++e) {
      const Edge& edge = model.edges()[static_cast<std::size_t>(e)];
      const int occupied = counts[static_cast<std::size_t>(edge.from)];
      if (occupied == 0) continue;
      const double value = occupied * rates[static_cast<std::size_t>(e)];
      --counts[static_cast<std::size_t>(edge.from)];
      ++counts[static_cast<std::size_t>(edge.to)];
      out.cols.push_back(gen.index.rank(counts));
      out.values.push_back(value);
      ++counts[static_cast<std::size_t>(edge.from)];
      --counts[static_cast<std::size_t>(edge.to)];
      total += value;
    }
    out.cols.push_back(row);
    out.values.push_back(-total);
  });

  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  for (std::int64_t row = 0; row < n; ++row) {
    const RowEntries& r = rows[static_cast<std::size_t>(row)];
    for (std::size_t k = 0; k < r.cols.size(); ++k) triplets.emplace_back(row, r.cols[k], r.values[k]);
  }
  gen.q.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  gen.q.setFromTriplets(triplets.begin(), triplets.end());
  return gen;
}

Vector invariant_log_measure(const GeneratorMatrix& gen) {
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  if (gen.birth_death()) {
    const Chain c = chain_rates(gen);
    Vector log_p(n);
    double acc = 0.0;
    log_p[gen.chain_node(0)] = 0.0;
    for (int k = 0; k < gen.N; ++k) {
      acc += std::log(c.birth[static_cast<std::size_t>(k)]) - std::log(c.death[static_cast<std::size_t>(k + 1)]);
      log_p[gen.chain_node(k + 1)] = acc;
    }
    const double top = log_p.maxCoeff();
    const double log_z = top + std::log((log_p.array() - top).exp().sum());
    return log_p.array() - log_z;
  }
  return invariant_measure(gen).array().log();
}

Vector invariant_measure(const GeneratorMatrix& gen) {
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  Vector p;
  if (gen.birth_death()) {
    p = invariant_log_measure(gen).array().exp();
  } else {
    // transpose of Q with the last balance equation replaced by normalisation
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index row = 0; row < gen.q.outerSize(); ++row)
      for (SparseMatrix::InnerIterator it(gen.q, row); it; ++it)
        if (it.col() != n - 1) triplets.emplace_back(it.col(), row, it.value());
    for (Eigen::Index x = 0; x < n; ++x) triplets.emplace_back(n - 1, x, 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SolveFailed, "sparse LU factorisation failed");
    Vector rhs = Vector::Zero(n);
    rhs[n - 1] = 1.0;
    p = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SolveFailed, "sparse LU solve failed");
    if (p.minCoeff() <= 0.0)
      throw Error(ErrorKind::SolveFailed, "invariant measure lost positivity in the solve");
    p /= p.sum();
  }
  const double residual = max_abs_residual(gen, p);
  if (!(residual <= 1e-10))
    throw Error(ErrorKind::SolveFailed, "invariant measure residual " + std::to_string(residual));
  return p;
}

Reversibility check_reversibility(const GeneratorMatrix& gen, const Vector& measure) {
  Reversibility out;
  for (Eigen::Index row = 0; row < gen.q.outerSize(); ++row)
    for (SparseMatrix::InnerIterator it(gen.q, row); it; ++it) {
      if (it.col() == row) continue;
      const double flow = measure[row] * it.value() - measure[it.col()] * gen.q.coeff(it.col(), row);
      out.residual = std::max(out.residual, std::abs(flow));
    }
  out.reversible = out.residual <= 1e-9;
  return out;
}

Spectrum symmetric_spectrum(const GeneratorMatrix& gen, const Vector& measure) {
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  if (n > kDenseCap) throw Error(ErrorKind::CapExceeded, "dense eigensolve is limited to 4000 states");
  if (!check_reversibility(gen, measure).reversible)
    throw Error(ErrorKind::NotReversible, "generator is not reversible");
  const Vector root = measure.cwiseSqrt();
  Spectrum out;
  if (gen.birth_death()) {
    const Chain c = chain_rates(gen);
    Vector diag(n);
    Vector off(std::max<Eigen::Index>(n - 1, 0));
    for (int k = 0; k <= gen.N; ++k) {
      const double b = k < gen.N ? c.birth[static_cast<std::size_t>(k)] : 0.0;
      diag[k] = b + c.death[static_cast<std::size_t>(k)];
      if (k < gen.N) off[k] = -std::sqrt(b * c.death[static_cast<std::size_t>(k + 1)]);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::SolveFailed, "tridiagonal eigensolve failed");
    out.values = solver.eigenvalues();
    out.vectors.resize(n, n);
    for (int k = 0; k <= gen.N; ++k) out.vectors.row(gen.chain_node(k)) = solver.eigenvectors().row(k);
  } else {
    Matrix s = Matrix::Zero(n, n);
    for (Eigen::Index row = 0; row < n; ++row)
      for (SparseMatrix::InnerIterator it(gen.q, row); it; ++it)
        s(row, it.col()) = -root[row] * it.value() / root[it.col()];
    const Matrix sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::SolveFailed, "dense eigensolve failed");
    out.values = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
  }
  if (!(std::abs(out.values[0]) <= 1e-10))
    throw Error(ErrorKind::SolveFailed, "leading eigenvalue is not zero");
  if (n > 1 && !(out.values[1] > std::abs(out.values[0])))
    throw Error(ErrorKind::SolveFailed, "zero eigenvalue is not simple");
  // the zero mode is exactly sqrt(p); eigenvalue 1 is refined for birth-death chains
  out.values[0] = 0.0;
  out.vectors.col(0) = root;
  if (gen.birth_death() && n > 1) out.values[1] = smallest_chain_eigenvalue(chain_rates(gen));
  return out;
}

double second_eigenvalue(const GeneratorMatrix& gen, const Vector& measure) {
  if (gen.dimension() < 2) throw Error(ErrorKind::Domain, "a one-state lattice has no second eigenvalue");
  if (!check_reversibility(gen, measure).reversible)
    throw Error(ErrorKind::NotReversible, "generator is not reversible");
  if (gen.birth_death()) {
    if (gen.dimension() > kTridiagonalCap)
      throw Error(ErrorKind::CapExceeded, "tridiagonal solver is limited to 200001 states");
    const Chain c = chain_rates(gen);
    // A A^T is positive definite exactly when zero is a simple eigenvalue of -Q
    if (count_below(c, 0.0) != 0) throw Error(ErrorKind::SolveFailed, "zero eigenvalue is not simple");
    return smallest_chain_eigenvalue(c);
  }
  return symmetric_spectrum(gen, measure).values[1];
}

std::vector<double> tv_mixing_curve(const GeneratorMatrix& gen, const Vector& measure,
                                    const LatticeMeasure& start, const std::vector<double>& times) {
  if (start.N() != gen.N || static_cast<int>(start.counts().size()) != gen.index.dim())
    throw Error(ErrorKind::Domain, "start point is not on the generator's lattice");
  const Spectrum spec = symmetric_spectrum(gen, measure);
  const auto n = static_cast<Eigen::Index>(gen.dimension());
  const auto nu = static_cast<Eigen::Index>(gen.index.rank(start.counts()));
  const Vector root = measure.cwiseSqrt();

  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!(t >= 0.0)) throw Error(ErrorKind::Domain, "times must be nonnegative");
    Vector coeff(n);
    coeff[0] = 0.0;
    for (Eigen::Index k = 1; k < n; ++k) coeff[k] = spec.vectors(nu, k) * std::exp(-spec.values[k] * t);
    const Vector diff = (spec.vectors * coeff).cwiseProduct(root) / root[nu];
    out.push_back(0.5 * diff.cwiseAbs().sum());
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (times[i] >= times[i - 1] && out[i] > out[i - 1] + 1e-12)
      throw Error(ErrorKind::Disagreement, "total variation increased along the curve");
  return out;
}

SpectralReport spectral_report(const Model& model, int N, bool full_spectrum, int threads) {
  const GeneratorMatrix gen = build_generator(model, N, threads);
  SpectralReport report;
  report.N = N;
  report.measure = invariant_measure(gen);
  report.reversibility_residual = check_reversibility(gen, report.measure).residual;
  report.lambda2 = second_eigenvalue(gen, report.measure);
  if (full_spectrum) report.spectrum = symmetric_spectrum(gen, report.measure).values;
  return report;
}

ScalingFit log_scaling_fit(const std::vector<int>& sizes, const std::vector<double>& lambda2) {
  if (sizes.size() != lambda2.size() || sizes.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "scaling fit needs at least two (N, lambda2) pairs");
  const double n = static_cast<double>(sizes.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(lambda2[i] > 0.0)) throw Error(ErrorKind::Domain, "lambda2 must be positive");
    mx += sizes[i] / n;
    my += std::log(lambda2[i]) / n;
  }
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    sxx += (sizes[i] - mx) * (sizes[i] - mx);
    sxy += (sizes[i] - mx) * (std::log(lambda2[i]) - my);
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "scaling fit needs two distinct sizes");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace mfjp
