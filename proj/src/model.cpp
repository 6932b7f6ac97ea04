#include "mfjp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "mfjp/error.hpp"

namespace mfjp {

// ---------------------------------------------------------------------------
// SimplexPoint / LatticeMeasure

SimplexPoint::SimplexPoint(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw Error(ErrorKind::Domain, "empty simplex point");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || weights_[i] < -1e-9)
      throw Error(ErrorKind::Domain, "simplex point has a negative or non-finite entry");
    weights_[i] = std::max(weights_[i], 0.0);
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > 1e-6)
    throw Error(ErrorKind::Domain, "simplex point weights do not sum to one");
  weights_ /= total;
}

SimplexPoint::SimplexPoint(std::initializer_list<double> weights)
    : SimplexPoint(Vector(Eigen::Map<const Vector>(weights.begin(),
                                                   static_cast<Eigen::Index>(weights.size())))) {}

SimplexPoint SimplexPoint::normalized(Vector weights) {
  weights = weights.cwiseMax(0.0);
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(ErrorKind::Domain, "cannot normalise a vector without positive mass");
  return SimplexPoint(weights / total);
}

double distance(const SimplexPoint& a, const SimplexPoint& b) {
  return (a.weights() - b.weights()).cwiseAbs().maxCoeff();
}

LatticeMeasure::LatticeMeasure(std::vector<int> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw Error(ErrorKind::Domain, "empty lattice measure");
  for (int c : counts_)
    if (c < 0) throw Error(ErrorKind::Domain, "negative occupation count");
  n_ = std::accumulate(counts_.begin(), counts_.end(), 0);
  if (n_ <= 0) throw Error(ErrorKind::Domain, "lattice measure needs N >= 1 particles");
}

SimplexPoint LatticeMeasure::to_simplex() const {
  Vector w(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t i = 0; i < counts_.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = static_cast<double>(counts_[i]) / n_;
  return SimplexPoint(std::move(w));
}

LatticeMeasure nearest_lattice_point(const SimplexPoint& xi, int N) {
  if (N < 1) throw Error(ErrorKind::Domain, "N must be positive");
  const auto d = static_cast<std::size_t>(xi.size());
  std::vector<int> counts(d);
  std::vector<std::pair<double, std::size_t>> remainders(d);
  int used = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const double scaled = xi[static_cast<Eigen::Index>(i)] * N;
    counts[i] = static_cast<int>(std::floor(scaled));
    used += counts[i];
    remainders[i] = {scaled - counts[i], i};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < N; ++k, ++used) ++counts[remainders[k % d].second];
  return LatticeMeasure(std::move(counts));
}

// ---------------------------------------------------------------------------
// LatticeIndex

double lattice_size(int N, int d) {
  // binomial(N + d - 1, d - 1)
  double value = 1.0;
  for (int k = 1; k <= d - 1; ++k) value = value * (N + k) / k;
  return std::round(value);
}

LatticeIndex::LatticeIndex(int N, int d) : n_(N), d_(d) {
  if (N < 1) throw Error(ErrorKind::Domain, "lattice needs N >= 1");
  if (d < 1) throw Error(ErrorKind::Domain, "lattice needs at least one state");
  if (lattice_size(N, d) > static_cast<double>(kCap))
    throw Error(ErrorKind::CapExceeded, "lattice with N=" + std::to_string(N) +
                                            " and |Z|=" + std::to_string(d) + " exceeds " +
                                            std::to_string(kCap) + " points");
  const auto stride = static_cast<std::size_t>(d + 1);
  table_.assign(static_cast<std::size_t>(N + 1) * stride, 0);
  for (int n = 0; n <= N; ++n) {
    table_[static_cast<std::size_t>(n) * stride + 0] = (n == 0) ? 1 : 0;
    for (int k = 1; k <= d; ++k) {
      // compositions(n, k) = sum_{v=0..n} compositions(n - v, k - 1)
      std::int64_t total = 0;
      for (int v = 0; v <= n; ++v)
        total += table_[static_cast<std::size_t>(n - v) * stride + static_cast<std::size_t>(k - 1)];
      table_[static_cast<std::size_t>(n) * stride + static_cast<std::size_t>(k)] = total;
    }
  }
  size_ = compositions(N, d);
}

std::int64_t LatticeIndex::rank(std::span<const int> counts) const {
  std::int64_t r = 0;
  int rem = n_;
  for (int i = 0; i + 1 < d_; ++i) {
    const int c = counts[static_cast<std::size_t>(i)];
    const int parts = d_ - i;
    // points whose i-th count is below c: compositions(rem, parts) - compositions(rem - c, parts)
    r += compositions(rem, parts) - compositions(rem - c, parts);
    rem -= c;
  }
  return r;
}

void LatticeIndex::unrank(std::int64_t index, std::span<int> counts) const {
  int rem = n_;
  for (int i = 0; i + 1 < d_; ++i) {
    int v = 0;
    for (;; ++v) {
      const std::int64_t block = compositions(rem - v, d_ - 1 - i);
      if (index < block) break;
      index -= block;
    }
    counts[static_cast<std::size_t>(i)] = v;
    rem -= v;
  }
  counts[static_cast<std::size_t>(d_ - 1)] = rem;
}

std::vector<int> LatticeIndex::unrank(std::int64_t index) const {
  std::vector<int> counts(static_cast<std::size_t>(d_));
  unrank(index, counts);
  return counts;
}

bool LatticeIndex::next(std::span<int> counts) {
  const std::size_t d = counts.size();
  int right = 0;
  for (std::size_t i = d - 1; i-- > 0;) {
    right += counts[i + 1];
    if (right > 0) {
      ++counts[i];
      for (std::size_t j = i + 1; j + 1 < d; ++j) counts[j] = 0;
      counts[d - 1] = right - 1;
      return true;
    }
  }
  return false;
}

std::vector<LatticeMeasure> lattice_enumerate(int N, int d) {
  const LatticeIndex index(N, d);
  std::vector<LatticeMeasure> out;
  out.reserve(static_cast<std::size_t>(index.size()));
  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  counts.back() = N;
  do {
    out.emplace_back(counts);
  } while (LatticeIndex::next(counts));
  return out;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(std::string name, std::vector<std::string> labels, std::vector<Edge> edges,
             std::vector<std::string> rate_sources, std::map<std::string, double> params)
    : name_(std::move(name)),
      labels_(std::move(labels)),
      edges_(std::move(edges)),
      sources_(std::move(rate_sources)),
      params_(std::move(params)) {
  if (labels_.size() < 2) throw Error(ErrorKind::InvalidArgument, "a model needs at least two states");
  std::set<std::string> unique(labels_.begin(), labels_.end());
  if (unique.size() != labels_.size())
    throw Error(ErrorKind::InvalidArgument, "state labels must be unique");
  if (edges_.empty()) throw Error(ErrorKind::InvalidArgument, "a model needs at least one edge");
  if (sources_.size() != edges_.size())
    throw Error(ErrorKind::InvalidArgument, "every edge needs exactly one rate expression");
  std::set<std::pair<int, int>> seen;
  for (const Edge& e : edges_) {
    if (e.from < 0 || e.to < 0 || e.from >= states() || e.to >= states())
      throw Error(ErrorKind::InvalidArgument, "edge refers to an unknown state");
    if (e.from == e.to) throw Error(ErrorKind::InvalidArgument, "self-loops are not allowed");
    if (!seen.insert({e.from, e.to}).second)
      throw Error(ErrorKind::InvalidArgument, "duplicate edge");
  }
  rates_.reserve(sources_.size());
  for (const std::string& src : sources_)
    rates_.push_back(RateExpr::parse(substitute_params(src, params_), labels_));
}

int Model::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw Error(ErrorKind::UnknownLabel, "unknown state label '" + std::string(label) + "'");
}

int Model::edge_index(int from, int to) const {
  for (std::size_t k = 0; k < edges_.size(); ++k)
    if (edges_[k].from == from && edges_[k].to == to) return static_cast<int>(k);
  return -1;
}

void Model::rates(std::span<const double> xi, std::span<double> out) const {
  for (std::size_t k = 0; k < rates_.size(); ++k) out[k] = rates_[k](xi);
}

Matrix rate_matrix(const Model& model, const SimplexPoint& xi) {
  const int d = model.states();
  if (xi.size() != d) throw Error(ErrorKind::Domain, "simplex point has the wrong dimension");
  Matrix m = Matrix::Zero(d, d);
  for (int k = 0; k < model.edge_count(); ++k) {
    const Edge& e = model.edges()[static_cast<std::size_t>(k)];
    const double r = model.rate(k, xi.span());
    if (!std::isfinite(r))
      throw Error(ErrorKind::Domain, "rate expression evaluated to a non-finite value");
    m(e.from, e.to) = r;
  }
  for (int z = 0; z < d; ++z) m(z, z) = -(m.row(z).sum() - m(z, z));
  return m;
}

bool is_irreducible(int states, std::span<const Edge> edges) {
  auto reach_all = [&](bool forward) {
    std::vector<char> seen(static_cast<std::size_t>(states), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const Edge& e : edges) {
        const int a = forward ? e.from : e.to;
        const int b = forward ? e.to : e.from;
        if (a == u && !seen[static_cast<std::size_t>(b)]) {
          seen[static_cast<std::size_t>(b)] = 1;
          stack.push_back(b);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char s) { return s != 0; });
  };
  return reach_all(true) && reach_all(false);
}

ValidationReport validate_model(const Model& model, int grid_resolution) {
  if (grid_resolution < 10)
    throw Error(ErrorKind::InvalidArgument, "validation grid resolution must be at least 10");
  ValidationReport report;
  report.grid_resolution = grid_resolution;
  report.irreducible = is_irreducible(model.states(), model.edges());
  if (!report.irreducible)
    throw Error(ErrorKind::NotIrreducible, "transition graph of model '" + model.name() +
                                               "' is not strongly connected");

  const int d = model.states();
  const LatticeIndex index(grid_resolution, d);
  const auto ne = static_cast<std::size_t>(model.edge_count());
  report.edge_min.assign(ne, std::numeric_limits<double>::infinity());
  report.edge_max.assign(ne, -std::numeric_limits<double>::infinity());

  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  counts.back() = grid_resolution;
  std::vector<double> xi(static_cast<std::size_t>(d));
  std::vector<double> r(ne);
  do {
    for (std::size_t z = 0; z < xi.size(); ++z)
      xi[z] = static_cast<double>(counts[z]) / grid_resolution;
    model.rates(xi, r);
    for (std::size_t k = 0; k < ne; ++k) {
      if (!std::isfinite(r[k]) || r[k] <= 0.0) {
        std::ostringstream os;
        const Edge& e = model.edges()[k];
        os << "rate of edge " << model.labels()[static_cast<std::size_t>(e.from)] << "->"
           << model.labels()[static_cast<std::size_t>(e.to)] << " is " << r[k] << " at xi = (";
        for (std::size_t z = 0; z < xi.size(); ++z) os << (z ? ", " : "") << xi[z];
        os << ")";
        throw Error(ErrorKind::RateOutOfBounds, os.str());
      }
      report.edge_min[k] = std::min(report.edge_min[k], r[k]);
      report.edge_max[k] = std::max(report.edge_max[k], r[k]);
    }
  } while (LatticeIndex::next(counts));

  report.c = *std::min_element(report.edge_min.begin(), report.edge_min.end());
  report.C = *std::max_element(report.edge_max.begin(), report.edge_max.end());
  return report;
}

// ---------------------------------------------------------------------------
// Catalog

namespace catalog {

Model nonint(double a, double b) {
  return Model("nonint", {"down", "up"}, {{0, 1}, {1, 0}}, {"a", "b"}, {{"a", a}, {"b", b}});
}

Model curie_weiss(double beta, double h) {
  return Model("cw", {"down", "up"}, {{0, 1}, {1, 0}},
               {"exp(beta*(2*xi[up]-1)+h)", "exp(-beta*(2*xi[up]-1)-h)"},
               {{"beta", beta}, {"h", h}});
}

Model cyc3(double a, double b) {
  return Model("cyc3", {"z0", "z1", "z2"}, {{0, 1}, {1, 2}, {2, 0}},
               {"a+b*xi[z1]", "a+b*xi[z2]", "a+b*xi[z0]"}, {{"a", a}, {"b", b}});
}

Model by_name(std::string_view name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  auto check = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : params) {
      (void)value;
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok)
        throw Error(ErrorKind::InvalidArgument,
                    "unknown parameter '" + key + "' for catalog model '" + std::string(name) + "'");
    }
  };
  if (name == "nonint") {
    check({"a", "b"});
    return nonint(get("a", 1.0), get("b", 2.0));
  }
  if (name == "cw") {
    check({"beta", "h"});
    return curie_weiss(get("beta", 1.5), get("h", 0.0));
  }
  if (name == "cyc3") {
    check({"a", "b"});
    return cyc3(get("a", 1.0), get("b", 1.0));
  }
  throw Error(ErrorKind::InvalidArgument, "unknown catalog model '" + std::string(name) + "'");
}

}  // namespace catalog

}  // namespace mfjp
