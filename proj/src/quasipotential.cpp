#include "mfjp/quasipotential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include "mfjp/error.hpp"
#include "mfjp/parallel.hpp"

namespace mfjp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<double, 8> kGlNodes = {
    0.019855071751231856, 0.10166676129318664, 0.2372337950418355, 0.4082826787521751,
    0.5917173212478249,   0.7627662049581645,  0.8983332387068134, 0.9801449282487681};
constexpr std::array<double, 8> kGlWeights = {
    0.050614268145188129, 0.11119051722668724, 0.15685332293894364, 0.18134189168918099,
    0.18134189168918099,  0.15685332293894364, 0.11119051722668724, 0.050614268145188129};

/// All nonzero integer vectors with entries in [-2, 2] summing to zero.
std::vector<std::vector<int>> hop_set(int d) {
  std::vector<std::vector<int>> hops;
  std::vector<int> h(static_cast<std::size_t>(d), -2);
  for (;;) {
    int sum = 0;
    bool zero = true;
    for (int c : h) {
      sum += c;
      zero = zero && c == 0;
    }
    if (sum == 0 && !zero) hops.push_back(h);
    int i = 0;
    while (i < d && h[static_cast<std::size_t>(i)] == 2) h[static_cast<std::size_t>(i++)] = -2;
    if (i == d) break;
    ++h[static_cast<std::size_t>(i)];
  }
  return hops;
}

}  // namespace

std::pair<double, double> segment_cost(const Model& model, const Vector& from, const Vector& to) {
  if ((from - to).cwiseAbs().maxCoeff() == 0.0) return {0.0, CostLattice::kTMin};
  std::vector<ActionDensity> densities;
  densities.reserve(kGlNodes.size());
  for (double s : kGlNodes)
    densities.emplace_back(model, SimplexPoint::normalized((1.0 - s) * from + s * to));
  std::vector<Vector> warm(kGlNodes.size());
  const Vector delta = to - from;

  auto cost = [&](double log_t) {
    const double T = std::exp(log_t);
    const Vector v = delta / T;
    double sum = 0.0;
    for (std::size_t i = 0; i < densities.size(); ++i) {
      const LagrangianValue lv =
          densities[i](v, LagrangianMethod::Auto, warm[i].size() ? &warm[i] : nullptr);
      if (lv.infinite) return kInf;
      warm[i] = lv.alpha;
      sum += kGlWeights[i] * lv.value;
    }
    return sum * T;
  };

  const double lo = std::log(CostLattice::kTMin);
  if (!std::isfinite(cost(lo))) return {kInf, kInf};
  std::uintmax_t max_iter = 200;
  const auto [log_t, value] =
      boost::math::tools::brent_find_minima(cost, lo, std::log(CostLattice::kTMax), 27, max_iter);
  return {value, std::exp(log_t)};
}

// ---------------------------------------------------------------------------
// CostLattice

CostLattice::CostLattice(const Model& model, int M, int threads)
    : model_(&model), index_(M, model.states()) {
  if (M < 20) throw Error(ErrorKind::InvalidArgument, "cost lattice needs resolution M >= 20");
  const int d = model.states();
  const auto hops = hop_set(d);
  const std::int64_t n = index_.size();

  // arc targets are known combinatorially; costs are filled in parallel
  offsets_.assign(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> counts(static_cast<std::size_t>(d));
  std::vector<int> moved(static_cast<std::size_t>(d));
  for (std::int64_t node = 0; node < n; ++node) {
    index_.unrank(node, counts);
    for (const auto& h : hops) {
      bool ok = true;
      for (int z = 0; z < d && ok; ++z) {
        moved[static_cast<std::size_t>(z)] = counts[static_cast<std::size_t>(z)] + h[static_cast<std::size_t>(z)];
        ok = moved[static_cast<std::size_t>(z)] >= 0 && moved[static_cast<std::size_t>(z)] <= M;
      }
      if (ok) targets_.push_back(index_.rank(moved));
    }
    offsets_[static_cast<std::size_t>(node + 1)] = static_cast<std::int64_t>(targets_.size());
  }
  costs_.assign(targets_.size(), kInf);
  durations_.assign(targets_.size(), kInf);

  parallel_for(static_cast<long>(n), threads, [&](long node) {
    const Vector x = point(node).weights();
    for (std::int64_t k = offsets_[static_cast<std::size_t>(node)];
         k < offsets_[static_cast<std::size_t>(node + 1)]; ++k) {
      const auto [c, T] = segment_cost(model, x, point(targets_[static_cast<std::size_t>(k)]).weights());
      costs_[static_cast<std::size_t>(k)] = c;
      durations_[static_cast<std::size_t>(k)] = T;
    }
  });
}

SimplexPoint CostLattice::point(std::int64_t node) const {
  const auto counts = index_.unrank(node);
  Vector w(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t z = 0; z < counts.size(); ++z)
    w[static_cast<Eigen::Index>(z)] = static_cast<double>(counts[z]) / index_.N();
  return SimplexPoint(w);
}

std::int64_t CostLattice::nearest_node(const SimplexPoint& xi) const {
  if (xi.size() != index_.dim()) throw Error(ErrorKind::Domain, "simplex point has the wrong dimension");
  return index_.rank(nearest_lattice_point(xi, index_.N()).counts());
}

NodeMask CostLattice::mask_excluding(const std::vector<Ball>& forbidden) const {
  NodeMask mask(static_cast<std::size_t>(node_count()), 1);
  if (forbidden.empty()) return mask;
  for (std::int64_t node = 0; node < node_count(); ++node) {
    const SimplexPoint p = point(node);
    for (const Ball& b : forbidden)
      if (distance(p, b.center) < b.radius) mask[static_cast<std::size_t>(node)] = 0;
  }
  return mask;
}

double CostLattice::arc_cost(std::int64_t from, std::int64_t to) const {
  for (std::int64_t k = offsets_[static_cast<std::size_t>(from)];
       k < offsets_[static_cast<std::size_t>(from + 1)]; ++k)
    if (targets_[static_cast<std::size_t>(k)] == to) return costs_[static_cast<std::size_t>(k)];
  return kInf;
}

double CostLattice::arc_duration(std::int64_t from, std::int64_t to) const {
  for (std::int64_t k = offsets_[static_cast<std::size_t>(from)];
       k < offsets_[static_cast<std::size_t>(from + 1)]; ++k)
    if (targets_[static_cast<std::size_t>(k)] == to) return durations_[static_cast<std::size_t>(k)];
  return kInf;
}

namespace {

struct DijkstraState {
  std::vector<double> dist;
  std::vector<std::int64_t> arc_into;  // CSR arc index used to reach each node
};

}  // namespace

std::vector<double> CostLattice::distances_from(std::int64_t source, const NodeMask* mask) const {
  const auto n = static_cast<std::size_t>(node_count());
  std::vector<double> dist(n, kInf);
  if (mask && !(*mask)[static_cast<std::size_t>(source)])
    throw Error(ErrorKind::Unreachable, "source node lies in a forbidden region");
  using Item = std::pair<double, std::int64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    for (std::int64_t k = offsets_[static_cast<std::size_t>(u)];
         k < offsets_[static_cast<std::size_t>(u + 1)]; ++k) {
      const std::int64_t v = targets_[static_cast<std::size_t>(k)];
      if (mask && !(*mask)[static_cast<std::size_t>(v)]) continue;
      const double nd = du + costs_[static_cast<std::size_t>(k)];
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

ShortestPath CostLattice::shortest_path(std::int64_t source, std::int64_t target,
                                        const NodeMask* mask) const {
  const auto n = static_cast<std::size_t>(node_count());
  if (mask && (!(*mask)[static_cast<std::size_t>(source)] || !(*mask)[static_cast<std::size_t>(target)]))
    throw Error(ErrorKind::Unreachable, "endpoint lies in a forbidden region");
  std::vector<double> dist(n, kInf);
  std::vector<std::int64_t> via(n, -1);
  using Item = std::pair<double, std::int64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    if (u == target) break;
    for (std::int64_t k = offsets_[static_cast<std::size_t>(u)];
         k < offsets_[static_cast<std::size_t>(u + 1)]; ++k) {
      const std::int64_t v = targets_[static_cast<std::size_t>(k)];
      if (mask && !(*mask)[static_cast<std::size_t>(v)]) continue;
      const double nd = du + costs_[static_cast<std::size_t>(k)];
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        via[static_cast<std::size_t>(v)] = k;
        heap.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(target)]))
    throw Error(ErrorKind::Unreachable, "target node is not reachable on the lattice");

  ShortestPath out;
  out.value = dist[static_cast<std::size_t>(target)];
  std::vector<double> durations;
  for (std::int64_t v = target; v != source;) {
    out.nodes.push_back(v);
    const std::int64_t k = via[static_cast<std::size_t>(v)];
    durations.push_back(durations_[static_cast<std::size_t>(k)]);
    // the predecessor is the CSR row containing arc k
    const auto row = std::upper_bound(offsets_.begin(), offsets_.end(), k) - offsets_.begin() - 1;
    v = static_cast<std::int64_t>(row);
  }
  out.nodes.push_back(source);
  std::reverse(out.nodes.begin(), out.nodes.end());
  std::reverse(durations.begin(), durations.end());
  double t = 0.0;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    if (i > 0) t += durations[i - 1];
    out.path.times.push_back(t);
    out.path.points.push_back(point(out.nodes[i]));
  }
  return out;
}

MaskedLattice build_cost_lattice(const Model& model, int M, const std::vector<Ball>& forbidden,
                                 int threads) {
  MaskedLattice out{CostLattice(model, M, threads), {}};
  out.mask = out.lattice.mask_excluding(forbidden);
  return out;
}

// ---------------------------------------------------------------------------

QuasipotentialResult quasipotential(const CostLattice& lattice, const SimplexPoint& from,
                                    const SimplexPoint& to, bool polish) {
  const std::int64_t s = lattice.nearest_node(from);
  const std::int64_t t = lattice.nearest_node(to);
  QuasipotentialResult out;
  if (s == t) {
    out.path.times = {0.0};
    out.path.points = {lattice.point(s)};
    return out;
  }
  ShortestPath sp = lattice.shortest_path(s, t);
  out.value = sp.value;
  out.path = std::move(sp.path);
  if (polish && out.path.points.size() > 2) {
    const TerminalCostResult refined = polish_path(lattice.model(), out.path);
    if (refined.value < out.value) {
      out.value = refined.value;
      out.path = refined.path;
    }
    out.polished = true;
  }
  return out;
}

QuasipotentialResult quasipotential(const Model& model, const SimplexPoint& from,
                                    const SimplexPoint& to, int M, bool polish) {
  const CostLattice lattice(model, M);
  return quasipotential(lattice, from, to, polish);
}

double default_exclusion_radius(const std::vector<SimplexPoint>& attractors) {
  double best = kInf;
  for (std::size_t i = 0; i < attractors.size(); ++i)
    for (std::size_t j = i + 1; j < attractors.size(); ++j)
      best = std::min(best, distance(attractors[i], attractors[j]));
  return std::isfinite(best) ? 0.25 * best : 0.0;
}

CostMatrix vtilde_matrix(const CostLattice& lattice, const std::vector<SimplexPoint>& attractors,
                         const VtildeOptions& options) {
  const int l = static_cast<int>(attractors.size());
  if (l < 1) throw Error(ErrorKind::InvalidArgument, "cost matrix needs at least one attractor");
  CostMatrix out{Matrix::Constant(l, l, kInf), Matrix::Constant(l, l, kInf)};
  for (int i = 0; i < l; ++i) {
    out.vtilde(i, i) = 0.0;
    out.v(i, i) = 0.0;
  }
  if (l == 1) return out;

  double min_sep = kInf;
  for (int i = 0; i < l; ++i)
    for (int j = i + 1; j < l; ++j)
      min_sep = std::min(min_sep, distance(attractors[static_cast<std::size_t>(i)],
                                           attractors[static_cast<std::size_t>(j)]));
  const double rho0 = options.rho0 < 0.0 ? default_exclusion_radius(attractors) : options.rho0;
  if (!(rho0 > 0.0) || !(rho0 < 0.5 * min_sep))
    throw Error(ErrorKind::InvalidArgument,
                "exclusion radius must be positive and below half the attractor separation");

  std::vector<std::int64_t> nodes;
  for (const auto& a : attractors) nodes.push_back(lattice.nearest_node(a));

  parallel_for(l, options.threads, [&](long i) {
    const auto dist = lattice.distances_from(nodes[static_cast<std::size_t>(i)]);
    for (int j = 0; j < l; ++j)
      if (j != i) out.v(i, j) = dist[static_cast<std::size_t>(nodes[static_cast<std::size_t>(j)])];
  });

  parallel_for(static_cast<long>(l) * l, options.threads, [&](long ij) {
    const int i = static_cast<int>(ij / l);
    const int j = static_cast<int>(ij % l);
    if (i == j) return;
    std::vector<Ball> balls;
    for (int k = 0; k < l; ++k)
      if (k != i && k != j) balls.push_back({attractors[static_cast<std::size_t>(k)], rho0});
    if (balls.empty()) {
      out.vtilde(i, j) = out.v(i, j);
      return;
    }
    const NodeMask mask = lattice.mask_excluding(balls);
    try {
      out.vtilde(i, j) = lattice.shortest_path(nodes[static_cast<std::size_t>(i)],
                                               nodes[static_cast<std::size_t>(j)], &mask)
                             .value;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Unreachable) throw;
      out.vtilde(i, j) = kInf;
    }
  });
  return out;
}

CostMatrix vtilde_matrix(const Model& model, const AttractorSet& attractors, int M,
                         const VtildeOptions& options) {
  const CostLattice lattice(model, M, options.threads);
  return vtilde_matrix(lattice, attractors.stable(), options);
}

QuasipotentialField::QuasipotentialField(const CostLattice& lattice,
                                         const std::vector<SimplexPoint>& attractors)
    : lattice_(&lattice) {
  for (const auto& a : attractors) values_.push_back(lattice.distances_from(lattice.nearest_node(a)));
}

double QuasipotentialField::operator()(int attractor, const SimplexPoint& xi) const {
  return values_.at(static_cast<std::size_t>(attractor))[static_cast<std::size_t>(lattice_->nearest_node(xi))];
}

// ---------------------------------------------------------------------------
// One-dimensional oracle

double hj_oracle_1d(const Model& model, double x_from, double x_to) {
  if (model.states() != 2) throw Error(ErrorKind::InvalidArgument, "the 1-d oracle needs two states");
  if (!(x_from >= 0.0 && x_from <= 1.0 && x_to >= 0.0 && x_to <= 1.0))
    throw Error(ErrorKind::Domain, "oracle endpoints must lie in [0, 1]");
  if (x_from == x_to) return 0.0;
  const int up = model.edge_index(0, 1);
  const int down = model.edge_index(1, 0);
  // x and 1 - x are passed separately so both stay accurate next to the simplex boundary
  auto g_split = [&](double x, double one_minus_x) {
    const double xi[2] = {one_minus_x, x};
    return std::log(x * model.rate(down, xi)) - std::log(one_minus_x * model.rate(up, xi));
  };
  auto g = [&](double x) { return g_split(x, 1.0 - x); };
  const double sign = x_to > x_from ? 1.0 : -1.0;
  const double lo = std::min(x_from, x_to);
  const double hi = std::max(x_from, x_to);

  // split at sign changes of g so the kinks of max(0, .) sit on panel boundaries
  std::vector<double> cuts{lo};
  const int scan = 2000;
  double prev_x = lo;
  double prev_g = g(lo + (hi - lo) * 1e-12);
  for (int i = 1; i <= scan; ++i) {
    const double x = (i == scan) ? hi : lo + (hi - lo) * i / scan;
    const double gx = g(i == scan ? hi - (hi - lo) * 1e-12 : x);
    if ((gx > 0.0) != (prev_g > 0.0) && std::isfinite(gx) && std::isfinite(prev_g)) {
      double a = prev_x;
      double b = x;
      const bool a_positive = prev_g > 0.0;
      for (int k = 0; k < 200 && b - a > 1e-15; ++k) {
        const double m = 0.5 * (a + b);
        if ((g(m) > 0.0) == a_positive)
          a = m;
        else
          b = m;
      }
      cuts.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_g = gx;
  }
  cuts.push_back(hi);
  // tanh-sinh absorbs the logarithmic singularities at x = 0 and x = 1
  boost::math::quadrature::tanh_sinh<double> quadrature;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    if (!(b > a)) continue;
    auto integrand = [&](double x, double xc) {
      const double left = (xc < 0.0 && a == 0.0) ? -xc : x;
      const double right = (xc > 0.0 && b == 1.0) ? xc : 1.0 - x;
      return std::max(0.0, sign * g_split(left, right));
    };
    total += quadrature.integrate(integrand, a, b, 1e-12);
  }
  return total;
}

}  // namespace mfjp
