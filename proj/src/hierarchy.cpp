#include "mfjp/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mfjp/error.hpp"
#include "mfjp/parallel.hpp"

namespace mfjp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool ties(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

bool contains(Subset w, int i) { return (w >> i) & 1u; }

void check_size(int l) {
  if (l < 1) throw Error(ErrorKind::InvalidArgument, "need at least one attractor");
  if (l > kMaxAttractors)
    throw Error(ErrorKind::CapExceeded, "exact graph enumeration is limited to 8 attractors");
}

void check_matrix(const Matrix& vtilde) {
  if (vtilde.rows() != vtilde.cols()) throw Error(ErrorKind::InvalidArgument, "cost matrix must be square");
  check_size(static_cast<int>(vtilde.rows()));
  for (Eigen::Index i = 0; i < vtilde.rows(); ++i)
    for (Eigen::Index j = 0; j < vtilde.cols(); ++j)
      if (i != j && (std::isnan(vtilde(i, j)) || vtilde(i, j) < 0.0))
        throw Error(ErrorKind::InvalidArgument, "off-diagonal costs must be nonnegative");
}

/// Visits every W-graph as (targets, roots); roots[i] is the member of W reached from i.
template <class Visit>
void for_each_wgraph(int l, Subset w, Visit&& visit) {
  std::vector<int> free_nodes;
  for (int i = 0; i < l; ++i)
    if (!contains(w, i)) free_nodes.push_back(i);
  if (w == 0) return;  // with no sink every graph closes a cycle
  std::vector<int> target(static_cast<std::size_t>(l), -1);
  std::vector<int> roots(static_cast<std::size_t>(l), -1);
  for (int i = 0; i < l; ++i)
    if (contains(w, i)) roots[static_cast<std::size_t>(i)] = i;

  auto first_choice = [](int i) { return i == 0 ? 1 : 0; };
  auto next_choice = [&](int i, int t) {
    ++t;
    if (t == i) ++t;
    return t < l ? t : -1;
  };
  for (int i : free_nodes) target[static_cast<std::size_t>(i)] = first_choice(i);

  for (;;) {
    bool acyclic = true;
    for (int i : free_nodes) {
      int node = i;
      int steps = 0;
      while (!contains(w, node) && steps <= l) {
        node = target[static_cast<std::size_t>(node)];
        ++steps;
      }
      if (!contains(w, node)) {
        acyclic = false;
        break;
      }
      roots[static_cast<std::size_t>(i)] = node;
    }
    if (acyclic) visit(target, roots);

    // odometer over the free nodes, last node fastest
    int pos = static_cast<int>(free_nodes.size()) - 1;
    while (pos >= 0) {
      const int i = free_nodes[static_cast<std::size_t>(pos)];
      const int t = next_choice(i, target[static_cast<std::size_t>(i)]);
      if (t >= 0) {
        target[static_cast<std::size_t>(i)] = t;
        break;
      }
      target[static_cast<std::size_t>(i)] = first_choice(i);
      --pos;
    }
    if (pos < 0) return;
  }
}

double cost_of(const Matrix& vtilde, const std::vector<int>& target) {
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] >= 0) sum += vtilde(static_cast<Eigen::Index>(i), target[i]);
  return sum;
}

}  // namespace

int WGraph::arrow_count() const {
  return static_cast<int>(std::count_if(target.begin(), target.end(), [](int t) { return t >= 0; }));
}

int WGraph::root(int node) const {
  for (std::size_t steps = 0; steps <= target.size(); ++steps) {
    if (target[static_cast<std::size_t>(node)] < 0) return node;
    node = target[static_cast<std::size_t>(node)];
  }
  throw Error(ErrorKind::InvalidArgument, "graph contains a closed cycle");
}

std::vector<WGraph> enumerate_wgraphs(int l, Subset w) {
  check_size(l);
  if (w >> l) throw Error(ErrorKind::InvalidArgument, "subset refers to a missing attractor");
  std::vector<WGraph> out;
  for_each_wgraph(l, w, [&](const std::vector<int>& target, const std::vector<int>&) {
    out.push_back(WGraph{w, target});
  });
  return out;
}

double wgraph_cost(const Matrix& vtilde, const WGraph& g) { return cost_of(vtilde, g.target); }

WGraphMin min_wgraph_cost(const Matrix& vtilde, Subset w) {
  check_matrix(vtilde);
  const int l = static_cast<int>(vtilde.rows());
  if (w >> l) throw Error(ErrorKind::InvalidArgument, "subset refers to a missing attractor");
  WGraphMin best{kInf, {}};
  for_each_wgraph(l, w, [&](const std::vector<int>& target, const std::vector<int>&) {
    const double c = cost_of(vtilde, target);
    if (c < best.value) best = {c, WGraph{w, target}};
  });
  if (!std::isfinite(best.value))
    throw Error(ErrorKind::AllInfinite, "every W-graph uses an unreachable pair");
  return best;
}

// ---------------------------------------------------------------------------

FwQuantities::FwQuantities(const Matrix& vtilde, int threads) : l_(static_cast<int>(vtilde.rows())) {
  check_matrix(vtilde);
  const std::size_t subsets = std::size_t{1} << l_;
  const std::size_t ll = static_cast<std::size_t>(l_) * static_cast<std::size_t>(l_);
  min_all_.assign(subsets, kInf);
  min_via_.assign(subsets * ll, kInf);
  parallel_for(static_cast<long>(subsets) - 1, threads, [&](long k) {
    const auto w = static_cast<Subset>(k + 1);
    double* via = &min_via_[static_cast<std::size_t>(w) * ll];
    double best = kInf;
    for_each_wgraph(l_, w, [&](const std::vector<int>& target, const std::vector<int>& roots) {
      const double c = cost_of(vtilde, target);
      best = std::min(best, c);
      for (int i = 0; i < l_; ++i) {
        if (contains(w, i)) continue;
        double& slot = via[static_cast<std::size_t>(i * l_ + roots[static_cast<std::size_t>(i)])];
        slot = std::min(slot, c);
      }
    });
    min_all_[w] = best;
  });
}

double FwQuantities::min_cost_via(Subset w, int i, int j) const {
  if (contains(w, i) || !contains(w, j))
    throw Error(ErrorKind::InvalidArgument, "G_{i,j}(W) needs i outside W and j in W");
  return min_via_[static_cast<std::size_t>(w) * static_cast<std::size_t>(l_ * l_) +
                  static_cast<std::size_t>(i * l_ + j)];
}

double FwQuantities::i_ij(Subset w, int i, int j) const {
  const double all = min_cost(w);
  if (!std::isfinite(all)) throw Error(ErrorKind::AllInfinite, "every W-graph uses an unreachable pair");
  return min_cost_via(w, i, j) - all;
}

double FwQuantities::i_i(Subset w, int i) const {
  if (contains(w, i)) throw Error(ErrorKind::InvalidArgument, "I_i(W) needs i outside W");
  const double all = min_cost(w);
  if (!std::isfinite(all)) throw Error(ErrorKind::AllInfinite, "every W-graph uses an unreachable pair");
  double second = min_cost(w | (Subset{1} << i));
  for (int j = 0; j < l_; ++j)
    if (j != i && !contains(w, j)) second = std::min(second, min_cost_via(w | (Subset{1} << j), i, j));
  return all - second;
}

std::vector<double> FwQuantities::w_values() const {
  std::vector<double> out;
  for (int i = 0; i < l_; ++i) out.push_back(w_of(i));
  return out;
}

double stationary_rate(const std::vector<double>& w_values,
                       const std::function<double(int, const SimplexPoint&)>& v_from,
                       const SimplexPoint& xi) {
  if (w_values.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one attractor");
  const double floor = *std::min_element(w_values.begin(), w_values.end());
  double best = kInf;
  for (std::size_t i = 0; i < w_values.size(); ++i)
    best = std::min(best, w_values[i] + v_from(static_cast<int>(i), xi));
  return std::max(0.0, best - floor);
}

std::vector<int> global_minimisers(const std::vector<double>& w_values) {
  const double floor = *std::min_element(w_values.begin(), w_values.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < w_values.size(); ++i)
    if (w_values[i] - floor <= 1e-9 * std::max(1.0, std::abs(floor))) out.push_back(static_cast<int>(i));
  return out;
}

double lambda_graph_formula(const FwQuantities& fw) {
  const int l = fw.size();
  if (l == 1) return 0.0;
  double single = kInf;
  double pair = kInf;
  for (int i = 0; i < l; ++i) {
    single = std::min(single, fw.w_of(i));
    for (int j = i + 1; j < l; ++j) pair = std::min(pair, fw.min_cost((Subset{1} << i) | (Subset{1} << j)));
  }
  return single - pair;
}

// ---------------------------------------------------------------------------
// Cycle hierarchy

namespace {

/// Exit costs and arrows of every element given the pair costs of its level.
void settle_level(std::vector<CycleNode>& nodes, const Matrix& pair) {
  const auto n = static_cast<int>(nodes.size());
  for (int a = 0; a < n; ++a) {
    CycleNode& node = nodes[static_cast<std::size_t>(a)];
    node.vtilde = kInf;
    for (int b = 0; b < n; ++b)
      if (b != a) node.vtilde = std::min(node.vtilde, pair(a, b));
    node.arrows.clear();
    for (int b = 0; b < n; ++b)
      if (b != a && ties(pair(a, b), node.vtilde)) node.arrows.push_back(b);
  }
}

/// Groups the elements of a level into cycles (closed strongly connected classes of the
/// arrow relation); elements in no cycle become singletons. Ordered by smallest member.
std::vector<std::vector<int>> group_cycles(const std::vector<CycleNode>& nodes) {
  const auto n = static_cast<std::size_t>(nodes.size());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t a = 0; a < n; ++a)
    for (int b : nodes[a].arrows) reach[a][static_cast<std::size_t>(b)] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t a = 0; a < n; ++a)
      if (reach[a][k])
        for (std::size_t b = 0; b < n; ++b)
          if (reach[k][b]) reach[a][b] = 1;

  std::vector<int> group(n, -1);
  std::vector<std::vector<int>> groups;
  for (std::size_t a = 0; a < n; ++a) {
    if (group[a] >= 0) continue;
    bool closed = true;
    for (std::size_t b = 0; b < n && closed; ++b)
      if (reach[a][b] && b != a && !reach[b][a]) closed = false;
    std::vector<int> members{static_cast<int>(a)};
    if (closed)
      for (std::size_t b = a + 1; b < n; ++b)
        if (reach[a][b] && reach[b][a]) members.push_back(static_cast<int>(b));
    for (int b : members) group[static_cast<std::size_t>(b)] = static_cast<int>(groups.size());
    groups.push_back(std::move(members));
  }
  return groups;
}

std::string format_cost(double x) {
  if (std::isinf(x)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

std::vector<int> HierarchyReport::attractors_of(int level, int node) const {
  if (level == 0) return levels[0][static_cast<std::size_t>(node)].members;
  std::vector<int> out;
  for (int child : levels[static_cast<std::size_t>(level)][static_cast<std::size_t>(node)].members) {
    const auto sub = attractors_of(level - 1, child);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

HierarchyReport build_cycle_hierarchy(const Matrix& vtilde, int threads) {
  check_matrix(vtilde);
  const int l = static_cast<int>(vtilde.rows());
  HierarchyReport report;
  report.vtilde = vtilde;

  const FwQuantities fw(vtilde, threads);
  report.w = fw.w_values();
  report.lambda = lambda_graph_formula(fw);
  report.l0_tilde = global_minimisers(report.w);

  std::vector<CycleNode> base;
  for (int i = 0; i < l; ++i) base.push_back(CycleNode{0, {i}, 0.0, 0.0, {}});
  Matrix pair = vtilde;
  settle_level(base, pair);
  report.levels.push_back(std::move(base));
  report.level_costs.push_back(pair);

  do {
    const int k = static_cast<int>(report.levels.size()) - 1;
    if (k > l) throw Error(ErrorKind::NonTermination, "cycle hierarchy did not collapse by level l + 1");
    const auto& lower = report.levels.back();
    const auto groups = group_cycles(lower);
    std::vector<CycleNode> upper;
    for (const auto& members : groups) {
      CycleNode node{k + 1, members, 0.0, -kInf, {}};
      for (int a : members) node.vhat = std::max(node.vhat, lower[static_cast<std::size_t>(a)].vtilde);
      upper.push_back(std::move(node));
    }
    const auto n = static_cast<Eigen::Index>(upper.size());
    Matrix next = Matrix::Constant(n, n, kInf);
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q) {
        if (p == q) continue;
        double best = kInf;
        for (int a : upper[static_cast<std::size_t>(p)].members)
          for (int b : upper[static_cast<std::size_t>(q)].members) {
            const double c = pair(a, b);
            if (std::isfinite(c)) best = std::min(best, c - lower[static_cast<std::size_t>(a)].vtilde);
          }
        next(p, q) = std::isfinite(best) ? upper[static_cast<std::size_t>(p)].vhat + best : kInf;
      }
    settle_level(upper, next);
    pair = next;
    report.levels.push_back(std::move(upper));
    report.level_costs.push_back(pair);
  } while (report.levels.back().size() > 1);

  report.m = static_cast<int>(report.levels.size()) - 2;
  const int m = report.m;

  // A_k from the top down, with c_k alongside
  report.a.assign(static_cast<std::size_t>(m + 2), {});
  report.c.assign(static_cast<std::size_t>(m + 1), 0.0);
  report.a[static_cast<std::size_t>(m + 1)] = {0};
  for (int k = m; k >= 0; --k) {
    const auto& lower = report.levels[static_cast<std::size_t>(k)];
    double c_k = 0.0;
    for (int parent : report.a[static_cast<std::size_t>(k + 1)]) {
      const CycleNode& p = report.levels[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(parent)];
      double c_parent = 0.0;
      for (int child : p.members) {
        const double v = lower[static_cast<std::size_t>(child)].vtilde;
        if (ties(v, p.vhat))
          report.a[static_cast<std::size_t>(k)].push_back(child);
        else
          c_parent = std::max(c_parent, v);
      }
      c_k = std::max(c_k, c_parent);
    }
    auto& ak = report.a[static_cast<std::size_t>(k)];
    std::sort(ak.begin(), ak.end());
    report.c[static_cast<std::size_t>(k)] = c_k;
  }
  report.c_star = *std::max_element(report.c.begin(), report.c.end());

  // Lambda as the largest exit cost met on the way up from a most stable attractor
  const int i0 = report.l0_tilde.front();
  int own = i0;
  double cross = 0.0;
  for (int k = 0; k <= m; ++k) {
    const auto& upper = report.levels[static_cast<std::size_t>(k + 1)];
    for (std::size_t p = 0; p < upper.size(); ++p) {
      const auto& members = upper[p].members;
      if (std::find(members.begin(), members.end(), own) == members.end()) continue;
      for (int child : members)
        if (child != own) cross = std::max(cross, report.levels[static_cast<std::size_t>(k)][static_cast<std::size_t>(child)].vtilde);
      own = static_cast<int>(p);
      break;
    }
  }
  report.lambda_cross_check = cross;

  std::vector<int> a0 = report.a[0];
  if (a0 != report.l0_tilde)
    throw Error(ErrorKind::Disagreement, "A_0 differs from the set of global minimisers of W");

  // indented rendering, top first
  std::ostringstream tree;
  auto render = [&](auto&& self, int level, int index, int depth) -> void {
    const CycleNode& node = report.levels[static_cast<std::size_t>(level)][static_cast<std::size_t>(index)];
    const auto& a = report.a[static_cast<std::size_t>(level)];
    const bool in_a = std::find(a.begin(), a.end(), index) != a.end();
    tree << std::string(static_cast<std::size_t>(2 * depth), ' ');
    if (level == 0) {
      tree << "K" << node.members.front() + 1 << "  exit " << format_cost(node.vtilde);
    } else {
      tree << "level " << level << " {";
      const auto atts = report.attractors_of(level, index);
      for (std::size_t i = 0; i < atts.size(); ++i) tree << (i ? "," : "") << "K" << atts[i] + 1;
      tree << "}  exit " << format_cost(node.vtilde) << "  vhat " << format_cost(node.vhat);
    }
    if (in_a) tree << "  [A]";
    tree << '\n';
    if (level > 0)
      for (int child : node.members) self(self, level - 1, child, depth + 1);
  };
  render(render, m + 1, 0, 0);
  report.tree = tree.str();
  return report;
}

LambdaResult lambda_constant(const Matrix& vtilde) {
  const HierarchyReport report = build_cycle_hierarchy(vtilde);
  LambdaResult out{report.lambda, report.lambda_cross_check, true};
  const double gap = std::abs(out.lambda - out.cross_check);
  out.agree = gap <= 1e-9 * std::max(1.0, std::abs(out.lambda)) ||
              (std::isinf(out.lambda) && out.lambda == out.cross_check);
  if (!out.agree)
    throw Error(ErrorKind::Disagreement, "graph and hierarchy values of Lambda differ by " + format_cost(gap));
  return out;
}

}  // namespace mfjp
