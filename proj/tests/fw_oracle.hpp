#pragma once

// Brute-force Freidlin-Wentzell tables written independently of the library enumerator.
// Every map f: L -> L is visited; W is read off as the fixed points of f, an arrow i -> f(i)
// exists for i outside W, and the graph is acyclic exactly when f^l sends every node into W.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace fw_oracle {

struct Tables {
  int l = 0;
  std::map<unsigned, double> all;                 // W -> min over G(W)
  std::map<unsigned, std::vector<double>> via;   // W -> [i * l + j] min over G_{i,j}(W)
};

inline Tables tabulate(const Eigen::MatrixXd& cost) {
  const int l = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  Tables t;
  t.l = l;
  int total = 1;
  for (int i = 0; i < l; ++i) total *= l;
  std::vector<int> f(static_cast<std::size_t>(l));
  for (int code = 0; code < total; ++code) {
    int c = code;
    unsigned w = 0;
    for (int i = 0; i < l; ++i) {
      f[static_cast<std::size_t>(i)] = c % l;
      c /= l;
      if (f[static_cast<std::size_t>(i)] == i) w |= 1u << i;
    }
    if (w == 0) continue;
    std::vector<int> end(static_cast<std::size_t>(l));
    bool ok = true;
    for (int i = 0; i < l && ok; ++i) {
      int x = i;
      for (int s = 0; s < l; ++s) x = f[static_cast<std::size_t>(x)];
      end[static_cast<std::size_t>(i)] = x;
      ok = (w >> x) & 1u;
    }
    if (!ok) continue;
    double value = 0.0;
    for (int i = 0; i < l; ++i)
      if (!((w >> i) & 1u)) value += cost(i, f[static_cast<std::size_t>(i)]);
    auto [it, fresh] = t.all.emplace(w, inf);
    it->second = std::min(it->second, value);
    auto& via = t.via[w];
    if (via.empty()) via.assign(static_cast<std::size_t>(l * l), inf);
    for (int i = 0; i < l; ++i)
      if (!((w >> i) & 1u)) {
        double& slot = via[static_cast<std::size_t>(i * l + end[static_cast<std::size_t>(i)])];
        slot = std::min(slot, value);
      }
  }
  return t;
}

inline double i_ij(const Tables& t, unsigned w, int i, int j) {
  return t.via.at(w)[static_cast<std::size_t>(i * t.l + j)] - t.all.at(w);
}

inline double i_i(const Tables& t, unsigned w, int i) {
  double second = t.all.at(w | (1u << i));
  for (int j = 0; j < t.l; ++j)
    if (j != i && !((w >> j) & 1u))
      second = std::min(second, t.via.at(w | (1u << j))[static_cast<std::size_t>(i * t.l + j)]);
  return t.all.at(w) - second;
}

inline double w_of(const Tables& t, int i) { return t.all.at(1u << i); }

}  // namespace fw_oracle
