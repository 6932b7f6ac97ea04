#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mfjp/model.hpp"
#include "mfjp/quasipotential.hpp"

namespace mfjp {

enum class Record { FullPath, EventsOnly, HittingFlags };

struct SimConfig {
  LatticeMeasure initial;
  double t_max = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t replica = 0;
  Record record = Record::FullPath;
  bool occupation = false;  ///< accumulate time spent at each lattice point
};

/// One jump of the empirical measure. Injections carry edge -1 and the injected state
/// in `to`.
struct Event {
  double t = 0.0;
  int edge = -1;
  int from = -1;
  int to = -1;
  std::vector<int> counts;  ///< post-jump counts, empty unless the full path is recorded
  bool injection = false;
};

struct SimPath {
  std::vector<Event> events;
  std::int64_t event_count = 0;
  LatticeMeasure final_state;
  double t_end = 0.0;
  std::vector<double> occupation;  ///< indexed by lattice rank when requested
};

/// Exact-event simulation of the N-particle empirical measure up to cfg.t_max.
SimPath gillespie_path(const Model& model, const SimConfig& cfg);

/// Target and kill regions as unions of closed max-norm balls.
struct HittingSpec {
  std::vector<Ball> target;
  std::vector<Ball> avoid;

  bool hits(const SimplexPoint& xi) const;
  bool killed(const SimplexPoint& xi) const;
};

struct HittingResult {
  std::vector<double> times;  ///< +inf for censored or killed replicas
  int censored = 0;
  int killed = 0;
  double mean = 0.0;  ///< over replicas that reached the target
  double log_mean_over_n = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

/// First entry times into the target for `replicas` independent runs; replica r draws
/// from CounterRng(cfg.seed, r). Throws AllCensored when no replica reaches the target.
HittingResult hitting_time(const Model& model, const SimConfig& cfg, const HittingSpec& spec,
                           int replicas, int threads = 0);

/// Neighbourhoods [K_i]_rho for a set of attractors.
HittingSpec neighbourhoods(const std::vector<SimplexPoint>& centres, double radius);

struct AnnealConfig {
  double c = 1.0;
  int z0 = 0;             ///< state of every injected particle
  LatticeMeasure initial;  ///< must hold N0 particles
  double t_max = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t replica = 0;
  Record record = Record::EventsOnly;
};

/// N0 = min{n >= 1 : exp(n c) - 2 >= 0}.
int anneal_initial_size(double c);
/// Injection time t_N = exp(N c) - 2 (t_{N0} = 0).
double anneal_injection_time(double c, int N);
/// Lattice point with N0 particles nearest to xi.
LatticeMeasure anneal_start(double c, const SimplexPoint& xi);

/// Time-inhomogeneous process: N particles on [t_N, t_{N+1}), one particle in state z0
/// added at each t_{N+1}.
SimPath anneal_path(const Model& model, const AnnealConfig& cfg);

struct AnnealSuccess {
  std::vector<double> checkpoints;
  std::vector<int> inside;
  std::vector<double> fraction;
  std::vector<double> half_width;  ///< 95% Wilson interval half-widths
  std::vector<int> particles;      ///< N at each checkpoint
  int replicas = 0;
};

/// Fraction of replicas inside the target at each checkpoint; replica r uses
/// CounterRng(cfg.seed, r).
AnnealSuccess anneal_success(const Model& model, const AnnealConfig& cfg, const HittingSpec& target,
                             const std::vector<double>& checkpoints, int replicas, int threads = 0);

/// Half-width of the 95% Wilson score interval.
double wilson_half_width(int successes, int trials);

}  // namespace mfjp
