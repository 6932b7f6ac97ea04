#include "mfjp/simulate.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfjp/error.hpp"
#include "mfjp/parallel.hpp"
#include "mfjp/rng.hpp"

namespace mfjp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool inside_any(const std::vector<Ball>& balls, std::span<const int> counts, int N) {
  for (const Ball& b : balls) {
    double dist = 0.0;
    for (std::size_t z = 0; z < counts.size(); ++z)
      dist = std::max(dist, std::abs(static_cast<double>(counts[z]) / N - b.center[static_cast<Eigen::Index>(z)]));
    if (dist <= b.radius) return true;
  }
  return false;
}

/// Event-by-event simulation of the empirical measure with N particles. Calls
/// on_jump(t, edge) after every jump; stops when it returns true or the clock passes
/// t_stop. Returns the time reached (t_stop unless stopped early).
class Stepper {
 public:
  explicit Stepper(const Model& model)
      : model_(model),
        xi_(static_cast<std::size_t>(model.states())),
        rates_(static_cast<std::size_t>(model.edge_count())),
        weights_(static_cast<std::size_t>(model.edge_count())) {}

  template <class OnJump, class OnHold>
  double run(std::vector<int>& counts, double t, double t_stop, CounterRng& rng, OnJump&& on_jump,
             OnHold&& on_hold) {
    const int n = std::accumulate(counts.begin(), counts.end(), 0);
    while (true) {
      for (std::size_t z = 0; z < counts.size(); ++z) xi_[z] = static_cast<double>(counts[z]) / n;
      model_.rates(xi_, rates_);
      double total = 0.0;
      for (std::size_t e = 0; e < weights_.size(); ++e) {
        weights_[e] = counts[static_cast<std::size_t>(model_.edges()[e].from)] * rates_[e];
        total += weights_[e];
      }
      const double dt = rng.exponential() / total;
      if (t + dt >= t_stop) {
        on_hold(t_stop - t);
        return t_stop;
      }
      on_hold(dt);
      t += dt;
      double u = rng.uniform() * total;
      std::size_t e = 0;
      for (; e + 1 < weights_.size(); ++e) {
        if (u <= weights_[e] && weights_[e] > 0.0) break;
        u -= weights_[e];
      }
      while (weights_[e] == 0.0) --e;  // guard against rounding past the last live edge
      const Edge& edge = model_.edges()[e];
      --counts[static_cast<std::size_t>(edge.from)];
      ++counts[static_cast<std::size_t>(edge.to)];
      assert(counts[static_cast<std::size_t>(edge.from)] >= 0);
      if (on_jump(t, static_cast<int>(e))) return t;
    }
  }

 private:
  const Model& model_;
  std::vector<double> xi_;
  std::vector<double> rates_;
  std::vector<double> weights_;
};

void check_initial(const Model& model, const LatticeMeasure& initial) {
  if (static_cast<int>(initial.counts().size()) != model.states())
    throw Error(ErrorKind::InvalidArgument, "initial measure has the wrong number of states");
  if (initial.N() < 1) throw Error(ErrorKind::InvalidArgument, "need at least one particle");
}

Event make_event(const Model& model, double t, int edge, const std::vector<int>& counts, Record record) {
  Event ev;
  ev.t = t;
  ev.edge = edge;
  ev.from = model.edges()[static_cast<std::size_t>(edge)].from;
  ev.to = model.edges()[static_cast<std::size_t>(edge)].to;
  if (record == Record::FullPath) ev.counts = counts;
  return ev;
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

SimPath gillespie_path(const Model& model, const SimConfig& cfg) {
  check_initial(model, cfg.initial);
  if (!(cfg.t_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_max must be positive");
  CounterRng rng(cfg.seed, cfg.replica);
  std::vector<int> counts = cfg.initial.counts();
  SimPath path;
  std::optional<LatticeIndex> index;
  if (cfg.occupation) {
    index.emplace(cfg.initial.N(), model.states());
    path.occupation.assign(static_cast<std::size_t>(index->size()), 0.0);
  }
  Stepper stepper(model);
  path.t_end = stepper.run(
      counts, 0.0, cfg.t_max, rng,
      [&](double t, int edge) {
        ++path.event_count;
        if (cfg.record != Record::HittingFlags) path.events.push_back(make_event(model, t, edge, counts, cfg.record));
        return false;
      },
      [&](double held) {
        if (index) path.occupation[static_cast<std::size_t>(index->rank(counts))] += held;
      });
  path.final_state = LatticeMeasure(counts);
  return path;
}

bool HittingSpec::hits(const SimplexPoint& xi) const {
  for (const Ball& b : target)
    if (distance(xi, b.center) <= b.radius) return true;
  return false;
}

bool HittingSpec::killed(const SimplexPoint& xi) const {
  for (const Ball& b : avoid)
    if (distance(xi, b.center) <= b.radius) return true;
  return false;
}

HittingSpec neighbourhoods(const std::vector<SimplexPoint>& centres, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "neighbourhood radius must be positive");
  HittingSpec spec;
  for (const auto& c : centres) spec.target.push_back({c, radius});
  return spec;
}

HittingResult hitting_time(const Model& model, const SimConfig& cfg, const HittingSpec& spec,
                           int replicas, int threads) {
  check_initial(model, cfg.initial);
  if (replicas < 1) throw Error(ErrorKind::InvalidArgument, "need at least one replica");
  for (const auto& b : spec.target)
    if (!(b.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "target radii must be positive");
  if (spec.target.empty()) throw Error(ErrorKind::InvalidArgument, "target region is empty");

  const int n = cfg.initial.N();
  HittingResult result;
  result.times.assign(static_cast<std::size_t>(replicas), kInf);
  std::vector<char> was_killed(static_cast<std::size_t>(replicas), 0);

  parallel_for(replicas, threads, [&](long r) {
    std::vector<int> counts = cfg.initial.counts();
    if (inside_any(spec.target, counts, n)) {
      result.times[static_cast<std::size_t>(r)] = 0.0;
      return;
    }
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(r));
    Stepper stepper(model);
    bool hit = false;
    bool dead = false;
    const double t = stepper.run(
        counts, 0.0, cfg.t_max, rng,
        [&](double, int) {
          if (inside_any(spec.target, counts, n)) return hit = true;
          if (!spec.avoid.empty() && inside_any(spec.avoid, counts, n)) return dead = true;
          return false;
        },
        [](double) {});
    if (hit) result.times[static_cast<std::size_t>(r)] = t;
    if (dead) was_killed[static_cast<std::size_t>(r)] = 1;
  });

  std::vector<double> reached;
  for (int r = 0; r < replicas; ++r) {
    const double t = result.times[static_cast<std::size_t>(r)];
    if (std::isfinite(t))
      reached.push_back(t);
    else if (was_killed[static_cast<std::size_t>(r)])
      ++result.killed;
    else
      ++result.censored;
  }
  if (reached.empty()) throw Error(ErrorKind::AllCensored, "no replica reached the target");
  std::sort(reached.begin(), reached.end());
  result.mean = std::accumulate(reached.begin(), reached.end(), 0.0) / static_cast<double>(reached.size());
  result.log_mean_over_n = std::log(result.mean) / n;
  result.median = quantile(reached, 0.5);
  result.q10 = quantile(reached, 0.1);
  result.q90 = quantile(reached, 0.9);
  return result;
}

// ---------------------------------------------------------------------------
// Annealing

int anneal_initial_size(double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "cooling constant c must be positive");
  int n = std::max(1, static_cast<int>(std::ceil(std::log(2.0) / c)));
  while (n > 1 && std::exp((n - 1) * c) - 2.0 >= 0.0) --n;
  while (std::exp(n * c) - 2.0 < 0.0) ++n;
  return n;
}

double anneal_injection_time(double c, int N) {
  if (N <= anneal_initial_size(c)) return 0.0;
  return std::exp(N * c) - 2.0;
}

LatticeMeasure anneal_start(double c, const SimplexPoint& xi) {
  return nearest_lattice_point(xi, anneal_initial_size(c));
}

namespace {

/// Runs one annealing replica, reporting jumps, injections and checkpoint crossings.
template <class OnEvent, class OnCheckpoint>
void run_anneal(const Model& model, const AnnealConfig& cfg, CounterRng& rng,
                const std::vector<double>& checkpoints, OnEvent&& on_event, OnCheckpoint&& on_checkpoint) {
  std::vector<int> counts = cfg.initial.counts();
  int n = cfg.initial.N();
  double t = 0.0;
  std::size_t next_checkpoint = 0;
  Stepper stepper(model);
  while (true) {
    const double inject_at = anneal_injection_time(cfg.c, n + 1);
    const bool injects = inject_at <= cfg.t_max;
    const double horizon = injects ? inject_at : cfg.t_max;
    // checkpoints split the horizon so the state is read at the exact time; a checkpoint
    // at an injection time sees the particle already added
    while (next_checkpoint < checkpoints.size() &&
           (injects ? checkpoints[next_checkpoint] < horizon : checkpoints[next_checkpoint] <= horizon)) {
      t = stepper.run(counts, t, checkpoints[next_checkpoint], rng,
                      [&](double at, int edge) { on_event(at, edge, counts); return false; },
                      [](double) {});
      on_checkpoint(next_checkpoint, counts, n);
      ++next_checkpoint;
    }
    t = stepper.run(counts, t, horizon, rng,
                    [&](double at, int edge) { on_event(at, edge, counts); return false; }, [](double) {});
    if (!injects) return;
    ++counts[static_cast<std::size_t>(cfg.z0)];
    ++n;
    on_event(t, -1, counts);
  }
}

void check_anneal(const Model& model, const AnnealConfig& cfg) {
  check_initial(model, cfg.initial);
  if (cfg.z0 < 0 || cfg.z0 >= model.states()) throw Error(ErrorKind::InvalidArgument, "z0 is not a state");
  if (cfg.initial.N() != anneal_initial_size(cfg.c))
    throw Error(ErrorKind::InvalidArgument,
                "initial measure must hold N0 = " + std::to_string(anneal_initial_size(cfg.c)) + " particles");
  if (!(cfg.t_max > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_max must be positive");
}

}  // namespace

SimPath anneal_path(const Model& model, const AnnealConfig& cfg) {
  check_anneal(model, cfg);
  CounterRng rng(cfg.seed, cfg.replica);
  SimPath path;
  std::vector<int> last = cfg.initial.counts();
  run_anneal(
      model, cfg, rng, {},
      [&](double t, int edge, const std::vector<int>& counts) {
        ++path.event_count;
        last = counts;
        if (cfg.record == Record::HittingFlags) return;
        Event ev;
        if (edge >= 0) {
          ev = make_event(model, t, edge, counts, cfg.record);
        } else {
          ev.t = t;
          ev.to = cfg.z0;
          ev.injection = true;
          if (cfg.record == Record::FullPath) ev.counts = counts;
        }
        path.events.push_back(std::move(ev));
      },
      [](std::size_t, const std::vector<int>&, int) {});
  path.final_state = LatticeMeasure(last);
  path.t_end = cfg.t_max;
  return path;
}

double wilson_half_width(int successes, int trials) {
  if (trials <= 0) return 0.0;
  const double z = 1.959963984540054;
  const double n = trials;
  const double p = successes / n;
  return z / (1.0 + z * z / n) * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
}

AnnealSuccess anneal_success(const Model& model, const AnnealConfig& cfg, const HittingSpec& target,
                             const std::vector<double>& checkpoints, int replicas, int threads) {
  check_anneal(model, cfg);
  if (replicas < 1) throw Error(ErrorKind::InvalidArgument, "need at least one replica");
  if (checkpoints.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one checkpoint");
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    if (!(checkpoints[i] > 0.0) || (i > 0 && !(checkpoints[i] > checkpoints[i - 1])))
      throw Error(ErrorKind::InvalidArgument, "checkpoints must be positive and increasing");

  AnnealConfig run_cfg = cfg;
  run_cfg.t_max = checkpoints.back();
  const std::size_t k = checkpoints.size();
  std::vector<char> inside(static_cast<std::size_t>(replicas) * k, 0);
  std::vector<int> sizes(k, 0);

  parallel_for(replicas, threads, [&](long r) {
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(r));
    run_anneal(
        model, run_cfg, rng, checkpoints, [](double, int, const std::vector<int>&) {},
        [&](std::size_t i, const std::vector<int>& counts, int n) {
          inside[static_cast<std::size_t>(r) * k + i] = inside_any(target.target, counts, n);
          if (r == 0) sizes[i] = n;
        });
  });

  AnnealSuccess out;
  out.checkpoints = checkpoints;
  out.replicas = replicas;
  out.particles = sizes;
  for (std::size_t i = 0; i < k; ++i) {
    int hits = 0;
    for (int r = 0; r < replicas; ++r) hits += inside[static_cast<std::size_t>(r) * k + i];
    out.inside.push_back(hits);
    out.fraction.push_back(static_cast<double>(hits) / replicas);
    out.half_width.push_back(wilson_half_width(hits, replicas));
  }
  return out;
}

}  // namespace mfjp
