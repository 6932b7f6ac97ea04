#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "mfjp/action.hpp"
#include "mfjp/dynamics.hpp"
#include "mfjp/error.hpp"
#include "mfjp/hierarchy.hpp"
#include "mfjp/io.hpp"
#include "mfjp/quasipotential.hpp"
#include "mfjp/simulate.hpp"
#include "mfjp/spectral.hpp"

namespace fs = std::filesystem;
using namespace mfjp;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Bookkeeping for one invocation. Outputs are written atomically; when any output
/// goes to a file, a manifest is written next to it and every JSON output names it.
class Run {
 public:
  Run(int argc, char** argv) : started_(utc_now()) {
    for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
  }

  std::string manifest_path;
  int threads = 0;

  void input(const std::string& path) { inputs_.push_back({path, sha256_hex(io::read_file(path))}); }
  void seed(std::uint64_t s) { seeds_.push_back(s); }

  void emit_json(const std::string& path, Json doc) {
    if (!path.empty()) claim_manifest(path);
    if (!manifest_path.empty()) doc["manifest"] = fs::path(manifest_path).filename().string();
    emit_text(path, io::dump(doc));
  }

  void emit_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
      std::cout << text;
      return;
    }
    claim_manifest(path);
    io::write_atomic(path, text);
    outputs_.push_back(path);
  }

  void finish() const {
    if (manifest_path.empty() || outputs_.empty()) return;
    Json doc;
    doc["schema"] = io::kSchema;
    doc["tool"] = "mfjp";
    doc["version"] = kVersion;
    doc["command_line"] = argv_;
    Json inputs = Json::array();
    for (const auto& [path, hash] : inputs_) inputs.push_back({{"path", path}, {"sha256", hash}});
    doc["inputs"] = inputs;
    if (!inputs_.empty()) doc["model_hash"] = "sha256:" + inputs_.front().second;
    doc["seeds"] = seeds_;
    doc["started"] = started_;
    doc["finished"] = utc_now();
    doc["outputs"] = outputs_;
    io::write_atomic(manifest_path, io::dump(doc));
  }

 private:
  void claim_manifest(const std::string& path) {
    if (manifest_path.empty()) manifest_path = path + ".manifest.json";
  }

  std::vector<std::string> argv_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::string> outputs_;
};

/// Model plus lazily computed attractors, which 1-based indices on the command line
/// refer to.
class Session {
 public:
  Session(Run& run, const std::string& model_path, int threads)
      : model_(load(run, model_path)), threads_(threads) {
    validation_ = validate_model(model_);
  }

  const Model& model() const { return model_; }
  const ValidationReport& validation() const { return validation_; }

  const AttractorSet& attractors() {
    if (!attractors_) {
      AttractorOptions options;
      options.threads = threads_;
      attractors_ = find_attractors(model_, options);
    }
    return *attractors_;
  }

  /// Replaces the attractor list, e.g. with the one stored in a cost-matrix file.
  void use_attractors(std::vector<SimplexPoint> stable) { stable_ = std::move(stable); }

  const std::vector<SimplexPoint>& stable() {
    if (!stable_) stable_ = attractors().stable();
    return *stable_;
  }

  /// 1-based attractor index or comma-separated weights.
  SimplexPoint site(const std::string& text) {
    const auto idx = attractor_index(text);
    if (idx) return stable()[static_cast<std::size_t>(*idx)];
    return io::parse_point(text, model_.states());
  }

  std::optional<int> attractor_index(const std::string& text) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    const int k = std::stoi(text);
    const int l = static_cast<int>(stable().size());
    if (k < 1 || k > l)
      throw Error(ErrorKind::InvalidArgument,
                  "attractor index " + text + " out of range 1.." + std::to_string(l));
    return k - 1;
  }

 private:
  static Model load(Run& run, const std::string& path) {
    run.input(path);
    return io::load_model(path);
  }

  Model model_;
  int threads_;
  ValidationReport validation_;
  std::optional<AttractorSet> attractors_;
  std::optional<std::vector<SimplexPoint>> stable_;
};

std::vector<double> parse_list(const std::string& text) {
  std::string s = text;
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  double x = 0.0;
  while (in >> x) out.push_back(x);
  if (!in.eof() || out.empty()) throw Error(ErrorKind::InvalidArgument, "bad number list '" + text + "'");
  return out;
}

/// "a:b:s" -> a, a+s, ..., up to b; a single integer is a one-element range.
std::vector<int> parse_range(const std::string& text) {
  int a = 0;
  int b = 0;
  int s = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d:%d%c", &a, &b, &s, &tail) == 3) {
    if (s <= 0 || b < a || a < 1) throw Error(ErrorKind::InvalidArgument, "bad range '" + text + "'");
    std::vector<int> out;
    for (int n = a; n <= b; n += s) out.push_back(n);
    return out;
  }
  if (std::sscanf(text.c_str(), "%d%c", &a, &tail) == 1 && a >= 1) return {a};
  throw Error(ErrorKind::InvalidArgument, "bad range '" + text + "', expected a:b:step");
}

Json point_json(const SimplexPoint& p) { return io::numbers(p.weights()); }

Json indices_1based(const std::vector<int>& xs) {
  Json out = Json::array();
  for (int x : xs) out.push_back(x + 1);
  return out;
}

std::string path_csv(const Model& model, const std::vector<double>& times, const std::vector<SimplexPoint>& points) {
  std::string out = "t";
  for (const auto& label : model.labels()) out += "," + label;
  out += "\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out += io::format_number(times[i]);
    for (Eigen::Index k = 0; k < points[i].size(); ++k) out += "," + io::format_number(points[i][k]);
    out += "\n";
  }
  return out;
}

/// Columns t, edge_from, edge_to, then one count per state when recorded. Injection
/// rows leave edge_from empty and put the injected state in edge_to.
std::string events_csv(const Model& model, const SimPath& path) {
  const auto& labels = model.labels();
  std::string out = "t,edge_from,edge_to";
  for (const auto& label : labels) out += "," + label;
  out += "\n";
  for (const auto& ev : path.events) {
    out += io::format_number(ev.t) + ",";
    if (!ev.injection) out += labels[static_cast<std::size_t>(ev.from)];
    out += "," + labels[static_cast<std::size_t>(ev.to)];
    for (int c : ev.counts) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

Json attractors_json(const AttractorSet& set) {
  Json fps = Json::array();
  for (const auto& fp : set.fixed_points) {
    Json spectrum = Json::array();
    for (const auto& z : fp.spectrum) spectrum.push_back({io::number(z.real()), io::number(z.imag())});
    fps.push_back({{"location", point_json(fp.location)},
                   {"stability", std::string(to_string(fp.stability))},
                   {"spectrum", spectrum},
                   {"drift_norm", io::number(fp.drift_norm)}});
  }
  Json stable = Json::array();
  for (const auto& p : set.stable()) stable.push_back(point_json(p));
  Json diagnostics = Json::array();
  for (const auto& d : set.diagnostics)
    diagnostics.push_back({{"start", d.start}, {"kind", std::string(to_string(d.kind))}, {"message", d.message}});
  return {{"fixed_points", fps}, {"stable", stable}, {"diagnostics", diagnostics}};
}

Json cost_json(const CostMatrix& cost, const std::vector<SimplexPoint>& attractors, double rho0, int resolution) {
  Json doc = io::to_json(cost);
  Json points = Json::array();
  for (const auto& p : attractors) points.push_back(point_json(p));
  doc["attractors"] = points;
  doc["resolution"] = resolution;
  doc["rho0"] = io::number(rho0);
  return doc;
}

Json hierarchy_json(const HierarchyReport& h) {
  Json levels = Json::array();
  for (const auto& level : h.levels) {
    Json nodes = Json::array();
    for (const auto& node : level)
      nodes.push_back({{"members", indices_1based(node.members)},
                       {"vtilde", io::number(node.vtilde)},
                       {"vhat", io::number(node.vhat)},
                       {"arrows", indices_1based(node.arrows)}});
    levels.push_back(nodes);
  }
  Json a = Json::array();
  for (const auto& ak : h.a) a.push_back(indices_1based(ak));
  return {{"size", h.vtilde.rows()},
          {"W", io::numbers(h.w)},
          {"Lambda", io::number(h.lambda)},
          {"Lambda_cross_check", io::number(h.lambda_cross_check)},
          {"c_star", io::number(h.c_star)},
          {"c", io::numbers(h.c)},
          {"m", h.m},
          {"L0_tilde", indices_1based(h.l0_tilde)},
          {"levels", levels},
          {"A", a},
          {"tree", h.tree}};
}

std::vector<Ball> balls(Session& s, const std::vector<std::string>& sites, double radius) {
  std::vector<Ball> out;
  for (const auto& text : sites) out.push_back({s.site(text), radius});
  return out;
}

struct Common {
  std::string model;
  std::string out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metastability of finite-state mean-field jump processes"};
  app.require_subcommand(1);
  app.fallthrough();
  Run run(argc, argv);
  app.add_option("--threads", run.threads, "worker threads (default: MFJP_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--manifest", run.manifest_path, "manifest path (default: <first output>.manifest.json)");

  std::function<void()> action;
  Common common;
  auto model_opt = [&](CLI::App* sub) { sub->add_option("--model", common.model, "model JSON file")->required(); };
  auto out_opt = [&](CLI::App* sub, const char* what) {
    sub->add_option("--out", common.out, what);
  };

  // validate
  {
    auto* sub = app.add_subcommand("validate", "check irreducibility and rate bounds");
    model_opt(sub);
    out_opt(sub, "report JSON (default stdout)");
    static int grid = 100;
    sub->add_option("--grid", grid, "lattice resolution of the rate check")->check(CLI::PositiveNumber);
    sub->callback([&] {
      action = [&] {
        run.input(common.model);
        const Model model = io::load_model(common.model);
        const auto r = validate_model(model, grid);
        Json doc{{"schema", io::kSchema}, {"model", model.name()}, {"irreducible", r.irreducible},
                 {"c", io::number(r.c)}, {"C", io::number(r.C)}, {"edge_min", io::numbers(r.edge_min)},
                 {"edge_max", io::numbers(r.edge_max)}, {"grid_resolution", r.grid_resolution}};
        run.emit_json(common.out, doc);
      };
    });
  }

  // flow
  {
    auto* sub = app.add_subcommand("flow", "integrate the McKean-Vlasov ODE");
    model_opt(sub);
    out_opt(sub, "path CSV (default stdout)");
    static std::string from;
    static double t_max = 10.0;
    static double dt = 1e-2;
    sub->add_option("--from", from, "start point (weights)")->required();
    sub->add_option("--t-max", t_max)->check(CLI::PositiveNumber);
    sub->add_option("--dt", dt)->check(CLI::PositiveNumber);
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        const auto path = mve_flow(s.model(), s.site(from), t_max, dt);
        run.emit_text(common.out, path_csv(s.model(), path.times, path.points));
      };
    });
  }

  // attractors
  {
    auto* sub = app.add_subcommand("attractors", "find fixed points and classify them");
    model_opt(sub);
    out_opt(sub, "report JSON (default stdout)");
    static int starts = 0;
    static std::uint64_t seed = 1;
    sub->add_option("--starts", starts, "number of starts (default 10 per state)");
    sub->add_option("--seed", seed);
    sub->callback([&] {
      action = [&] {
        run.input(common.model);
        const Model model = io::load_model(common.model);
        validate_model(model);
        AttractorOptions options;
        options.n_starts = starts;
        options.seed = seed;
        options.threads = run.threads;
        run.seed(seed);
        Json doc{{"schema", io::kSchema}, {"model", model.name()}};
        doc.update(attractors_json(find_attractors(model, options)));
        run.emit_json(common.out, doc);
      };
    });
  }

  // cost
  {
    auto* sub = app.add_subcommand("cost", "finite-horizon cost S_T by knot optimisation");
    model_opt(sub);
    out_opt(sub, "report JSON (default stdout)");
    static std::string from, to, path_out;
    static double T = 1.0;
    static int knots = 8;
    sub->add_option("--from", from, "start point or 1-based attractor index")->required();
    sub->add_option("--to", to, "end point or 1-based attractor index")->required();
    sub->add_option("--T", T, "time horizon")->check(CLI::PositiveNumber);
    sub->add_option("--knots", knots, "number of equal-duration segments")->check(CLI::PositiveNumber);
    sub->add_option("--path-out", path_out, "minimising path CSV");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        const auto r = terminal_cost(s.model(), s.site(from), s.site(to), T, knots);
        if (!path_out.empty()) run.emit_text(path_out, path_csv(s.model(), r.path.times, r.path.points));
        run.emit_json(common.out, {{"schema", io::kSchema}, {"value", io::number(r.value)}, {"T", T},
                                   {"knots", knots}, {"converged", r.converged}, {"iterations", r.iterations}});
      };
    });
  }

  // quasipotential
  {
    auto* sub = app.add_subcommand("quasipotential",
                                   "lattice quasipotential between two points, or the cost matrix between attractors");
    model_opt(sub);
    out_opt(sub, "report JSON, or the cost matrix without --from/--to (default stdout)");
    static std::string from, to, path_out;
    static int resolution = 100;
    static bool exclude_others = false;
    static bool polish = false;
    static double rho0 = -1.0;
    sub->add_option("--from", from, "start point or 1-based attractor index");
    sub->add_option("--to", to, "end point or 1-based attractor index");
    sub->add_option("--resolution", resolution, "lattice resolution M")->check(CLI::Range(20, 1 << 20));
    sub->add_flag("--exclude-others", exclude_others, "avoid the rho0 balls of the other attractors");
    sub->add_flag("--polish", polish, "refine the polygonal minimiser by knot optimisation");
    sub->add_option("--rho0", rho0, "exclusion radius (default a quarter of the closest attractor spacing)");
    sub->add_option("--path-out", path_out, "minimising path CSV");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        if (from.empty() != to.empty()) throw Error(ErrorKind::InvalidArgument, "give both --from and --to");
        if (from.empty()) {
          VtildeOptions options;
          options.rho0 = rho0;
          options.threads = run.threads;
          const CostLattice lattice(s.model(), resolution, run.threads);
          const auto& stable = s.stable();
          const auto cost = vtilde_matrix(lattice, stable, options);
          const double radius = rho0 > 0 ? rho0 : default_exclusion_radius(stable);
          Json doc = cost_json(cost, stable, stable.size() > 1 ? radius : 0.0, resolution);
          doc["model"] = s.model().name();
          run.emit_json(common.out, doc);
          return;
        }
        const SimplexPoint a = s.site(from);
        const SimplexPoint b = s.site(to);
        std::vector<Ball> forbidden;
        if (exclude_others) {
          const auto ia = s.attractor_index(from);
          const auto ib = s.attractor_index(to);
          if (!ia || !ib) throw Error(ErrorKind::InvalidArgument, "--exclude-others needs attractor indices");
          if (polish) throw Error(ErrorKind::InvalidArgument, "--polish does not respect --exclude-others");
          const auto& stable = s.stable();
          const double radius = rho0 > 0 ? rho0 : default_exclusion_radius(stable);
          for (int k = 0; k < static_cast<int>(stable.size()); ++k)
            if (k != *ia && k != *ib) forbidden.push_back({stable[static_cast<std::size_t>(k)], radius});
        }
        const auto lattice = build_cost_lattice(s.model(), resolution, forbidden, run.threads);
        QuasipotentialResult r;
        if (forbidden.empty()) {
          r = quasipotential(lattice.lattice, a, b, polish);
        } else {
          const auto sp = lattice.lattice.shortest_path(lattice.lattice.nearest_node(a), lattice.lattice.nearest_node(b),
                                                        &lattice.mask);
          r.value = sp.value;
          r.path = sp.path;
        }
        if (!path_out.empty()) run.emit_text(path_out, path_csv(s.model(), r.path.times, r.path.points));
        run.emit_json(common.out, {{"schema", io::kSchema}, {"value", io::number(r.value)},
                                   {"resolution", resolution}, {"polished", r.polished},
                                   {"excluded", forbidden.size()}});
      };
    });
  }

  // hierarchy
  {
    auto* sub = app.add_subcommand("hierarchy", "cycle hierarchy, Lambda and c* from a cost matrix");
    out_opt(sub, "report JSON (default stdout)");
    static std::string cost_path;
    static int resolution = 100;
    sub->add_option("--cost", cost_path, "cost-matrix JSON");
    sub->add_option("--model", common.model, "model JSON, used when no --cost is given");
    sub->add_option("--resolution", resolution, "lattice resolution M with --model")->check(CLI::Range(20, 1 << 20));
    sub->callback([&] {
      action = [&] {
        CostMatrix cost;
        if (!cost_path.empty()) {
          run.input(cost_path);
          cost = io::load_cost_matrix(cost_path);
        } else if (!common.model.empty()) {
          Session s(run, common.model, run.threads);
          cost = vtilde_matrix(CostLattice(s.model(), resolution, run.threads), s.stable(), {-1.0, run.threads});
        } else {
          throw Error(ErrorKind::InvalidArgument, "hierarchy needs --cost or --model");
        }
        Json doc{{"schema", io::kSchema}};
        doc.update(hierarchy_json(build_cycle_hierarchy(cost, run.threads)));
        run.emit_json(common.out, doc);
      };
    });
  }

  // spectrum
  {
    auto* sub = app.add_subcommand("spectrum", "second eigenvalue of the N-particle generator");
    model_opt(sub);
    out_opt(sub, "report JSON (default stdout)");
    static std::string range, csv;
    static bool full = false;
    sub->add_option("--N,--N-range", range, "N or a:b:step")->required();
    sub->add_option("--csv", csv, "CSV with N, lambda2, log_lambda2_over_N");
    sub->add_flag("--full", full, "include the full spectrum (dense solve, capped)");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        const auto sizes = parse_range(range);
        Json reports = Json::array();
        std::vector<double> lambda2;
        std::string table = "N,lambda2,log_lambda2_over_N\n";
        for (int N : sizes) {
          const auto r = spectral_report(s.model(), N, full, run.threads);
          lambda2.push_back(r.lambda2);
          table += std::to_string(N) + "," + io::format_number(r.lambda2) + "," +
                   io::format_number(std::log(r.lambda2) / N) + "\n";
          Json entry{{"N", N}, {"reversibility_residual", io::number(r.reversibility_residual)},
                     {"lambda2", io::number(r.lambda2)}};
          if (r.spectrum) entry["spectrum"] = io::numbers(*r.spectrum);
          reports.push_back(entry);
        }
        Json doc{{"schema", io::kSchema}, {"model", s.model().name()}, {"reports", reports}};
        if (sizes.size() >= 2) {
          const auto fit = log_scaling_fit(sizes, lambda2);
          doc["slope"] = io::number(fit.slope);
          doc["intercept"] = io::number(fit.intercept);
        }
        if (!csv.empty()) run.emit_text(csv, table);
        run.emit_json(common.out, doc);
      };
    });
  }

  // mix
  {
    auto* sub = app.add_subcommand("mix", "exact total-variation distance to equilibrium");
    model_opt(sub);
    out_opt(sub, "CSV with t, tv (default stdout)");
    static int N = 0;
    static std::string from, times, log_times;
    sub->add_option("--N", N)->required()->check(CLI::PositiveNumber);
    sub->add_option("--from", from, "start point or 1-based attractor index")->required();
    sub->add_option("--times", times, "comma-separated times");
    sub->add_option("--log-times", log_times, "lo:hi:count, log-spaced");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        std::vector<double> ts;
        if (!times.empty()) ts = parse_list(times);
        if (!log_times.empty()) {
          double lo = 0.0;
          double hi = 0.0;
          int count = 0;
          if (std::sscanf(log_times.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || !(lo > 0.0) || !(hi > lo) ||
              count < 2)
            throw Error(ErrorKind::InvalidArgument, "bad --log-times '" + log_times + "'");
          for (int k = 0; k < count; ++k) ts.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
        }
        if (ts.empty()) throw Error(ErrorKind::InvalidArgument, "mix needs --times or --log-times");
        const auto gen = build_generator(s.model(), N, run.threads);
        const Vector p = invariant_measure(gen);
        const auto tv = tv_mixing_curve(gen, p, nearest_lattice_point(s.site(from), N), ts);
        std::string out = "t,tv\n";
        for (std::size_t i = 0; i < ts.size(); ++i) out += io::format_number(ts[i]) + "," + io::format_number(tv[i]) + "\n";
        run.emit_text(common.out, out);
      };
    });
  }

  // simulate
  {
    auto* sub = app.add_subcommand("simulate", "exact-event simulation of the empirical measure");
    model_opt(sub);
    out_opt(sub, "summary JSON (default stdout)");
    static int N = 0;
    static std::string from, events;
    static double t_max = 1.0;
    static std::uint64_t seed = 1, replica = 0;
    sub->add_option("--N", N)->required()->check(CLI::PositiveNumber);
    sub->add_option("--from", from, "start point or 1-based attractor index")->required();
    sub->add_option("--t-max", t_max)->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed);
    sub->add_option("--replica", replica);
    sub->add_option("--events", events, "event CSV");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        run.seed(seed);
        SimConfig cfg{nearest_lattice_point(s.site(from), N), t_max, seed, replica,
                      events.empty() ? Record::HittingFlags : Record::FullPath, false};
        const auto path = gillespie_path(s.model(), cfg);
        if (!events.empty()) run.emit_text(events, events_csv(s.model(), path));
        run.emit_json(common.out, {{"schema", io::kSchema}, {"model", s.model().name()}, {"N", N},
                                   {"seed", seed}, {"replica", replica}, {"t_max", t_max},
                                   {"initial", cfg.initial.counts()}, {"event_count", path.event_count},
                                   {"final", path.final_state.counts()}});
      };
    });
  }

  // hit
  {
    auto* sub = app.add_subcommand("hit", "Monte Carlo hitting times");
    model_opt(sub);
    out_opt(sub, "summary JSON (default stdout)");
    static int N = 0, replicas = 100;
    static std::string from, times_out;
    static std::vector<std::string> targets, avoid;
    static double radius = 0.05, t_max = 1e6;
    static std::uint64_t seed = 1;
    sub->add_option("--N", N)->required()->check(CLI::PositiveNumber);
    sub->add_option("--from", from, "start point or 1-based attractor index")->required();
    sub->add_option("--target", targets, "target ball centre: point or 1-based attractor index")->required();
    sub->add_option("--avoid", avoid, "kill-region ball centre");
    sub->add_option("--radius", radius, "ball radius (max-norm)")->check(CLI::PositiveNumber);
    sub->add_option("--replicas", replicas)->check(CLI::PositiveNumber);
    sub->add_option("--t-max", t_max, "censoring time")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed);
    sub->add_option("--times-out", times_out, "per-replica CSV");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        run.seed(seed);
        SimConfig cfg{nearest_lattice_point(s.site(from), N), t_max, seed, 0, Record::HittingFlags, false};
        const HittingSpec spec{balls(s, targets, radius), balls(s, avoid, radius)};
        const auto r = hitting_time(s.model(), cfg, spec, replicas, run.threads);
        if (!times_out.empty()) {
          std::string out = "replica,time\n";
          for (std::size_t i = 0; i < r.times.size(); ++i)
            out += std::to_string(i) + "," + io::format_number(r.times[i]) + "\n";
          run.emit_text(times_out, out);
        }
        run.emit_json(common.out, {{"schema", io::kSchema}, {"model", s.model().name()}, {"N", N},
                                   {"replicas", replicas}, {"seed", seed}, {"t_max", t_max},
                                   {"censored", r.censored}, {"killed", r.killed}, {"mean", io::number(r.mean)},
                                   {"log_mean_over_N", io::number(r.log_mean_over_n)},
                                   {"median", io::number(r.median)}, {"q10", io::number(r.q10)},
                                   {"q90", io::number(r.q90)}});
      };
    });
  }

  // anneal
  {
    auto* sub = app.add_subcommand("anneal", "annealing with particle injection");
    model_opt(sub);
    out_opt(sub, "summary JSON (default stdout)");
    static double c = 0.0, c_factor = 0.0, radius = 0.1;
    static std::string from, z0, checkpoints, checkpoint_sizes, cost_path, events;
    static std::vector<std::string> targets;
    static int replicas = 100, resolution = 100;
    static std::uint64_t seed = 1;
    sub->add_option("--c", c, "injection schedule constant");
    sub->add_option("--c-factor", c_factor, "use c = factor * c* from the hierarchy");
    sub->add_option("--cost", cost_path, "cost-matrix JSON for c* and the default target");
    sub->add_option("--resolution", resolution, "lattice resolution when no --cost is given")
        ->check(CLI::Range(20, 1 << 20));
    sub->add_option("--from", from, "start point or 1-based attractor index")->required();
    sub->add_option("--z0", z0, "state label of injected particles (default: first state)");
    sub->add_option("--checkpoints", checkpoints, "comma-separated times");
    sub->add_option("--checkpoint-sizes", checkpoint_sizes, "comma-separated N; checkpoints at t_N");
    sub->add_option("--target", targets, "target ball centre (default: the attractors in L0_tilde)");
    sub->add_option("--radius", radius, "target radius rho1")->check(CLI::PositiveNumber);
    sub->add_option("--replicas", replicas)->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed);
    sub->add_option("--events", events, "event CSV of replica 0 up to the last checkpoint");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        run.seed(seed);
        std::optional<HierarchyReport> hierarchy;
        if (c_factor > 0.0 || targets.empty()) {
          CostMatrix cost;
          if (!cost_path.empty()) {
            run.input(cost_path);
            const auto doc = Json::parse(io::read_file(cost_path));
            cost = io::cost_matrix_from_json(doc);
            if (doc.contains("attractors")) {
              std::vector<SimplexPoint> pts;
              for (const auto& p : doc.at("attractors")) pts.push_back(SimplexPoint::normalized(
                  Eigen::Map<const Vector>(p.get<std::vector<double>>().data(), static_cast<Eigen::Index>(p.size()))));
              s.use_attractors(std::move(pts));
            }
          } else {
            cost = vtilde_matrix(CostLattice(s.model(), resolution, run.threads), s.stable(), {-1.0, run.threads});
          }
          hierarchy = build_cycle_hierarchy(cost, run.threads);
        }
        if (c_factor > 0.0) c = c_factor * hierarchy->c_star;
        if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "anneal needs --c > 0 or --c-factor with c* > 0");
        HittingSpec target;
        if (targets.empty()) {
          for (int i : hierarchy->l0_tilde) target.target.push_back({s.stable()[static_cast<std::size_t>(i)], radius});
        } else {
          target.target = balls(s, targets, radius);
        }
        std::vector<double> ts;
        if (!checkpoints.empty()) ts = parse_list(checkpoints);
        if (!checkpoint_sizes.empty())
          for (double n : parse_list(checkpoint_sizes)) ts.push_back(anneal_injection_time(c, static_cast<int>(n)));
        if (ts.empty()) throw Error(ErrorKind::InvalidArgument, "anneal needs --checkpoints or --checkpoint-sizes");
        const int state = z0.empty() ? 0 : s.model().label_index(z0);
        AnnealConfig cfg{c, state, anneal_start(c, s.site(from)), ts.back(), seed, 0, Record::EventsOnly};
        const auto r = anneal_success(s.model(), cfg, target, ts, replicas, run.threads);
        if (!events.empty()) {
          cfg.record = Record::FullPath;
          run.emit_text(events, events_csv(s.model(), anneal_path(s.model(), cfg)));
        }
        Json doc{{"schema", io::kSchema}, {"model", s.model().name()}, {"c", io::number(c)}};
        if (hierarchy) {
          doc["c_star"] = io::number(hierarchy->c_star);
          doc["L0_tilde"] = indices_1based(hierarchy->l0_tilde);
        }
        doc.update(Json{{"N0", anneal_initial_size(c)}, {"z0", s.model().labels()[static_cast<std::size_t>(state)]},
                        {"radius", radius}, {"replicas", r.replicas}, {"seed", seed},
                        {"checkpoints", io::numbers(r.checkpoints)}, {"particles", r.particles},
                        {"inside", r.inside}, {"fraction", io::numbers(r.fraction)},
                        {"half_width", io::numbers(r.half_width)}});
        run.emit_json(common.out, doc);
      };
    });
  }

  // pipeline
  {
    auto* sub = app.add_subcommand("pipeline", "full analysis of a model in one report");
    model_opt(sub);
    out_opt(sub, "report JSON (default stdout)");
    static int resolution = 100;
    static std::string range;
    sub->add_option("--resolution", resolution, "lattice resolution M")->check(CLI::Range(20, 1 << 20));
    sub->add_option("--N-range", range, "a:b:step for the lambda2 scaling table");
    sub->callback([&] {
      action = [&] {
        Session s(run, common.model, run.threads);
        const auto& v = s.validation();
        Json doc{{"schema", io::kSchema}, {"model", s.model().name()},
                 {"validation", {{"irreducible", v.irreducible}, {"c", io::number(v.c)}, {"C", io::number(v.C)}}}};
        doc["attractors"] = attractors_json(s.attractors());
        const auto& stable = s.stable();
        const CostLattice lattice(s.model(), resolution, run.threads);
        const auto cost = vtilde_matrix(lattice, stable, {-1.0, run.threads});
        doc["cost_matrix"] = cost_json(cost, stable, stable.size() > 1 ? default_exclusion_radius(stable) : 0.0,
                                       resolution);
        doc["hierarchy"] = hierarchy_json(build_cycle_hierarchy(cost, run.threads));
        if (!range.empty()) {
          const auto sizes = parse_range(range);
          Json table = Json::array();
          std::vector<double> lambda2;
          bool reversible = true;
          for (int N : sizes) {
            try {
              const auto r = spectral_report(s.model(), N, false, run.threads);
              lambda2.push_back(r.lambda2);
              table.push_back({{"N", N}, {"lambda2", io::number(r.lambda2)},
                               {"log_lambda2_over_N", io::number(std::log(r.lambda2) / N)}});
            } catch (const Error& e) {
              if (e.kind() != ErrorKind::NotReversible) throw;
              reversible = false;
              break;
            }
          }
          Json scaling{{"reversible", reversible}};
          if (reversible) {
            scaling["table"] = table;
            if (sizes.size() >= 2) {
              const auto fit = log_scaling_fit(sizes, lambda2);
              scaling["slope"] = io::number(fit.slope);
              scaling["intercept"] = io::number(fit.intercept);
            }
          }
          doc["lambda2_scaling"] = scaling;
        }
        run.emit_json(common.out, doc);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    action();
    run.finish();
  } catch (const Error& e) {
    std::cerr << "mfjp: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "mfjp: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
