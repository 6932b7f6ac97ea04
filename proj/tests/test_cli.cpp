#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "mfjp/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

/// Runs the command line tool with stderr folded into the captured output.
Result run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MFJP_CLI + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string model(const char* name) { return std::string(MFJP_MODELS) + "/" + name; }

fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "mfjp_cli_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("validation errors exit with 2") {
  const auto r = run_cli("validate --model " + model("bad.json"));
  CHECK(r.code == 2);
  CHECK(r.out.find("NotIrreducible") != std::string::npos);
  CHECK(run_cli("validate --model " + model("cw.json")).code == 0);
  CHECK(run_cli("validate --model /nonexistent.json").code == 2);
  CHECK(run_cli("spectrum --model " + model("cw.json")).code == 2);  // --N missing
  CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("numerical failures exit with 3 and caps with 4") {
  CHECK(run_cli("spectrum --model " + model("cyc3.json") + " --N 10").code == 3);  // not reversible
  const auto r = run_cli("spectrum --model " + model("cyc3.json") + " --N 4000");
  CHECK(r.code == 4);
  CHECK(r.out.find("CapExceeded") != std::string::npos);
}

TEST_CASE("hierarchy from a hand-written two-attractor matrix") {
  const auto r = run_cli("hierarchy --cost " + model("cost_2x2.json"));
  REQUIRE(r.code == 0);
  const auto doc = mfjp::io::Json::parse(r.out);
  CHECK(doc.at("Lambda").get<double>() == 2.0);
  CHECK(doc.at("c_star").get<double>() == 2.0);
  CHECK(doc.at("L0_tilde") == mfjp::io::Json::array({2}));
  CHECK(doc.at("schema") == "mfjp/1");
}

TEST_CASE("pipeline report and reproducibility") {
  const auto dir = scratch();
  const std::string args =
      "pipeline --model " + model("cw.json") + " --resolution 150 --N-range 40:400:40 --out ";
  REQUIRE(run_cli(args + (dir / "a.json").string()).code == 0);
  REQUIRE(run_cli(args + (dir / "b.json").string(), "MFJP_THREADS=1").code == 0);
  REQUIRE(run_cli(args + (dir / "c.json").string() + " --threads 3").code == 0);

  const auto doc = mfjp::io::Json::parse(mfjp::io::read_file(dir / "a.json"));
  const double lambda = doc.at("hierarchy").at("Lambda").get<double>();
  const double slope = doc.at("lambda2_scaling").at("slope").get<double>();
  CHECK(lambda > 0.0);
  CHECK(std::abs(-slope - lambda) <= 0.15 * lambda);
  CHECK(doc.at("lambda2_scaling").at("table").size() == 10);
  CHECK(doc.at("cost_matrix").at("size") == 2);
  CHECK(doc.at("manifest") == "a.json.manifest.json");

  const auto manifest = mfjp::io::Json::parse(mfjp::io::read_file(dir / "a.json.manifest.json"));
  CHECK(manifest.at("outputs").at(0) == (dir / "a.json").string());
  CHECK(manifest.at("model_hash").get<std::string>().rfind("sha256:", 0) == 0);

  // identical apart from the manifest name, whatever the thread count
  auto strip = [](mfjp::io::Json d) {
    d.erase("manifest");
    return d.dump();
  };
  const auto b = mfjp::io::Json::parse(mfjp::io::read_file(dir / "b.json"));
  const auto c = mfjp::io::Json::parse(mfjp::io::read_file(dir / "c.json"));
  CHECK(strip(doc) == strip(b));
  CHECK(strip(doc) == strip(c));
  fs::remove_all(dir);
}

TEST_CASE("simulation outputs are byte-identical for a fixed seed") {
  const auto dir = scratch();
  const std::string args = "simulate --model " + model("cw.json") + " --N 30 --from 1 --t-max 5 --seed 9 --events ";
  REQUIRE(run_cli(args + (dir / "a.csv").string() + " --out " + (dir / "a.json").string()).code == 0);
  REQUIRE(run_cli(args + (dir / "b.csv").string() + " --out " + (dir / "b.json").string()).code == 0);
  CHECK(mfjp::io::read_file(dir / "a.csv") == mfjp::io::read_file(dir / "b.csv"));
  CHECK(mfjp::io::read_file(dir / "a.csv").rfind("t,edge_from,edge_to,down,up\n", 0) == 0);

  const auto hit = run_cli("hit --model " + model("cw.json") + " --N 20 --from 1 --target 2 --replicas 20 --seed 4");
  REQUIRE(hit.code == 0);
  CHECK(mfjp::io::Json::parse(hit.out).at("censored") == 0);
  fs::remove_all(dir);
}
