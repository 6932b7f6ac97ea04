#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>

#include "mfjp/error.hpp"
#include "mfjp/io.hpp"

using namespace mfjp;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("numbers round-trip through 17 digits") {
  for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.115194169}) {
    const std::string s = io::format_number(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(io::format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(io::format_number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(io::number(std::numeric_limits<double>::infinity()).is_null());
  CHECK(io::format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("model documents") {
  const Model cw = catalog::curie_weiss(1.5, 0.1);
  const auto doc = io::to_json(cw);
  CHECK(doc.at("schema") == "mfjp/1");
  const Model back = io::model_from_json(doc);
  CHECK(back.labels() == cw.labels());
  CHECK(back.edges() == cw.edges());
  CHECK(back.rate_sources() == cw.rate_sources());
  const double xi[2] = {0.3, 0.7};
  for (int e = 0; e < cw.edge_count(); ++e) CHECK(back.rate(e, xi) == cw.rate(e, xi));
  CHECK(io::dump(io::to_json(back)) == io::dump(doc));

  auto text = R"({"schema": "mfjp/1", "name": "t", "states": ["a", "b"], "edges": [["a", "b"], ["b", "a"]],
                  "rates": {"a->b": "k", "b->a": "1 + xi[a]"}, "params": {"k": 2}})";
  const Model parsed = io::model_from_json(io::Json::parse(text));
  const double at[2] = {0.25, 0.75};
  CHECK(parsed.rate(0, at) == 2.0);
  CHECK(parsed.rate(1, at) == 1.25);

  auto broken = io::Json::parse(text);
  broken["edges"][0][1] = "c";
  CHECK(kind_of([&] { io::model_from_json(broken); }) == ErrorKind::UnknownLabel);
  broken = io::Json::parse(text);
  broken["rates"].erase("a->b");
  CHECK(kind_of([&] { io::model_from_json(broken); }) == ErrorKind::InvalidArgument);
  broken = io::Json::parse(text);
  broken["schema"] = "mfjp/2";
  CHECK(kind_of([&] { io::model_from_json(broken); }) == ErrorKind::InvalidArgument);
  broken = io::Json::parse(text);
  broken["edges"] = io::Json::array({io::Json::array({"a", "b"})});
  broken["rates"] = {{"a->b", "1"}};
  const Model one_way = io::model_from_json(broken);
  CHECK(kind_of([&] { validate_model(one_way); }) == ErrorKind::NotIrreducible);
}

TEST_CASE("cost-matrix documents") {
  const auto sparse = io::cost_matrix_from_json(io::Json::parse(R"({"vtilde": {"1->2": 2, "2->1": 5}})"));
  REQUIRE(sparse.size() == 2);
  CHECK(sparse.vtilde(0, 1) == 2.0);
  CHECK(sparse.vtilde(1, 0) == 5.0);

  const auto dense = io::cost_matrix_from_json(io::Json::parse(R"({"vtilde": [[0, 1, null], [2, 0, 3], [5, 6, 0]]})"));
  CHECK(std::isinf(dense.vtilde(0, 2)));
  CHECK(dense.v(1, 2) == 3.0);

  const auto again = io::cost_matrix_from_json(io::to_json(dense));
  CHECK(std::isinf(again.vtilde(0, 2)));
  CHECK(again.vtilde(2, 1) == 6.0);

  CHECK(kind_of([] { io::cost_matrix_from_json(io::Json::parse(R"({"vtilde": [[0, 1], [2]]})")); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { io::cost_matrix_from_json(io::Json::parse(R"({"vtilde": {"1->3": 1}, "size": 2})")); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { io::cost_matrix_from_json(io::Json::parse(R"({"vtilde": [[0, -1], [1, 0]]})")); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("points and files") {
  const auto p = io::parse_point("0.25, 0.75", 2);
  CHECK(p[1] == 0.75);
  CHECK(kind_of([] { io::parse_point("0.5", 2); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { io::parse_point("0.5,x", 2); }) == ErrorKind::InvalidArgument);

  const auto dir = std::filesystem::temp_directory_path() / "mfjp_io_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "out.json";
  io::write_atomic(file, "first");
  io::write_atomic(file, "second");
  CHECK(io::read_file(file) == "second");
  CHECK(!std::filesystem::exists(dir / "out.json.tmp"));
  CHECK(kind_of([&] { io::read_file(dir / "missing.json"); }) == ErrorKind::Io);
  std::filesystem::remove_all(dir);
}
