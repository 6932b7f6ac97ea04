#include "mfjp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfjp/error.hpp"

namespace mfjp::io {

namespace {

void check_schema(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Syntax, "expected a JSON object");
  if (doc.contains("schema") && doc.at("schema") != kSchema)
    throw Error(ErrorKind::InvalidArgument,
                "unsupported schema " + doc.at("schema").dump() + ", expected mfjp/1");
}

int state_of(const Json& ref, const std::vector<std::string>& labels) {
  if (!ref.is_string()) throw Error(ErrorKind::Syntax, "edge endpoints must be state labels");
  const auto label = ref.get<std::string>();
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  throw Error(ErrorKind::UnknownLabel, "unknown state '" + label + "'");
}

double entry(const Json& value) {
  if (value.is_null()) return std::numeric_limits<double>::infinity();
  if (!value.is_number()) throw Error(ErrorKind::Syntax, "cost entries must be numbers or null");
  return value.get<double>();
}

Matrix read_costs(const Json& node, int l) {
  Matrix m = Matrix::Constant(l, l, std::numeric_limits<double>::infinity());
  m.diagonal().setZero();
  if (node.is_array()) {
    if (static_cast<int>(node.size()) != l) throw Error(ErrorKind::InvalidArgument, "cost matrix must be square");
    for (int i = 0; i < l; ++i) {
      const auto& row = node.at(static_cast<std::size_t>(i));
      if (!row.is_array() || static_cast<int>(row.size()) != l)
        throw Error(ErrorKind::InvalidArgument, "cost matrix must be square");
      for (int j = 0; j < l; ++j)
        if (i != j) m(i, j) = entry(row.at(static_cast<std::size_t>(j)));
    }
    return m;
  }
  if (!node.is_object()) throw Error(ErrorKind::Syntax, "cost matrix must be an array or an object");
  for (const auto& [key, value] : node.items()) {
    int i = 0;
    int j = 0;
    char tail = 0;
    if (std::sscanf(key.c_str(), "%d->%d%c", &i, &j, &tail) != 2 || i < 1 || j < 1 || i > l || j > l || i == j)
      throw Error(ErrorKind::InvalidArgument, "bad cost key '" + key + "', expected i->j with 1 <= i != j <= " +
                                                  std::to_string(l));
    m(i - 1, j - 1) = entry(value);
  }
  return m;
}

int infer_size(const Json& node) {
  if (node.is_array()) return static_cast<int>(node.size());
  int l = 0;
  for (const auto& [key, value] : node.items()) {
    int i = 0;
    int j = 0;
    if (std::sscanf(key.c_str(), "%d->%d", &i, &j) == 2) l = std::max({l, i, j});
  }
  return l;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json numbers(const Vector& x) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(number(x[i]));
  return out;
}

Json numbers(const std::vector<double>& x) {
  Json out = Json::array();
  for (double v : x) out.push_back(number(v));
  return out;
}

Model model_from_json(const Json& doc) {
  check_schema(doc);
  try {
    const auto labels = doc.at("states").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw Error(ErrorKind::Syntax, "edges are [from, to] pairs");
      edges.push_back({state_of(e[0], labels), state_of(e[1], labels)});
    }
    const auto& rates = doc.at("rates");
    std::vector<std::string> sources;
    for (const auto& e : edges) {
      const std::string key = labels[static_cast<std::size_t>(e.from)] + "->" + labels[static_cast<std::size_t>(e.to)];
      if (!rates.contains(key)) throw Error(ErrorKind::InvalidArgument, "no rate for edge " + key);
      sources.push_back(rates.at(key).get<std::string>());
    }
    if (rates.size() != edges.size())
      throw Error(ErrorKind::InvalidArgument, "rates name transitions that are not edges");
    std::map<std::string, double> params;
    if (doc.contains("params")) params = doc.at("params").get<std::map<std::string, double>>();
    return Model(doc.value("name", std::string("model")), labels, std::move(edges), std::move(sources),
                 std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("model document: ") + e.what());
  }
}

Json to_json(const Model& model) {
  Json doc;
  doc["schema"] = kSchema;
  doc["name"] = model.name();
  doc["states"] = model.labels();
  Json edges = Json::array();
  Json rates = Json::object();
  const auto& labels = model.labels();
  for (int e = 0; e < model.edge_count(); ++e) {
    const auto& edge = model.edges()[static_cast<std::size_t>(e)];
    const auto& from = labels[static_cast<std::size_t>(edge.from)];
    const auto& to = labels[static_cast<std::size_t>(edge.to)];
    edges.push_back({from, to});
    rates[from + "->" + to] = model.rate_sources()[static_cast<std::size_t>(e)];
  }
  doc["edges"] = edges;
  doc["rates"] = rates;
  Json params = Json::object();
  for (const auto& [name, value] : model.params()) params[name] = value;
  doc["params"] = params;
  return doc;
}

Model load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Syntax, path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

CostMatrix cost_matrix_from_json(const Json& doc) {
  check_schema(doc);
  if (!doc.contains("vtilde")) throw Error(ErrorKind::InvalidArgument, "cost matrix needs a vtilde field");
  const auto& vt = doc.at("vtilde");
  const int l = doc.contains("size") ? doc.at("size").get<int>() : infer_size(vt);
  if (l < 1) throw Error(ErrorKind::InvalidArgument, "empty cost matrix");
  CostMatrix cost;
  cost.vtilde = read_costs(vt, l);
  cost.v = doc.contains("v") ? read_costs(doc.at("v"), l) : cost.vtilde;
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j)
      if (i != j && (std::isnan(cost.vtilde(i, j)) || cost.vtilde(i, j) < 0.0))
        throw Error(ErrorKind::InvalidArgument, "costs must be nonnegative");
  return cost;
}

Json to_json(const CostMatrix& cost) {
  auto rows = [](const Matrix& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(i == j ? Json(0.0) : number(m(i, j)));
      out.push_back(row);
    }
    return out;
  };
  Json doc;
  doc["schema"] = kSchema;
  doc["size"] = cost.size();
  doc["vtilde"] = rows(cost.vtilde);
  doc["v"] = rows(cost.v);
  return doc;
}

CostMatrix load_cost_matrix(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return cost_matrix_from_json(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Syntax, path.string() + ": " + e.what());
  }
}

SimplexPoint parse_point(std::string_view text, int states) {
  std::string s(text);
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream in(s);
  std::vector<double> values;
  double x = 0.0;
  while (in >> x) values.push_back(x);
  if (!in.eof() || static_cast<int>(values.size()) != states)
    throw Error(ErrorKind::InvalidArgument,
                "expected " + std::to_string(states) + " weights, got '" + std::string(text) + "'");
  return SimplexPoint(Eigen::Map<const Vector>(values.data(), states));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.flush()) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

}  // namespace mfjp::io
