#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mfjp/cost_matrix.hpp"
#include "mfjp/model.hpp"

namespace mfjp::io {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kSchema = "mfjp/1";

/// %.17g, with "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double x);
/// JSON number, or null when x is not finite.
Json number(double x);
Json numbers(const Vector& x);
Json numbers(const std::vector<double>& x);

/// Model document:
///   {"schema": "mfjp/1", "name": ..., "states": [labels], "edges": [[from, to], ...],
///    "rates": {"from->to": expression}, "params": {name: number}}
/// Edges refer to states by label. Every edge needs exactly one rate.
Model model_from_json(const Json& doc);
Json to_json(const Model& model);
Model load_model(const std::filesystem::path& path);

/// Cost-matrix document. "vtilde" is either a full l x l array (diagonal ignored, null
/// for unreachable) or an object keyed "i->j" with 1-based indices, where missing pairs
/// are unreachable. "v" is optional and defaults to vtilde.
CostMatrix cost_matrix_from_json(const Json& doc);
Json to_json(const CostMatrix& cost);
CostMatrix load_cost_matrix(const std::filesystem::path& path);

/// Parses "0.2,0.8" or "0.2 0.8" into a point of the simplex with `states` entries.
SimplexPoint parse_point(std::string_view text, int states);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);
/// Serialises with two-space indentation and a trailing newline.
std::string dump(const Json& doc);

}  // namespace mfjp::io
