#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnar/gaussian.hpp"
#include "mnar/missingness.hpp"

namespace mnar {

using Json = nlohmann::json;

// Endpoints use "inf" / "-inf" strings; finite doubles print as the shortest
// round-trip decimal, so parse(dump(m)) reproduces every bit.
Json model_to_json(const MissingnessModel& model);
MissingnessModel model_from_json(const Json& doc, const std::string& where = "model");

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double x);

/// One NDJSON record: {"seen":[...],"values":[...]}, 0-based coordinates.
std::string observation_to_line(const Observation& obs);
Observation observation_from_line(const std::string& line, int d, const std::string& where);

void write_observations(const std::filesystem::path& path, const std::vector<Observation>& obs);
std::vector<Observation> read_observations(const std::filesystem::path& path, int d);

/// One JSON array per matrix row.
void write_rows(const std::filesystem::path& path, const Matrix& rows);
Matrix read_rows(const std::filesystem::path& path, int d);

Json vector_to_json(const Vector& v);
Json matrix_to_json(const Matrix& m);
/// Strict readers: SchemaError naming `where` on any shape or type mismatch.
Vector vector_from_json(const Json& j, const std::string& where, long size = -1);
Matrix matrix_from_json(const Json& j, const std::string& where, long rows = -1, long cols = -1);

/// Atomic-ish text write: writes a sibling temp file then renames it.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Parse, reporting line and column of a syntax error.
Json parse_json(const std::string& text, const std::string& where);

/// Thrown for file-system failures; mapped to exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mnar
