#include "mnar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mnar/errors.hpp"

namespace mnar {

namespace fs = std::filesystem;

namespace {

Json endpoint_to_json(double x) {
  if (x == kInf) return "inf";
  if (x == -kInf) return "-inf";
  return x;
}

double endpoint_from_json(const Json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw SchemaError(where + ": expected a number, \"inf\" or \"-inf\", got \"" + s + "\"");
  }
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

double finite_from_json(const Json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw SchemaError(where + ": must be finite");
  return x;
}

std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json model_to_json(const MissingnessModel& model) {
  Json out;
  if (const auto* sc = std::get_if<SelfCensoringModel>(&model)) {
    out["kind"] = "self_censoring";
    Json sets = Json::array();
    for (const IntervalUnion& u : sc->sets) {
      Json parts = Json::array();
      for (const Interval& iv : u.parts()) parts.push_back({endpoint_to_json(iv.lo), endpoint_to_json(iv.hi)});
      sets.push_back(parts);
    }
    out["sets"] = sets;
  } else {
    const auto& lt = std::get<LinearThresholdModel>(model);
    out["kind"] = "linear_threshold";
    out["v"] = matrix_to_json(lt.v());
    out["b"] = vector_to_json(lt.b());
  }
  return out;
}

MissingnessModel model_from_json(const Json& doc, const std::string& where) {
  if (!doc.is_object()) throw SchemaError(where + ": expected an object");
  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    throw SchemaError(where + ".kind: expected \"self_censoring\" or \"linear_threshold\"");
  }
  const auto kind = doc["kind"].get<std::string>();
  if (kind == "self_censoring") {
    if (!doc.contains("sets") || !doc["sets"].is_array() || doc["sets"].empty()) {
      throw SchemaError(where + ".sets: expected a non-empty array of interval lists");
    }
    SelfCensoringModel model;
    const Json& sets = doc["sets"];
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const std::string wi = at(where + ".sets", i);
      if (!sets[i].is_array()) throw SchemaError(wi + ": expected an array of [lo, hi] pairs");
      std::vector<Interval> parts;
      for (std::size_t k = 0; k < sets[i].size(); ++k) {
        const Json& p = sets[i][k];
        const std::string wk = at(wi, k);
        if (!p.is_array() || p.size() != 2) throw SchemaError(wk + ": expected [lo, hi]");
        parts.push_back({endpoint_from_json(p[0], wk + "[0]"), endpoint_from_json(p[1], wk + "[1]")});
      }
      try {
        model.sets.emplace_back(std::move(parts));
      } catch (const InvalidArgument& e) {
        throw SchemaError(wi + ": " + e.what());
      }
    }
    return model;
  }
  if (kind == "linear_threshold") {
    if (!doc.contains("b")) throw SchemaError(where + ".b: missing");
    if (!doc.contains("v")) throw SchemaError(where + ".v: missing");
    Vector b = vector_from_json(doc["b"], where + ".b");
    Matrix v = matrix_from_json(doc["v"], where + ".v", b.size(), b.size());
    try {
      return LinearThresholdModel(std::move(v), std::move(b));
    } catch (const InvalidArgument& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  throw SchemaError(where + ".kind: unknown kind \"" + kind + "\"");
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& where, long size) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of numbers");
  if (size >= 0 && static_cast<long>(j.size()) != size) {
    throw SchemaError(where + ": expected length " + std::to_string(size) + ", got " + std::to_string(j.size()));
  }
  Vector out(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Eigen::Index>(i)) = finite_from_json(j[i], at(where, i));
  return out;
}

Matrix matrix_from_json(const Json& j, const std::string& where, long rows, long cols) {
  if (!j.is_array() || j.empty()) throw SchemaError(where + ": expected a non-empty array of rows");
  if (rows >= 0 && static_cast<long>(j.size()) != rows) {
    throw SchemaError(where + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  }
  const long c = cols >= 0 ? cols : (j[0].is_array() ? static_cast<long>(j[0].size()) : 0);
  Matrix out(static_cast<Eigen::Index>(j.size()), c);
  for (std::size_t r = 0; r < j.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], at(where, r), c).transpose();
  }
  return out;
}

std::string observation_to_line(const Observation& obs) {
  std::string line = "{\"seen\":[";
  for (std::size_t k = 0; k < obs.seen.size(); ++k) {
    if (k) line += ',';
    line += std::to_string(obs.seen[k]);
  }
  line += "],\"values\":[";
  for (Eigen::Index k = 0; k < obs.values.size(); ++k) {
    if (k) line += ',';
    line += format_double(obs.values(k));
  }
  line += "]}";
  return line;
}

Observation observation_from_line(const std::string& line, int d, const std::string& where) {
  const Json j = parse_json(line, where);
  if (!j.is_object() || !j.contains("seen") || !j.contains("values")) {
    throw SchemaError(where + ": expected {\"seen\":[...],\"values\":[...]}");
  }
  if (!j["seen"].is_array()) throw SchemaError(where + ".seen: expected an array of integers");
  Observation obs;
  for (std::size_t k = 0; k < j["seen"].size(); ++k) {
    const Json& c = j["seen"][k];
    if (!c.is_number_integer()) throw SchemaError(at(where + ".seen", k) + ": expected an integer");
    obs.seen.push_back(c.get<int>());
  }
  obs.values = vector_from_json(j["values"], where + ".values", static_cast<long>(obs.seen.size()));
  try {
    validate_observation(obs, d);
  } catch (const InvalidArgument& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return obs;
}

void write_observations(const fs::path& path, const std::vector<Observation>& obs) {
  std::string text;
  for (const Observation& o : obs) {
    text += observation_to_line(o);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<Observation> read_observations(const fs::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Observation> out;
  std::string line;
  for (long no = 1; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    out.push_back(observation_from_line(line, d, path.filename().string() + ":" + std::to_string(no)));
  }
  return out;
}

void write_rows(const fs::path& path, const Matrix& rows) {
  std::string text;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    text += '[';
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (c) text += ',';
      text += format_double(rows(r, c));
    }
    text += "]\n";
  }
  write_text(path, text);
}

Matrix read_rows(const fs::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Vector> rows;
  std::string line;
  for (long no = 1; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(no);
    rows.push_back(vector_from_json(parse_json(line, where), where, d));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    long line = 1;
    long column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SchemaError(where + ": invalid JSON at line " + std::to_string(line) + ", column " +
                      std::to_string(column) + ": " + e.what());
  }
}

}  // namespace mnar
