#include "mocap/json_util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mocap {

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::InputNotFound, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::SchemaInvalid, path + ": " + e.what());
  }
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::InputNotFound, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::InputNotFound, "cannot write " + tmp);
    out << text;
  }
  fs::rename(tmp, target);
}

void save_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

VecX vecx_from_json(const Json& a, Index expected_size) {
  if (!a.is_array()) raise(ErrorCode::SchemaInvalid, "expected array");
  VecX v(static_cast<Index>(a.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const auto& e = a[static_cast<std::size_t>(i)];
    if (!e.is_number()) raise(ErrorCode::SchemaInvalid, "expected numeric array");
    v[i] = e.get<double>();
  }
  if (expected_size >= 0 && v.size() != expected_size)
    raise(ErrorCode::SchemaInvalid, "array size mismatch");
  return v;
}

MatX matx_from_json(const Json& a, Index expected_cols) {
  if (!a.is_array()) raise(ErrorCode::SchemaInvalid, "expected array of rows");
  const Index rows = static_cast<Index>(a.size());
  Index cols = expected_cols;
  if (rows > 0 && cols < 0) cols = static_cast<Index>(a[0].size());
  if (cols < 0) cols = 0;
  MatX m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = a[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      raise(ErrorCode::SchemaInvalid, "ragged or mis-sized row in matrix");
    for (Index j = 0; j < cols; ++j) {
      const auto& e = row[static_cast<std::size_t>(j)];
      if (!e.is_number()) raise(ErrorCode::SchemaInvalid, "expected numeric matrix");
      m(i, j) = e.get<double>();
    }
  }
  return m;
}

const Json& require_field(const Json& j, const std::string& key,
                          const std::string& context) {
  const auto it = j.find(key);
  if (it == j.end())
    raise(ErrorCode::SchemaInvalid, context + ": missing field '" + key + "'");
  return *it;
}

void require_schema(const Json& j, const std::string& schema,
                    const std::string& context) {
  const auto it = j.find("schema");
  if (it == j.end() || !it->is_string() || it->get<std::string>() != schema)
    raise(ErrorCode::SchemaInvalid,
          context + ": expected schema '" + schema + "'");
}

}  // namespace mocap
