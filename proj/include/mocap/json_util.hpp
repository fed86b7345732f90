#pragma once

#include <json.hpp>

#include <string>

#include "mocap/error.hpp"
#include "mocap/types.hpp"

namespace mocap {

using Json = nlohmann::json;

Json load_json_file(const std::string& path);

// Writes via a temp file then renames, so partially written artifacts never
// shadow complete ones (matters for the stage cache).
void save_json_file(const std::string& path, const Json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

inline Json to_json(const VecX& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const MatX& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

VecX vecx_from_json(const Json& a, Index expected_size = -1);
MatX matx_from_json(const Json& a, Index expected_cols = -1);

// Field access that raises SchemaInvalid instead of nlohmann's exceptions.
const Json& require_field(const Json& j, const std::string& key,
                          const std::string& context);

void require_schema(const Json& j, const std::string& schema,
                    const std::string& context);

}  // namespace mocap
