// Copyright (C) 2026 placekit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "placekit/common.hpp"

namespace placekit {

using json = nlohmann::ordered_json;

/// Rejects unknown keys and missing required keys. Every on-disk document is
/// parsed through this so schema drift fails loudly.
inline void check_keys(const json& j, std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional, const std::string& context) {
  if (!j.is_object()) fail("schema_error", context + ": expected a JSON object");
  for (const char* key : required)
    if (!j.contains(key)) fail("schema_error", context + ": missing required key '" + key + "'");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const char* k : required)
      if (key == k) known = true;
    for (const char* k : optional)
      if (key == k) known = true;
    if (!known) fail("schema_error", context + ": unknown key '" + key + "'");
  }
}

inline void check_schema_version(const json& j, int expected, const std::string& context) {
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != expected)
    fail("schema_error", context + ": schema_version must be " + std::to_string(expected));
}

inline Vec3 vec3_from(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) fail("schema_error", context + ": expected a 3-vector");
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json load_json_file(const std::string& path, const std::string& context) {
  std::ifstream in(path);
  if (!in) fail("io_error", context + ": cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("schema_error", context + ": malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const json& j, const std::string& path, const std::string& context) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io_error", context + ": cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) fail("io_error", context + ": write failed for " + path);
}

}  // namespace placekit
