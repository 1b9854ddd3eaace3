#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rafiq/common.hpp"

namespace rafiq::detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where, ErrorCode code = ErrorCode::SchemaError) {
  if (!j.is_object()) throw Error(code, where + ": expected an object");
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where,
                           ErrorCode code = ErrorCode::SchemaError) {
  require_object(j, where, code);
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(code, where + ": unknown field '" + key + "'");
    }
  }
}

inline std::string string_field(const json& j, const char* key, const std::string& where, bool required,
                                ErrorCode code = ErrorCode::SchemaError) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw Error(code, where + ": missing field '" + key + "'");
    return {};
  }
  if (!it->is_string()) throw Error(code, where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

inline std::vector<std::string> string_list(const json& j, const std::string& where,
                                            ErrorCode code = ErrorCode::SchemaError) {
  if (!j.is_array()) throw Error(code, where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw Error(code, where + ": expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(std::string_view text, const std::string& where, ErrorCode code = ErrorCode::SyntaxError) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(code, where + ": " + e.what());
  }
}

}  // namespace rafiq::detail
