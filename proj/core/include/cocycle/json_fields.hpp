#pragma once

// Typed field access for config documents. Errors name the full field path
// ("ensemble.params.a: expected a number").

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/errors.hpp"

namespace cocycle::fields {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
  throw DomainError(path + ": " + message);
}

inline const json& object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

inline const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
  const json* v = find(obj, key);
  if (v == nullptr) fail(join(path, key), "missing required field");
  return *v;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

inline double number(const json& obj, const std::string& key, const std::string& path,
                     std::optional<double> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    fail(join(path, key), "missing required field");
  }
  return as_number(*v, join(path, key));
}

inline std::uint64_t unsigned_integer(const json& obj, const std::string& key,
                                      const std::string& path,
                                      std::optional<std::uint64_t> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    fail(join(path, key), "missing required field");
  }
  if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
    fail(join(path, key), "expected a non-negative integer");
  }
  return v->get<std::uint64_t>();
}

inline bool boolean(const json& obj, const std::string& key, const std::string& path,
                    bool fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) fail(join(path, key), "expected true or false");
  return v->get<bool>();
}

inline std::string string(const json& obj, const std::string& key, const std::string& path,
                          std::optional<std::string> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    fail(join(path, key), "missing required field");
  }
  if (!v->is_string()) fail(join(path, key), "expected a string");
  return v->get<std::string>();
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path,
                                   std::optional<std::vector<double>> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    fail(join(path, key), "missing required field");
  }
  return numbers(*v, join(path, key));
}

}  // namespace cocycle::fields
