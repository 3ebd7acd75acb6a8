#pragma once

// Small helpers for reading a strict JSON configuration tree. Every failure is
// a ConfigError carrying the dotted path of the offending key.

#include "rsjd/types.hpp"

#include <json.hpp>

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rsjd::schema {

using json = nlohmann::json;

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline void expect_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object");
}

/// Rejects keys outside `allowed`.
inline void allow_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
  expect_object(obj, path);
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(join(path, key), "unknown key");
  }
}

inline const json& require(const json& obj, std::string_view key, const std::string& path) {
  expect_object(obj, path);
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw ConfigError(join(path, key), "required");
  return *it;
}

inline const json* find(const json& obj, std::string_view key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

inline double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0)) throw ConfigError(path, "must be positive");
  return x;
}

inline double nonnegative(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (x < 0.0) throw ConfigError(path, "must be nonnegative");
  return x;
}

inline long long integer(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::floor(x) == x && std::abs(x) < 9e15) return static_cast<long long>(x);
  }
  throw ConfigError(path, "expected an integer");
}

inline long long integer_at_least(const json& v, long long lo, const std::string& path) {
  const long long x = integer(v, path);
  if (x < lo) throw ConfigError(path, "must be >= " + std::to_string(lo));
  return x;
}

inline std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline bool boolean(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], index(path, i)));
  return out;
}

inline Point point(const json& v, const std::string& path) {
  const auto xs = numbers(v, path);
  if (xs.empty() || xs.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError(path, "expected 1 to " + std::to_string(kMaxDim) + " coordinates");
  Point p(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) p(static_cast<Eigen::Index>(i)) = xs[i];
  return p;
}

/// Square matrix of the given size; a number means that multiple of the identity.
inline Matrix matrix(const json& v, int dim, const std::string& path) {
  if (v.is_number()) return Matrix::Identity(dim, dim) * number(v, path);
  if (!v.is_array() || v.size() != static_cast<std::size_t>(dim))
    throw ConfigError(path, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const auto row = numbers(v[static_cast<std::size_t>(i)], index(path, static_cast<std::size_t>(i)));
    if (row.size() != static_cast<std::size_t>(dim)) throw ConfigError(index(path, static_cast<std::size_t>(i)), "wrong row length");
    for (int j = 0; j < dim; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace rsjd::schema
