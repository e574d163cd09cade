#pragma once

// Private helpers shared by the TOML readers. Every error names the field it
// is about so the CLI can report it verbatim.

#define TOML_HEADER_ONLY 0
#include <toml.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aispo/errors.hpp"
#include "aispo/format.hpp"

namespace aispo::tomlio {

inline toml::table parse_document(const std::string& text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": invalid TOML at line " << e.source().begin.line << ": " << e.description();
    throw ValidationError(msg.str());
  }
}

inline std::string qualified(std::string_view context, std::string_view key) {
  if (context.empty()) return std::string(key);
  return std::string(context) + "." + std::string(key);
}

/// Rejects keys outside `allowed`.
inline void check_keys(const toml::table& table, std::initializer_list<std::string_view> allowed,
                       std::string_view context) {
  for (const auto& [key, node] : table) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key.str() == a;
    if (!known) throw ValidationError("unknown field '" + qualified(context, key.str()) + "'");
  }
}

inline std::optional<double> as_real(const toml::node& node) {
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<std::int64_t>()) return static_cast<double>(*v);
  return std::nullopt;
}

inline std::optional<double> get_real(const toml::table& t, std::string_view key,
                                      std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  auto v = as_real(*node);
  if (!v) throw ValidationError("field '" + qualified(context, key) + "' must be a number");
  return v;
}

inline std::optional<std::int64_t> get_integer(const toml::table& t, std::string_view key,
                                               std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  auto v = node->value_exact<std::int64_t>();
  if (!v) throw ValidationError("field '" + qualified(context, key) + "' must be an integer");
  return *v;
}

inline std::optional<bool> get_bool(const toml::table& t, std::string_view key,
                                    std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  auto v = node->value_exact<bool>();
  if (!v) throw ValidationError("field '" + qualified(context, key) + "' must be a boolean");
  return *v;
}

inline std::optional<std::string> get_string(const toml::table& t, std::string_view key,
                                             std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  auto v = node->value_exact<std::string>();
  if (!v) throw ValidationError("field '" + qualified(context, key) + "' must be a string");
  return *v;
}

inline std::optional<std::vector<double>> get_real_array(const toml::table& t, std::string_view key,
                                                         std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  const toml::array* arr = node->as_array();
  if (!arr) throw ValidationError("field '" + qualified(context, key) + "' must be an array");
  std::vector<double> out;
  out.reserve(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i) {
    auto v = as_real((*arr)[i]);
    if (!v) {
      throw ValidationError("field '" + qualified(context, key) + "[" + std::to_string(i) +
                            "]' must be a number");
    }
    out.push_back(*v);
  }
  return out;
}

inline std::optional<std::vector<std::vector<double>>> get_real_matrix(const toml::table& t,
                                                                       std::string_view key,
                                                                       std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return std::nullopt;
  const toml::array* arr = node->as_array();
  if (!arr) throw ValidationError("field '" + qualified(context, key) + "' must be an array of arrays");
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < arr->size(); ++r) {
    const toml::array* row = (*arr)[r].as_array();
    const std::string where = qualified(context, key) + "[" + std::to_string(r) + "]";
    if (!row) throw ValidationError("field '" + where + "' must be an array");
    std::vector<double> values;
    for (std::size_t i = 0; i < row->size(); ++i) {
      auto v = as_real((*row)[i]);
      if (!v) throw ValidationError("field '" + where + "[" + std::to_string(i) + "]' must be a number");
      values.push_back(*v);
    }
    out.push_back(std::move(values));
  }
  return out;
}

inline const toml::table* get_table(const toml::table& t, std::string_view key,
                                    std::string_view context) {
  const toml::node* node = t.get(key);
  if (!node) return nullptr;
  const toml::table* sub = node->as_table();
  if (!sub) throw ValidationError("field '" + qualified(context, key) + "' must be a table");
  return sub;
}

template <class T>
T require(std::optional<T> v, std::string_view context, std::string_view key) {
  if (!v) throw ValidationError("missing field '" + qualified(context, key) + "'");
  return std::move(*v);
}

inline int to_int(std::int64_t v, std::string_view context, std::string_view key) {
  if (v < -2147483647LL || v > 2147483647LL) {
    throw ValidationError("field '" + qualified(context, key) + "' is out of range");
  }
  return static_cast<int>(v);
}

/// Shortest round-trip form; infinities are spelled as TOML spells them.
inline std::string real(double x) {
  std::string s = format_real(x);
  // TOML floats need a fraction or exponent; integers stay integers otherwise.
  if (std::isfinite(x) && s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string real_array(const double* data, std::size_t n) {
  std::string out = "[";
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ", ";
    out += real(data[i]);
  }
  return out + "]";
}

}  // namespace aispo::tomlio
