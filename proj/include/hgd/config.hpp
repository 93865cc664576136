#pragma once

// A small TOML subset: [section] headers, `key = value` lines and # comments.
// Values are numbers, "strings", true/false, or single-line [arrays] of them.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hgd {

struct ConfigValue {
  enum class Kind { Integer, Real, String, Bool, Array };

  Kind kind = Kind::Integer;
  std::int64_t integer = 0;
  double real = 0.0;
  std::string str;
  bool boolean = false;
  std::vector<ConfigValue> items;
  int line = 0;

  // Accessors throw ParseError naming the line on a type mismatch.
  double as_real() const;
  std::int64_t as_integer() const;
  std::uint64_t as_count() const;
  const std::string& as_string() const;
  bool as_bool() const;
  const std::vector<ConfigValue>& as_array() const;
};

struct ConfigSection {
  int line = 0;
  std::map<std::string, ConfigValue> entries;
};

struct ConfigDocument {
  std::map<std::string, ConfigSection> sections;
};

ConfigDocument parse_config_document(std::string_view text);

// "%.17g", with a trailing ".0" when the result would read back as an integer.
std::string format_real(double v);

}  // namespace hgd
