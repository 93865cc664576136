#include "hgd/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "hgd/error.hpp"

namespace hgd {
namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment, ignoring '#' inside strings.
std::string_view strip_comment(std::string_view s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

class ValueParser {
 public:
  ValueParser(std::string_view s, int line) : s_(s), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail(line_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  ConfigValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    ConfigValue v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.kind = ConfigValue::Kind::String;
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\') fail(line_, "escape sequences are not supported");
        v.str.push_back(s_[pos_++]);
      }
      if (pos_ >= s_.size()) fail(line_, "unterminated string");
      ++pos_;
      return v;
    }
    if (c == '[') {
      v.kind = ConfigValue::Kind::Array;
      ++pos_;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(parse_value());
        skip_ws();
        if (pos_ >= s_.size()) fail(line_, "unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          skip_ws();
          if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return v;
          }
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          return v;
        }
        fail(line_, "expected ',' or ']' in array");
      }
    }
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[end])))
      ++end;
    const std::string_view tok = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (tok == "true" || tok == "false") {
      v.kind = ConfigValue::Kind::Bool;
      v.boolean = tok == "true";
      return v;
    }
    const bool looks_real = tok.find_first_of(".eE") != std::string_view::npos ||
                            tok == "inf" || tok == "nan";
    if (!looks_real) {
      std::int64_t i = 0;
      const char* first = tok.data();
      if (!tok.empty() && tok.front() == '+') ++first;
      auto [p, ec] = std::from_chars(first, tok.data() + tok.size(), i);
      if (ec == std::errc() && p == tok.data() + tok.size()) {
        v.kind = ConfigValue::Kind::Integer;
        v.integer = i;
        return v;
      }
      fail(line_, "malformed value '" + std::string(tok) + "'");
    }
    double d = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(d)) {
      fail(line_, "malformed number '" + std::string(tok) + "'");
    }
    v.kind = ConfigValue::Kind::Real;
    v.real = d;
    return v;
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

}  // namespace

double ConfigValue::as_real() const {
  if (kind == Kind::Real) return real;
  if (kind == Kind::Integer) return static_cast<double>(integer);
  fail(line, "expected a number");
}

std::int64_t ConfigValue::as_integer() const {
  if (kind != Kind::Integer) fail(line, "expected an integer");
  return integer;
}

std::uint64_t ConfigValue::as_count() const {
  const std::int64_t i = as_integer();
  if (i < 0) fail(line, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(i);
}

const std::string& ConfigValue::as_string() const {
  if (kind != Kind::String) fail(line, "expected a string");
  return str;
}

bool ConfigValue::as_bool() const {
  if (kind != Kind::Bool) fail(line, "expected true or false");
  return boolean;
}

const std::vector<ConfigValue>& ConfigValue::as_array() const {
  if (kind != Kind::Array) fail(line, "expected an array");
  return items;
}

ConfigDocument parse_config_document(std::string_view text) {
  ConfigDocument doc;
  ConfigSection* current = nullptr;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    const std::string_view line = trim(strip_comment(text.substr(start, nl - start)));
    start = nl + 1;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(name)) fail(line_no, "invalid section name '" + name + "'");
      if (doc.sections.count(name)) fail(line_no, "duplicate section [" + name + "]");
      current = &doc.sections[name];
      current->line = line_no;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_key(key)) fail(line_no, "invalid key '" + key + "'");
    if (current == nullptr) fail(line_no, "key '" + key + "' outside any section");
    if (current->entries.count(key)) fail(line_no, "duplicate key '" + key + "'");
    current->entries[key] = ValueParser(line.substr(eq + 1), line_no).parse_all();
  }
  return doc;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace hgd
