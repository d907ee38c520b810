#ifndef MFLD_TOML_HPP
#define MFLD_TOML_HPP

// Reader/writer for the TOML subset used by experiment configs: [table]
// headers, bare keys, strings, integers, floats, booleans and (possibly
// multi-line) arrays of scalars. Keys are stored fully dotted.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "mfld/core.hpp"

namespace mfld::toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> data;

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  bool operator==(const Value&) const = default;
};

using Table = std::map<std::string, Value>;

namespace detail {

inline Error parse_error(std::size_t line, const std::string& what) {
  return Error(ErrorKind::config, "line " + std::to_string(line) + ": " + what);
}

inline bool is_bare_key_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  Value value() {
    skip_ws();
    require_more("value");
    const char c = s_[pos_];
    if (c == '"') return {basic_string()};
    if (c == '\'') return {literal_string()};
    if (c == '[') return {array()};
    if (starts_with("true")) {
      pos_ += 4;
      return {true};
    }
    if (starts_with("false")) {
      pos_ += 5;
      return {false};
    }
    return number();
  }

  void skip_ws() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else if (c == '\n') {
        ++pos_;
        ++line_;
      } else if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t consumed() const { return pos_; }
  std::size_t line() const { return line_; }

 private:
  bool starts_with(std::string_view w) const {
    if (s_.substr(pos_, w.size()) != w) return false;
    const std::size_t e = pos_ + w.size();
    return e >= s_.size() || !is_bare_key_char(s_[e]);
  }

  void require_more(const char* what) const {
    if (pos_ >= s_.size()) throw parse_error(line_, std::string("expected ") + what);
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      require_more("closing quote");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c == '\n') throw parse_error(line_, "newline in string");
      if (c != '\\') {
        out += c;
        continue;
      }
      require_more("escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: throw parse_error(line_, std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  std::string literal_string() {
    ++pos_;
    const std::size_t end = s_.find('\'', pos_);
    if (end == std::string_view::npos) throw parse_error(line_, "unterminated literal string");
    std::string out(s_.substr(pos_, end - pos_));
    if (out.find('\n') != std::string::npos) throw parse_error(line_, "newline in string");
    pos_ = end + 1;
    return out;
  }

  Array array() {
    ++pos_;
    Array out;
    while (true) {
      skip_ws();
      require_more("']'");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      require_more("']'");
      if (s_[pos_] == ',') {
        ++pos_;
      } else if (s_[pos_] != ']') {
        throw parse_error(line_, "expected ',' or ']' in array");
      }
    }
  }

  Value number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (is_bare_key_char(c) || c == '+' || c == '.') {
        ++pos_;
      } else {
        break;
      }
    }
    std::string tok;
    for (char c : s_.substr(start, pos_ - start))
      if (c != '_') tok += c;
    if (tok.empty()) throw parse_error(line_, "expected a value");
    if (tok == "inf" || tok == "+inf") return {std::numeric_limits<double>::infinity()};
    if (tok == "-inf") return {-std::numeric_limits<double>::infinity()};
    if (tok == "nan" || tok == "+nan" || tok == "-nan") return {std::numeric_limits<double>::quiet_NaN()};
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (*b == '+') ++b;
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec == std::errc() && p == e) return {v};
    } else {
      double v = 0.0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec == std::errc() && p == e) return {v};
    }
    throw parse_error(line_, "invalid value '" + tok + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline void check_key(const std::string& key, std::size_t line) {
  if (key.empty()) throw parse_error(line, "empty key");
  std::size_t seg = 0;
  for (char c : key) {
    if (c == '.') {
      if (seg == 0) throw parse_error(line, "empty key segment in '" + key + "'");
      seg = 0;
    } else if (!is_bare_key_char(c)) {
      throw parse_error(line, "invalid key '" + key + "'");
    } else {
      ++seg;
    }
  }
  if (seg == 0) throw parse_error(line, "empty key segment in '" + key + "'");
}

}  // namespace detail

inline Table parse(std::string_view text) {
  Table table;
  std::string prefix;
  std::size_t line = 1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    const std::string stripped = detail::trim(raw);
    if (stripped.empty() || stripped[0] == '#') {
      pos = eol + 1;
      ++line;
      continue;
    }
    if (stripped[0] == '[') {
      const auto close = stripped.find(']');
      if (close == std::string::npos) throw detail::parse_error(line, "unterminated table header");
      const std::string rest = detail::trim(std::string_view(stripped).substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw detail::parse_error(line, "text after table header");
      prefix = detail::trim(std::string_view(stripped).substr(1, close - 1));
      detail::check_key(prefix, line);
      prefix += '.';
      pos = eol + 1;
      ++line;
      continue;
    }
    const auto eq = raw.find('=');
    if (eq == std::string_view::npos) throw detail::parse_error(line, "expected 'key = value'");
    std::string key = detail::trim(raw.substr(0, eq));
    detail::check_key(key, line);
    key = prefix + key;
    // arrays may span several lines, so the value is parsed from the rest of the text
    detail::Parser p(text.substr(pos + eq + 1), line);
    Value v = p.value();
    std::size_t cursor = pos + eq + 1 + p.consumed();
    while (cursor < text.size() && (text[cursor] == ' ' || text[cursor] == '\t' || text[cursor] == '\r')) ++cursor;
    if (cursor < text.size() && text[cursor] == '#')
      while (cursor < text.size() && text[cursor] != '\n') ++cursor;
    if (cursor < text.size() && text[cursor] != '\n')
      throw detail::parse_error(p.line(), "unexpected text after value of '" + key + "'");
    if (table.count(key) != 0) throw detail::parse_error(line, "duplicate key '" + key + "'");
    table.emplace(key, std::move(v));
    line = p.line() + 1;
    pos = cursor + 1;
  }
  return table;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_value(const Value& v) {
  if (v.is_bool()) return std::get<bool>(v.data) ? "true" : "false";
  if (v.is_int()) return std::to_string(std::get<std::int64_t>(v.data));
  if (v.is_float()) return format_double(std::get<double>(v.data));
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : std::get<std::string>(v.data)) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
      }
    }
    return out + "\"";
  }
  std::string out = "[";
  const auto& arr = std::get<Array>(v.data);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (i) out += ", ";
    out += format_value(arr[i]);
  }
  return out + "]";
}

/// Serializes with one [table] per leading key segment; top-level keys first.
inline std::string serialize(const Table& table) {
  std::ostringstream os;
  std::map<std::string, std::vector<std::pair<std::string, const Value*>>> groups;
  for (const auto& [key, v] : table) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) {
      os << key << " = " << format_value(v) << "\n";
    } else {
      groups[key.substr(0, dot)].emplace_back(key.substr(dot + 1), &v);
    }
  }
  for (const auto& [name, entries] : groups) {
    os << "\n[" << name << "]\n";
    for (const auto& [k, v] : entries) os << k << " = " << format_value(*v) << "\n";
  }
  return os.str();
}

}  // namespace mfld::toml

#endif  // MFLD_TOML_HPP
