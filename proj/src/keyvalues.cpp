#include "aspd/keyvalues.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "aspd/error.hpp"

namespace aspd {

void KeyValues::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos) {
    throw ConfigError("invalid config key '" + key + "'");
  }
  if (value.find('\n') != std::string::npos) throw ConfigError("config value for '" + key + "' has a newline");
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValues::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  set(key, std::string(buf));
}

void KeyValues::set_sizes(const std::string& key, const std::vector<std::size_t>& values) {
  set(key, join_sizes(values));
}

bool KeyValues::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == key; });
}

const std::string& KeyValues::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw FormatError("missing config key '" + key + "'");
}

std::size_t KeyValues::get_size(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw FormatError("config key '" + key + "' is not an unsigned integer: " + v);
  }
  return out;
}

double KeyValues::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw FormatError("config key '" + key + "' is not a number: " + v);
  return out;
}

bool KeyValues::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1") return true;
  if (v == "0") return false;
  throw FormatError("config key '" + key + "' is not 0/1: " + v);
}

std::vector<std::size_t> KeyValues::get_sizes(const std::string& key) const {
  try {
    return parse_size_list(get(key));
  } catch (const ConfigError& e) {
    throw FormatError("config key '" + key + "': " + e.what());
  }
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const char* first = text.data() + pos;
    const char* last = text.data() + comma;
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (first == last || ec != std::errc() || ptr != last) {
      throw ConfigError("malformed integer list '" + text + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace aspd
