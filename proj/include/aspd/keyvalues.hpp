#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace aspd {

// Ordered key=value metadata (checkpoint config blocks). Keys keep their
// first insertion position; setting an existing key replaces its value.
class KeyValues {
 public:
  using Entry = std::pair<std::string, std::string>;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "1" : "0")); }
  void set(const std::string& key, double value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set_sizes(const std::string& key, const std::vector<std::size_t>& values);

  bool has(const std::string& key) const;
  // Throws FormatError when the key is missing or malformed.
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  const std::vector<Entry>& entries() const { return entries_; }
  bool operator==(const KeyValues&) const = default;

 private:
  std::vector<Entry> entries_;
};

// "64,64,128" -> {64, 64, 128}; ConfigError on malformed input.
std::vector<std::size_t> parse_size_list(const std::string& text);
std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace aspd
