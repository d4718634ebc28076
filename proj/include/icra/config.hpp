#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icra/core.hpp"

namespace icra {

/// Flat key = value configuration with dotted keys and '#' comments (the
/// grammar is documented in docs/config.md). Every accessor marks its key as
/// used so callers can reject misspelt keys via unused_keys().
class KeyValueConfig {
 public:
  /// Throws ConfigError (with the line number) on syntax errors and
  /// duplicate keys.
  static KeyValueConfig parse(const std::string& text, const std::string& source = "<config>");
  /// Throws IoError when the file cannot be read.
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
  /// Semicolon-separated vectors, each comma-separated.
  std::vector<Vec> get_vectors(const std::string& key, const std::vector<Vec>& fallback) const;

  /// Keys present in the text that no accessor has asked for.
  std::vector<std::string> unused_keys() const;
  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::map<std::string, Entry> entries_;
  std::string source_;
};

}  // namespace icra
