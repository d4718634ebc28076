#include "icra/config.hpp"

#include <sstream>

#include "icra/format.hpp"

namespace icra {

namespace {

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  char prev = 0;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok || (c == '.' && prev == '.')) return false;
    prev = c;
  }
  return true;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!valid_key(key)) {
      throw ConfigError(where + "invalid key '" + key + "' (lowercase letters, digits, '_' and single dots)");
    }
    if (cfg.entries_.count(key)) {
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " +
                        std::to_string(cfg.entries_[key].line) + ")");
    }
    cfg.entries_[key] = Entry{value, line_no, false};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
  auto& e = entries_[key];
  e.value = value;
}

const KeyValueConfig::Entry* KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void KeyValueConfig::fail(const std::string& key, const std::string& message) const {
  const auto it = entries_.find(key);
  const std::string where =
      it != entries_.end() && it->second.line > 0 ? source_ + ":" + std::to_string(it->second.line) + ": " : source_ + ": ";
  throw ConfigError(where + "key '" + key + "': " + message);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError(source_ + ": missing required key '" + key + "'");
  return e->value;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    return parse_double(e->value);
  } catch (const DataError&) {
    fail(key, "expected a number, got '" + e->value + "'");
  }
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    return parse_int(e->value);
  } catch (const DataError&) {
    fail(key, "expected an integer, got '" + e->value + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  fail(key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& part : split(e->value, ',')) {
    try {
      out.push_back(parse_double(part));
    } catch (const DataError&) {
      fail(key, "expected a comma-separated list of numbers, got '" + e->value + "'");
    }
  }
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<int> out;
  for (const auto& part : split(e->value, ',')) {
    try {
      out.push_back(static_cast<int>(parse_int(part)));
    } catch (const DataError&) {
      fail(key, "expected a comma-separated list of integers, got '" + e->value + "'");
    }
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<std::string> out;
  for (const auto& part : split(e->value, ',')) {
    const std::string s = trim(part);
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

std::vector<Vec> KeyValueConfig::get_vectors(const std::string& key, const std::vector<Vec>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::vector<Vec> out;
  for (const auto& group : split(e->value, ';')) {
    std::vector<double> xs;
    for (const auto& part : split(group, ',')) {
      try {
        xs.push_back(parse_double(part));
      } catch (const DataError&) {
        fail(key, "expected ';'-separated vectors of comma-separated numbers, got '" + e->value + "'");
      }
    }
    out.push_back(Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())));
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, entry] : entries_) {
    if (!entry.used && entry.line > 0) out.push_back(key);
  }
  return out;
}

}  // namespace icra
