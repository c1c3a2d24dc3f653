#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace mmt {

// Flat key=value text configuration: one entry per line, '#' comments, keys
// sorted on write so runs diff cleanly. Doubles as the run-manifest format.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig load(const std::string& path);
  static KvConfig parse(const std::string& text);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, const char* value) { entries_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value) { entries_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

  std::string to_string() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace mmt
