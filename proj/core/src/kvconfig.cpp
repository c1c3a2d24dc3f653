#include "mmt/kvconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot read config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail("config", "config line " + std::to_string(lineno) + " is not key=value: " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    if (key.empty()) fail("config", "config line " + std::to_string(lineno) + " has an empty key");
    cfg.entries_[key] = trim(stripped.substr(eq + 1));
  }
  return cfg;
}

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail("config", "config key '" + key + "': '" + it->second + "' is not a number");
  }
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail("config", "config key '" + key + "': '" + it->second + "' is not a non-negative integer");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail("config", "config key '" + key + "': '" + v + "' is not a boolean");
}

void KvConfig::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  entries_[key] = buf;
}

std::string KvConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << "=" << v << "\n";
  return os.str();
}

void KvConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write config file " + path);
  out << to_string();
  if (!out) fail("io", "failed while writing " + path);
}

}  // namespace mmt
