// config.hpp - flat key=value text files (run configs, checkpoint headers).
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace wrapnet {

class KeyValueMap {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    values_[key] = buf;
  }
  void set(const std::string& key, std::int64_t v) { values_[key] = std::to_string(v); }
  void set(const std::string& key, std::uint64_t v) { values_[key] = std::to_string(v); }
  void set(const std::string& key, int v) { values_[key] = std::to_string(v); }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing config key: " + key);
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return std::stod(get(key)); }
  std::int64_t get_int(const std::string& key) const { return std::stoll(get(key)); }
  std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }

  void parse_line(const std::string& line) {
    if (line.empty() || line[0] == '#') return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed key=value line: " + line);
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw std::runtime_error("empty key in line: " + line);
    values_[key] = value;
  }

  static KeyValueMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    KeyValueMap kv;
    std::string line;
    while (std::getline(in, line)) kv.parse_line(line);
    return kv;
  }

  void save(std::ostream& out) const {
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    save(out);
    if (!out) throw std::runtime_error("config write failure: " + path);
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace wrapnet
