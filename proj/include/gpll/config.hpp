#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpll {

// Flat key = value configuration. Keys are unique; later assignments win.
struct Config {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  const std::string& require(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument("config: missing key '" + key + "'");
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double get_real(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("config: key '" + key + "' is not a number");
    return v;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("config: key '" + key + "' is not an integer");
    return v;
  }
};

inline std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_copy(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = trim_copy(t.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has empty key");
    cfg.values[key] = trim_copy(t.substr(eq + 1));
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// FNV-1a over the canonical sorted key=value serialization; stable across
// runs and platforms, used to stamp every report row.
inline std::uint64_t config_hash(const Config& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto eat = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [k, v] : cfg.values) {
    eat(k);
    eat("=");
    eat(v);
    eat("\n");
  }
  return h;
}

inline std::string config_hash_hex(const Config& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

inline std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const std::string t = trim_copy(item);
    if (t.empty()) continue;
    std::size_t pos = 0;
    out.push_back(std::stod(t, &pos));
    if (pos != t.size()) throw std::invalid_argument("config: bad number '" + t + "'");
  }
  return out;
}

// Fixed-width scientific-capable rendering used for every numeric cell so
// reruns are byte-identical.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(std::move(header)) {}

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw std::invalid_argument("csv: column count mismatch");
    rows_.push_back(cells);
  }

  std::string to_string() const {
    std::ostringstream out;
    write_line(out, columns_);
    for (const auto& row : rows_) write_line(out, row);
    return out.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot open " + path);
    out << to_string();
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace gpll
