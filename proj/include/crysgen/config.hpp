#pragma once

#include <map>
#include <string>

namespace crysgen {

// Minimal TOML-style config: [section] headers, `key = value` lines, `#`
// comments. Values: quoted strings, booleans, numbers. CLI flags override
// file values; everything resolved is echoed into outputs for provenance.
class FileConfig {
 public:
  FileConfig() = default;
  static FileConfig parse_file(const std::string& path);
  static FileConfig parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace crysgen
