#include "crysgen/config.hpp"

#include <fstream>
#include <sstream>

#include "crysgen/errors.hpp"

namespace crysgen {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

FileConfig FileConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

FileConfig FileConfig::parse_string(const std::string& text) {
  FileConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ValidationError("config line " + std::to_string(lineno) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool FileConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string FileConfig::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double FileConfig::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stod(get_string(section, key, ""));
  } catch (...) {
    throw ValidationError("config key " + section + "." + key + " is not a number");
  }
}

long long FileConfig::get_int(const std::string& section, const std::string& key,
                              long long fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoll(get_string(section, key, ""));
  } catch (...) {
    throw ValidationError("config key " + section + "." + key + " is not an integer");
  }
}

bool FileConfig::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ValidationError("config key " + section + "." + key + " is not a boolean");
}

}  // namespace crysgen
