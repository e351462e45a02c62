#include "crysgen/records.hpp"

#include <fstream>

#include <json.hpp>

#include "crysgen/errors.hpp"

namespace crysgen {

using nlohmann::json;

std::string crystal_to_record_line(const Crystal& c) {
  json rec;
  rec["atom_types"] = c.atom_types;
  json coords = json::array();
  for (Eigen::Index i = 0; i < c.frac_coords.rows(); ++i) {
    coords.push_back({c.frac_coords(i, 0), c.frac_coords(i, 1), c.frac_coords(i, 2)});
  }
  rec["frac_coords"] = std::move(coords);
  json lat = json::array();
  for (int i = 0; i < 3; ++i) {
    lat.push_back({c.lattice(i, 0), c.lattice(i, 1), c.lattice(i, 2)});
  }
  rec["lattice"] = std::move(lat);
  return rec.dump();
}

Crystal crystal_from_record_line(const std::string& line) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("record is not valid JSON: ") + e.what());
  }
  if (!rec.contains("atom_types") || !rec.contains("frac_coords") || !rec.contains("lattice")) {
    throw SyntaxError("record is missing atom_types/frac_coords/lattice");
  }
  Crystal c;
  try {
    c.atom_types = rec.at("atom_types").get<std::vector<int>>();
    const auto& coords = rec.at("frac_coords");
    c.frac_coords.resize(static_cast<Eigen::Index>(coords.size()), 3);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords[i].size() != 3) throw SyntaxError("frac_coords row must have 3 entries");
      for (int j = 0; j < 3; ++j) c.frac_coords(static_cast<Eigen::Index>(i), j) = coords[i][j].get<double>();
    }
    const auto& lat = rec.at("lattice");
    if (lat.size() != 3) throw SyntaxError("lattice must have 3 rows");
    for (int i = 0; i < 3; ++i) {
      if (lat[i].size() != 3) throw SyntaxError("lattice row must have 3 entries");
      for (int j = 0; j < 3; ++j) c.lattice(i, j) = lat[i][j].get<double>();
    }
  } catch (const json::exception& e) {
    throw SyntaxError(std::string("malformed record: ") + e.what());
  }
  validate_crystal(c);
  return c;
}

std::vector<Crystal> read_record_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open record file: " + path);
  std::vector<Crystal> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(crystal_from_record_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_record_file(const std::string& path, const std::vector<Crystal>& crystals) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open record file for writing: " + path);
  for (const auto& c : crystals) out << crystal_to_record_line(c) << '\n';
  if (!out) throw IoError("failed writing record file: " + path);
}

}  // namespace crysgen
