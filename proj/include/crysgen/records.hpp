#pragma once

#include <string>
#include <vector>

#include "crysgen/crystal.hpp"

namespace crysgen {

// Crystal record files hold one JSON object per line:
//   {"atom_types":[Z...],"frac_coords":[[f,f,f]...],"lattice":[[f,f,f]x3]}
// This is the canonical dataset/exchange format between all components.

std::string crystal_to_record_line(const Crystal& c);
Crystal crystal_from_record_line(const std::string& line);

std::vector<Crystal> read_record_file(const std::string& path);
void write_record_file(const std::string& path, const std::vector<Crystal>& crystals);

}  // namespace crysgen
