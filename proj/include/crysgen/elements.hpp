#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crysgen {

// Element whitelist covers atomic numbers 1..100.
inline constexpr int kMaxAtomicNumber = 100;

bool is_known_element(int z);

// Symbol lookup. Throws std::out_of_range for z outside 1..100.
const std::string& element_symbol(int z);

// Returns 0 if the symbol is not in the whitelist. Case sensitive.
int atomic_number(std::string_view symbol);

// Standard atomic weight in g/mol.
double atomic_mass(int z);

// Common (nonzero) oxidation states used by the charge-neutrality check.
// May be empty for noble gases and similar.
const std::vector<int>& common_oxidation_states(int z);

}  // namespace crysgen
