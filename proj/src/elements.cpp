#include "crysgen/elements.hpp"

#include <array>
#include <stdexcept>
#include <unordered_map>

namespace crysgen {

namespace {

struct ElementRow {
  const char* symbol;
  double mass;
  std::vector<int> oxidation;
};

// Z = index + 1. Masses are the standard IUPAC atomic weights; oxidation
// states are the common nonzero states used for charge balancing.
const std::array<ElementRow, 100>& table() {
  static const std::array<ElementRow, 100> t = {{
      {"H", 1.008, {-1, 1}},
      {"He", 4.0026, {}},
      {"Li", 6.94, {1}},
      {"Be", 9.0122, {2}},
      {"B", 10.81, {3}},
      {"C", 12.011, {-4, -3, -2, -1, 1, 2, 3, 4}},
      {"N", 14.007, {-3, -2, -1, 1, 2, 3, 4, 5}},
      {"O", 15.999, {-2, -1}},
      {"F", 18.998, {-1}},
      {"Ne", 20.180, {}},
      {"Na", 22.990, {1}},
      {"Mg", 24.305, {2}},
      {"Al", 26.982, {3}},
      {"Si", 28.085, {-4, 4}},
      {"P", 30.974, {-3, 3, 5}},
      {"S", 32.06, {-2, 2, 4, 6}},
      {"Cl", 35.45, {-1, 1, 3, 5, 7}},
      {"Ar", 39.948, {}},
      {"K", 39.098, {1}},
      {"Ca", 40.078, {2}},
      {"Sc", 44.956, {3}},
      {"Ti", 47.867, {2, 3, 4}},
      {"V", 50.942, {2, 3, 4, 5}},
      {"Cr", 51.996, {2, 3, 6}},
      {"Mn", 54.938, {2, 3, 4, 6, 7}},
      {"Fe", 55.845, {2, 3}},
      {"Co", 58.933, {2, 3}},
      {"Ni", 58.693, {2}},
      {"Cu", 63.546, {1, 2}},
      {"Zn", 65.38, {2}},
      {"Ga", 69.723, {3}},
      {"Ge", 72.630, {-4, 2, 4}},
      {"As", 74.922, {-3, 3, 5}},
      {"Se", 78.971, {-2, 2, 4, 6}},
      {"Br", 79.904, {-1, 1, 3, 5, 7}},
      {"Kr", 83.798, {2}},
      {"Rb", 85.468, {1}},
      {"Sr", 87.62, {2}},
      {"Y", 88.906, {3}},
      {"Zr", 91.224, {4}},
      {"Nb", 92.906, {3, 5}},
      {"Mo", 95.95, {2, 3, 4, 5, 6}},
      {"Tc", 98.0, {4, 7}},
      {"Ru", 101.07, {2, 3, 4, 8}},
      {"Rh", 102.91, {3}},
      {"Pd", 106.42, {2, 4}},
      {"Ag", 107.87, {1}},
      {"Cd", 112.41, {2}},
      {"In", 114.82, {1, 3}},
      {"Sn", 118.71, {-4, 2, 4}},
      {"Sb", 121.76, {-3, 3, 5}},
      {"Te", 127.60, {-2, 2, 4, 6}},
      {"I", 126.90, {-1, 1, 3, 5, 7}},
      {"Xe", 131.29, {2, 4, 6}},
      {"Cs", 132.91, {1}},
      {"Ba", 137.33, {2}},
      {"La", 138.91, {3}},
      {"Ce", 140.12, {3, 4}},
      {"Pr", 140.91, {3}},
      {"Nd", 144.24, {3}},
      {"Pm", 145.0, {3}},
      {"Sm", 150.36, {2, 3}},
      {"Eu", 151.96, {2, 3}},
      {"Gd", 157.25, {3}},
      {"Tb", 158.93, {3, 4}},
      {"Dy", 162.50, {3}},
      {"Ho", 164.93, {3}},
      {"Er", 167.26, {3}},
      {"Tm", 168.93, {2, 3}},
      {"Yb", 173.05, {2, 3}},
      {"Lu", 174.97, {3}},
      {"Hf", 178.49, {4}},
      {"Ta", 180.95, {5}},
      {"W", 183.84, {4, 6}},
      {"Re", 186.21, {4, 6, 7}},
      {"Os", 190.23, {3, 4}},
      {"Ir", 192.22, {3, 4}},
      {"Pt", 195.08, {2, 4}},
      {"Au", 196.97, {1, 3}},
      {"Hg", 200.59, {1, 2}},
      {"Tl", 204.38, {1, 3}},
      {"Pb", 207.2, {2, 4}},
      {"Bi", 208.98, {3, 5}},
      {"Po", 209.0, {-2, 2, 4}},
      {"At", 210.0, {-1, 1}},
      {"Rn", 222.0, {2}},
      {"Fr", 223.0, {1}},
      {"Ra", 226.0, {2}},
      {"Ac", 227.0, {3}},
      {"Th", 232.04, {4}},
      {"Pa", 231.04, {4, 5}},
      {"U", 238.03, {3, 4, 5, 6}},
      {"Np", 237.0, {3, 4, 5, 6}},
      {"Pu", 244.0, {3, 4, 5, 6}},
      {"Am", 243.0, {3}},
      {"Cm", 247.0, {3}},
      {"Bk", 247.0, {3}},
      {"Cf", 251.0, {3}},
      {"Es", 252.0, {3}},
      {"Fm", 257.0, {3}},
  }};
  return t;
}

const std::unordered_map<std::string_view, int>& symbol_index() {
  static const std::unordered_map<std::string_view, int> idx = [] {
    std::unordered_map<std::string_view, int> m;
    for (int z = 1; z <= kMaxAtomicNumber; ++z) {
      m.emplace(table()[z - 1].symbol, z);
    }
    return m;
  }();
  return idx;
}

const ElementRow& row(int z) {
  if (z < 1 || z > kMaxAtomicNumber) {
    throw std::out_of_range("atomic number outside whitelist: " + std::to_string(z));
  }
  return table()[z - 1];
}

}  // namespace

bool is_known_element(int z) { return z >= 1 && z <= kMaxAtomicNumber; }

const std::string& element_symbol(int z) {
  static std::array<std::string, 100>* cache = [] {
    auto* c = new std::array<std::string, 100>();
    for (int i = 0; i < 100; ++i) (*c)[i] = table()[i].symbol;
    return c;
  }();
  if (!is_known_element(z)) {
    throw std::out_of_range("atomic number outside whitelist: " + std::to_string(z));
  }
  return (*cache)[z - 1];
}

int atomic_number(std::string_view symbol) {
  auto it = symbol_index().find(symbol);
  return it == symbol_index().end() ? 0 : it->second;
}

double atomic_mass(int z) { return row(z).mass; }

const std::vector<int>& common_oxidation_states(int z) { return row(z).oxidation; }

}  // namespace crysgen
