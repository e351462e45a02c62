#include "crysgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "crysgen/elements.hpp"
#include "crysgen/rng.hpp"

namespace crysgen {

namespace {

struct Combo {
  int a, b, x;
};

double ionic_radius(int z) {
  static const std::map<std::string, double> radii = {
      {"Li", 0.76}, {"Na", 1.02}, {"K", 1.38},  {"Rb", 1.52}, {"Cs", 1.67},
      {"Mg", 0.72}, {"Ca", 1.00}, {"Sr", 1.18}, {"Ba", 1.35}, {"Sc", 0.75},
      {"Y", 0.90},  {"La", 1.03}, {"Nd", 0.98}, {"V", 0.54},  {"Nb", 0.64},
      {"Ta", 0.64}, {"Ti", 0.60}, {"Zr", 0.72}, {"Hf", 0.71}, {"Sn", 0.69},
      {"Al", 0.54}, {"Ga", 0.62}, {"In", 0.80}, {"Fe", 0.65}, {"Zn", 0.74},
      {"Ni", 0.69}, {"Co", 0.65}, {"Pb", 1.19}, {"Ag", 1.15}, {"O", 1.40},
      {"F", 1.33},  {"Cl", 1.81}, {"Br", 1.96}};
  const auto it = radii.find(element_symbol(z));
  return it == radii.end() ? 1.0 : it->second;
}

std::vector<int> zs(std::initializer_list<const char*> symbols) {
  std::vector<int> out;
  for (const char* s : symbols) out.push_back(atomic_number(s));
  return out;
}

std::vector<Combo> charge_balanced_combos() {
  const auto a1 = zs({"Li", "Na", "K", "Rb", "Cs"});
  const auto a2 = zs({"Mg", "Ca", "Sr", "Ba"});
  const auto a3 = zs({"Sc", "Y", "La", "Nd"});
  const auto b5 = zs({"V", "Nb", "Ta"});
  const auto b4 = zs({"Ti", "Zr", "Hf", "Sn"});
  const auto b3 = zs({"Al", "Ga", "In", "Fe"});
  const auto b2 = zs({"Zn", "Ni", "Co", "Pb"});
  const auto b1 = zs({"Li", "Ag"});
  const int oxide = atomic_number("O");
  const auto halides = zs({"F", "Cl", "Br"});

  std::vector<Combo> combos;
  auto cross = [&](const std::vector<int>& as, const std::vector<int>& bs, int x) {
    for (int a : as) {
      for (int b : bs) {
        if (a != b) combos.push_back({a, b, x});
      }
    }
  };
  cross(a1, b5, oxide);
  cross(a2, b4, oxide);
  cross(a3, b3, oxide);
  for (int x : halides) {
    cross(a1, b2, x);
    cross(a2, b1, x);
  }
  return combos;
}

}  // namespace

std::vector<Crystal> make_perovskite_dataset(const PerovskiteDatasetOptions& opts) {
  auto combos = charge_balanced_combos();
  Rng rng(opts.seed);
  for (std::size_t k = combos.size(); k > 1; --k) {
    std::swap(combos[k - 1], combos[rng.uniform_int(k)]);
  }

  MatX3 sites(5, 3);
  sites << 0.0, 0.0, 0.0,  //
      0.5, 0.5, 0.5,       //
      0.5, 0.5, 0.0,       //
      0.5, 0.0, 0.5,       //
      0.0, 0.5, 0.5;

  std::vector<Crystal> out;
  out.reserve(static_cast<std::size_t>(opts.count));
  for (int i = 0; i < opts.count; ++i) {
    const Combo& cb = combos[static_cast<std::size_t>(i) % combos.size()];
    double cell = 2.0 * (ionic_radius(cb.b) + ionic_radius(cb.x)) +
                  0.15 * (ionic_radius(cb.a) - 1.1) +
                  (2.0 * rng.uniform01() - 1.0) * opts.length_jitter;
    cell = std::clamp(cell, 3.2, 6.0);
    Crystal c;
    c.atom_types = {cb.a, cb.b, cb.x, cb.x, cb.x};
    c.frac_coords = sites;
    c.lattice = cell * Mat3::Identity();
    out.push_back(std::move(c));
  }
  return out;
}

Crystal make_rocksalt_crystal(double cell) {
  // Conventional 8-site rocksalt cell doubled along z: 16 atoms.
  Crystal c;
  std::vector<Vec3> na, cl;
  for (int ix = 0; ix < 2; ++ix) {
    for (int iy = 0; iy < 2; ++iy) {
      for (int iz = 0; iz < 4; ++iz) {
        const Vec3 p(ix * 0.5, iy * 0.5, iz * 0.25);
        if ((ix + iy + iz) % 2 == 0) {
          na.push_back(p);
        } else {
          cl.push_back(p);
        }
      }
    }
  }
  const int n = static_cast<int>(na.size() + cl.size());
  c.frac_coords.resize(n, 3);
  int row = 0;
  for (const auto& p : na) {
    c.atom_types.push_back(atomic_number("Na"));
    c.frac_coords.row(row++) = p;
  }
  for (const auto& p : cl) {
    c.atom_types.push_back(atomic_number("Cl"));
    c.frac_coords.row(row++) = p;
  }
  c.lattice = Mat3::Zero();
  c.lattice(0, 0) = cell;
  c.lattice(1, 1) = cell;
  c.lattice(2, 2) = 2.0 * cell;
  return c;
}

SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t k = n; k > 1; --k) {
    std::swap(order[k - 1], order[rng.uniform_int(k)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
  SplitIndices s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      s.train.push_back(order[i]);
    } else if (i < n_train + n_val) {
      s.val.push_back(order[i]);
    } else {
      s.test.push_back(order[i]);
    }
  }
  return s;
}

}  // namespace crysgen
