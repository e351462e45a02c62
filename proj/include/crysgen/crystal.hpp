#pragma once

#include <Eigen/Dense>
#include <vector>

namespace crysgen {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Cell lengths in angstrom, angles in degrees.
struct LatticeParams {
  double a = 0, b = 0, c = 0;
  double alpha = 90, beta = 90, gamma = 90;
};

// A periodic crystal: atomic numbers, fractional coordinates in [0,1), and a
// 3x3 lattice whose *rows* are the lattice vectors (cartesian = frac * L).
struct Crystal {
  std::vector<int> atom_types;
  MatX3 frac_coords;
  Mat3 lattice;

  int num_atoms() const { return static_cast<int>(atom_types.size()); }
  double volume() const { return lattice.determinant(); }
};

// Throws InvalidCrystal (with the offending field named) if any invariant is
// violated: N >= 1, whitelist types, wrapped finite coordinates, det(L) > 0.
void validate_crystal(const Crystal& c);
bool crystal_is_valid(const Crystal& c);

// Builds the canonical lattice: l1 along x, l2 in the xy plane, det > 0.
// Throws NonPositiveLength / DegenerateAngles.
Mat3 lattice_from_params(const LatticeParams& p);

// Inverse of the above up to rigid rotation. Throws SingularLattice.
LatticeParams params_from_lattice(const Mat3& lattice);

// Elementwise x - floor(x). Throws NonFiniteInput.
MatX3 wrap_fractional(const MatX3& x);
double wrap_fractional(double x);

// Canonical displacement representative in [-0.5, 0.5).
double wrap_centered(double x);

// Shortest distance (angstrom) between periodic images of two fractional
// points. Searches integer offsets within +-search_radius per axis.
double min_periodic_distance(const Vec3& xi, const Vec3& xj, const Mat3& lattice,
                             int search_radius = 1);

// Mass density in g/cm^3. Throws SingularLattice on non-positive volume.
double density(const Crystal& c);

}  // namespace crysgen
