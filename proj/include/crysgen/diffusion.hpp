#pragma once

#include <vector>

#include "crysgen/crystal.hpp"
#include "crysgen/rng.hpp"

namespace crysgen {

// Noise schedules for the two chains: a cosine DDPM schedule on the lattice
// and an exponentially spaced sigma ladder on the fractional coordinates.
// Arrays are indexed by timestep t in 1..T; index 0 holds the conventional
// boundary values alpha_bar(0) = 1 and sigma(0) = 0 used by the sampler.
struct DiffusionSchedules {
  int total_steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  std::vector<double> sigmas;
  double sigma_min = 0, sigma_max = 0;
  double cosine_offset = 0;
  // Total-variation distance between the wrapped normal at sigma_T and the
  // uniform distribution on [0,1), computed numerically at construction.
  double terminal_tv_uniform = 0;

  double beta(int t) const { return betas.at(static_cast<std::size_t>(t)); }
  double alpha(int t) const { return alphas.at(static_cast<std::size_t>(t)); }
  double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(t)); }
  double sigma(int t) const { return sigmas.at(static_cast<std::size_t>(t)); }
};

inline constexpr double kDefaultSigmaMin = 0.005;
inline constexpr double kDefaultSigmaMax = 0.5;
inline constexpr int kDefaultDiffusionSteps = 1000;

// Throws BadScheduleParams for T < 2, a non-increasing sigma range, or a
// terminal sigma whose wrapped normal stays far from uniform.
DiffusionSchedules make_schedules(int total_steps, double sigma_min = kDefaultSigmaMin,
                                  double sigma_max = kDefaultSigmaMax);

// TV distance between the wrapped normal WN(0, sigma^2) on [0,1) and uniform.
double wrapped_normal_tv_uniform(double sigma);

struct NoisePair {
  MatX3 eps_coords;
  Mat3 eps_lattice;
};

// Fixed draw order: coordinate noise row-major, then lattice noise row-major.
NoisePair draw_noise_pair(Rng& rng, int num_atoms);

// Closed-form DDPM corruption: sqrt(abar_t) L0 + sqrt(1 - abar_t) eps.
Mat3 forward_lattice(const Mat3& l0, int t, const Mat3& eps_lattice,
                     const DiffusionSchedules& s);

// Wrapped-normal corruption: wrap(X0 + sigma_t eps).
MatX3 forward_coords(const MatX3& x0, int t, const MatX3& eps_coords,
                     const DiffusionSchedules& s);

// Score of the 1D wrapped normal at displacement d (any real; reduced to the
// canonical representative in [-0.5, 0.5) internally). The N x 3 form applies
// entrywise since the density factorizes.
double wn_score(double d, double sigma);
MatX3 wn_score(const MatX3& displacement, double sigma);

// Mean squared deviation losses (Eqs. used by the trainer).
double coord_loss(const MatX3& score_target, const MatX3& coord_pred);
double lattice_loss(const Mat3& eps_lattice, const Mat3& lattice_pred);

}  // namespace crysgen
