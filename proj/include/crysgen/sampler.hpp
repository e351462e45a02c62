#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "crysgen/checkpoint.hpp"
#include "crysgen/proposer.hpp"

namespace crysgen {

struct SamplerConfig {
  int tau = -1;                // injection timestep; -1 resolves to T/10
  double step_size = 1e-5;     // Langevin corrector scale
  int inference_steps = 900;   // stride target for full-noise (tau == T) runs
  std::uint64_t seed = 0;
  bool record_trace = false;
};

struct TraceEntry {
  int t = 0;
  double coord_step = 0.0;    // mean periodic coordinate displacement
  double lattice_step = 0.0;  // Frobenius norm of the lattice update
};

struct GeneratedMaterial {
  Crystal crystal;
  Proposal proposal;
  int tau_used = 0;
  std::uint64_t seed = 0;
  std::vector<TraceEntry> trace;
};

// Randomness feed for the reverse chain; tests substitute zero or recorded
// noise. Draw order per step: lattice, predictor coords, corrector coords.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Mat3 lattice_noise() = 0;
  virtual MatX3 coord_noise(int num_atoms) = 0;
  virtual MatX3 uniform_coords(int num_atoms) = 0;  // CSP start
};

class RngNoise : public NoiseSource {
 public:
  explicit RngNoise(std::uint64_t seed) : rng_(seed) {}
  Mat3 lattice_noise() override;
  MatX3 coord_noise(int num_atoms) override;
  MatX3 uniform_coords(int num_atoms) override;

 private:
  Rng rng_;
};

class ZeroNoise : public NoiseSource {
 public:
  Mat3 lattice_noise() override { return Mat3::Zero(); }
  MatX3 coord_noise(int num_atoms) override { return MatX3::Zero(num_atoms, 3); }
  MatX3 uniform_coords(int num_atoms) override { return MatX3::Zero(num_atoms, 3); }
};

using DenoiseFn = std::function<DenoiserOutput(const std::vector<int>&, const MatX3&,
                                               const Mat3&, int)>;

// Everything the reverse chain needs from a trained checkpoint.
struct SamplerModel {
  DenoiseFn denoise;
  DiffusionSchedules schedules;
  LatticeStandardizer standardizer;
};

SamplerModel model_from_checkpoint(const Checkpoint& ck);
// Denoiser stubbed to zeros; handy for chain-mechanics tests.
SamplerModel zero_model(const DiffusionSchedules& schedules,
                        const LatticeStandardizer& standardizer = {false, 0.0, 1.0});

// Descending timesteps visited by the reverse loop: all of tau..1 when
// tau < T, a strided grid of `inference_steps` values when tau == T.
std::vector<int> reverse_time_grid(int tau, int total_steps, int inference_steps);

// Hybrid refinement: keep the proposal's atom types, inject (X, L) at tau,
// then run the ancestral lattice updates and predictor-corrector coordinate
// updates down to t = 0. Throws TauOutOfRange, InvalidProposal,
// NonFiniteState.
GeneratedMaterial sample(const Proposal& proposal, const SamplerModel& model,
                         const SamplerConfig& cfg);
GeneratedMaterial sample_with_noise(const Proposal& proposal, const SamplerModel& model,
                                    const SamplerConfig& cfg, NoiseSource& noise);

// Structure prediction: composition fixed, chain started from pure noise
// (uniform coordinates, gaussian lattice) at t = T. The final lattice is
// re-gauged to its lower-triangular factor.
GeneratedMaterial sample_csp(const std::vector<int>& atom_types, const SamplerModel& model,
                             const SamplerConfig& cfg);
GeneratedMaterial sample_csp_with_noise(const std::vector<int>& atom_types,
                                        const SamplerModel& model, const SamplerConfig& cfg,
                                        NoiseSource& noise);

// Unique lower-triangular positive-diagonal A with A^T A = M^T M.
Mat3 lower_triangular_gauge(const Mat3& m);

struct BatchReport {
  int requested = 0;
  int generated = 0;
  int failed = 0;
  std::int64_t proposal_attempts = 0;
  std::int64_t proposals_rejected = 0;
  std::vector<std::pair<int, std::string>> failures;
};

struct BatchResult {
  std::vector<GeneratedMaterial> materials;
  BatchReport report;
};

// n independent propose -> sample pipelines with per-item derived seeds.
// Item failures are collected in the report, not thrown.
BatchResult generate_batch(const Prompt& prompt, int n, const Proposer& proposer,
                           const SamplerModel& model, const SamplerConfig& cfg,
                           int jobs = 1);

}  // namespace crysgen
