#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crysgen/denoiser.hpp"
#include "crysgen/diffusion.hpp"

namespace crysgen {

// Scalar affine standardization of lattice entries, fit on the training set.
// The DDPM chain runs in the standardized domain; sampling inverts it.
struct LatticeStandardizer {
  bool enabled = true;
  double mean = 0.0;
  double stddev = 1.0;

  Mat3 standardize(const Mat3& l) const {
    if (!enabled) return l;
    return (l.array() - mean).matrix() / stddev;
  }
  Mat3 destandardize(const Mat3& l) const {
    if (!enabled) return l;
    return (l.array() * stddev + mean).matrix();
  }
};

LatticeStandardizer fit_standardizer(const std::vector<Crystal>& dataset, bool enabled);

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 0.001;
  int diffusion_steps = kDefaultDiffusionSteps;  // T
  int epochs = 1;
  std::int64_t max_steps = 0;  // when > 0, overrides the epoch count
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  double grad_clip_norm = 1.0;
  bool standardize_lattice = true;
  double sigma_min = kDefaultSigmaMin;
  double sigma_max = kDefaultSigmaMax;
  DenoiserConfig net;
};

struct LossStats {
  double ema_coord = 0.0;
  double ema_lattice = 0.0;
  std::int64_t count = 0;
};

struct Checkpoint {
  DenoiserParams params;
  DenoiserParams adam_m;
  DenoiserParams adam_v;
  DiffusionSchedules schedules;
  TrainConfig config;
  LatticeStandardizer standardizer;
  std::uint64_t step = 0;
  std::string rng_noise_state;
  std::string rng_data_state;
  std::vector<std::uint32_t> epoch_order;
  std::uint64_t epoch_cursor = 0;
  LossStats loss_stats;
};

// Versioned binary layout: magic, version, config block, then raw
// little-endian doubles for every tensor in declared order.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace crysgen
