#pragma once

#include <functional>
#include <vector>

#include "crysgen/checkpoint.hpp"
#include "crysgen/crystal.hpp"
#include "crysgen/rng.hpp"

namespace crysgen {

struct StepLosses {
  double coord = 0.0;
  double lattice = 0.0;
  double total() const { return coord + lattice; }
};

// Bias-corrected Adam step, in place. `step` is the 1-based update count.
void adam_update(DenoiserParams& params, const DenoiserParams& grads, DenoiserParams& m,
                 DenoiserParams& v, double lr, double beta1, double beta2, double eps,
                 std::int64_t step);

// Structure-prediction training: per crystal draw t ~ U(1,T), corrupt both
// chains, regress the denoiser on the lattice noise and the sigma-scaled
// wrapped-normal score, and take one Adam step on the summed loss.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<Crystal> dataset);
  Trainer(const Checkpoint& ck, std::vector<Crystal> dataset);

  // One optimizer step on an explicit batch. Throws NonFiniteLoss.
  StepLosses train_step(const std::vector<const Crystal*>& batch);

  // One optimizer step on the next shuffled batch (wraparound sampling).
  StepLosses step();

  std::uint64_t step_count() const { return step_; }
  // Steps a full `train` run will perform under the stored config.
  std::uint64_t planned_steps() const;

  Checkpoint to_checkpoint() const;

  const DenoiserParams& params() const { return params_; }
  const DiffusionSchedules& schedules() const { return schedules_; }
  const LatticeStandardizer& standardizer() const { return standardizer_; }

 private:
  std::vector<const Crystal*> next_batch();

  TrainConfig cfg_;
  std::vector<Crystal> dataset_;
  DenoiserParams params_, adam_m_, adam_v_;
  DiffusionSchedules schedules_;
  LatticeStandardizer standardizer_;
  Rng rng_noise_, rng_data_;
  std::vector<std::uint32_t> epoch_order_;
  std::uint64_t epoch_cursor_ = 0;
  std::uint64_t step_ = 0;
  LossStats loss_stats_;
};

struct TrainSinks {
  std::function<void(std::uint64_t step, const StepLosses&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;  // checkpoint_every
};

// Runs the configured number of steps (or epochs of shuffled batches) and
// returns the final checkpoint. Throws EmptyDataset.
Checkpoint train(const TrainConfig& cfg, const std::vector<Crystal>& dataset,
                 const TrainSinks& sinks = {});

// Continues a checkpointed run against the same dataset; the combined
// trajectory is bit-identical to the uninterrupted one.
Checkpoint resume_train(const Checkpoint& ck, const std::vector<Crystal>& dataset,
                        const TrainSinks& sinks = {});

}  // namespace crysgen
