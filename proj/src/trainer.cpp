#include "crysgen/trainer.hpp"

#include <cmath>

#include "crysgen/diffusion.hpp"
#include "crysgen/errors.hpp"

namespace crysgen {

void adam_update(DenoiserParams& params, const DenoiserParams& grads, DenoiserParams& m,
                 DenoiserParams& v, double lr, double beta1, double beta2, double eps,
                 std::int64_t step) {
  if (params.tensors.size() != grads.tensors.size()) {
    throw ShapeMismatch("adam_update: params vs grads tensor count");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i];
    const auto& g = grads.tensors[i];
    if (p.rows() != g.rows() || p.cols() != g.cols()) {
      throw ShapeMismatch("adam_update: tensor " + std::to_string(i));
    }
    auto& mi = m.tensors[i];
    auto& vi = v.tensors[i];
    mi = beta1 * mi + (1.0 - beta1) * g;
    vi = (beta2 * vi.array() + (1.0 - beta2) * g.array().square()).matrix();
    p.array() -= lr * (mi.array() / bc1) / ((vi.array() / bc2).sqrt() + eps);
  }
}

Trainer::Trainer(TrainConfig cfg, std::vector<Crystal> dataset)
    : cfg_(cfg), dataset_(std::move(dataset)) {
  if (dataset_.empty()) throw EmptyDataset("training dataset is empty");
  for (const auto& c : dataset_) validate_crystal(c);
  schedules_ = make_schedules(cfg_.diffusion_steps, cfg_.sigma_min, cfg_.sigma_max);
  standardizer_ = fit_standardizer(dataset_, cfg_.standardize_lattice);
  params_ = init_denoiser(cfg_.net, cfg_.seed);
  adam_m_ = zeros_like(params_);
  adam_v_ = zeros_like(params_);
  rng_noise_ = Rng(mix_seed(cfg_.seed, 0xA11CE));
  rng_data_ = Rng(mix_seed(cfg_.seed, 0xDA7A));
}

Trainer::Trainer(const Checkpoint& ck, std::vector<Crystal> dataset)
    : cfg_(ck.config), dataset_(std::move(dataset)) {
  if (dataset_.empty()) throw EmptyDataset("training dataset is empty");
  schedules_ = ck.schedules;
  standardizer_ = ck.standardizer;
  params_ = ck.params;
  adam_m_ = ck.adam_m;
  adam_v_ = ck.adam_v;
  step_ = ck.step;
  loss_stats_ = ck.loss_stats;
  rng_noise_.load_state(ck.rng_noise_state);
  rng_data_.load_state(ck.rng_data_state);
  epoch_order_ = ck.epoch_order;
  epoch_cursor_ = ck.epoch_cursor;
}

std::uint64_t Trainer::planned_steps() const {
  if (cfg_.max_steps > 0) return static_cast<std::uint64_t>(cfg_.max_steps);
  const std::uint64_t n = dataset_.size();
  const std::uint64_t b = static_cast<std::uint64_t>(std::max(1, cfg_.batch_size));
  const std::uint64_t per_epoch = std::max<std::uint64_t>(1, (n + b - 1) / b);
  return per_epoch * static_cast<std::uint64_t>(std::max(0, cfg_.epochs));
}

std::vector<const Crystal*> Trainer::next_batch() {
  std::vector<const Crystal*> batch;
  batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
  for (int i = 0; i < cfg_.batch_size; ++i) {
    if (epoch_cursor_ >= epoch_order_.size()) {
      epoch_order_.resize(dataset_.size());
      for (std::size_t k = 0; k < dataset_.size(); ++k) {
        epoch_order_[k] = static_cast<std::uint32_t>(k);
      }
      for (std::size_t k = dataset_.size(); k > 1; --k) {  // Fisher-Yates
        const auto j = rng_data_.uniform_int(k);
        std::swap(epoch_order_[k - 1], epoch_order_[j]);
      }
      epoch_cursor_ = 0;
    }
    batch.push_back(&dataset_[epoch_order_[epoch_cursor_++]]);
  }
  return batch;
}

StepLosses Trainer::train_step(const std::vector<const Crystal*>& batch) {
  if (batch.empty()) throw EmptyDataset("train_step batch is empty");
  DenoiserParams grads = zeros_like(params_);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  StepLosses losses;

  for (const Crystal* c : batch) {
    const int n = c->num_atoms();
    const int t = 1 + static_cast<int>(rng_noise_.uniform_int(
                          static_cast<std::uint64_t>(schedules_.total_steps)));
    const NoisePair np = draw_noise_pair(rng_noise_, n);
    const double sigma_t = schedules_.sigma(t);

    const Mat3 l0 = standardizer_.standardize(c->lattice);
    const Mat3 lt = forward_lattice(l0, t, np.eps_lattice, schedules_);
    const MatX3 xt = forward_coords(c->frac_coords, t, np.eps_coords, schedules_);

    MatX3 disp(n, 3);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) disp(i, j) = xt(i, j) - c->frac_coords(i, j);
    }
    const MatX3 score_target = sigma_t * wn_score(disp, sigma_t);

    DenoiserCache cache;
    const DenoiserOutput out =
        denoiser_forward(params_, c->atom_types, xt, lt, t, &cache);

    losses.coord += coord_loss(score_target, out.coord_score) * inv_b;
    losses.lattice += lattice_loss(np.eps_lattice, out.lattice_noise) * inv_b;

    const Mat3 d_lat = 2.0 / 9.0 * inv_b * (out.lattice_noise - np.eps_lattice);
    const MatX3 d_coord =
        2.0 / (3.0 * n) * inv_b * (out.coord_score - score_target);
    const DenoiserParams g = denoiser_backward(params_, cache, d_lat, d_coord);
    for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
      grads.tensors[i] += g.tensors[i];
    }
  }

  if (!std::isfinite(losses.coord) || !std::isfinite(losses.lattice)) {
    throw NonFiniteLoss("at step " + std::to_string(step_ + 1) +
                        ": coord=" + std::to_string(losses.coord) +
                        " lattice=" + std::to_string(losses.lattice));
  }

  if (cfg_.grad_clip_norm > 0) {
    double norm2 = 0.0;
    for (const auto& g : grads.tensors) norm2 += g.squaredNorm();
    const double norm = std::sqrt(norm2);
    if (norm > cfg_.grad_clip_norm) {
      const double scale = cfg_.grad_clip_norm / norm;
      for (auto& g : grads.tensors) g *= scale;
    }
  }

  ++step_;
  adam_update(params_, grads, adam_m_, adam_v_, cfg_.learning_rate, cfg_.adam_beta1,
              cfg_.adam_beta2, cfg_.adam_eps, static_cast<std::int64_t>(step_));

  if (loss_stats_.count == 0) {
    loss_stats_.ema_coord = losses.coord;
    loss_stats_.ema_lattice = losses.lattice;
  } else {
    loss_stats_.ema_coord = 0.98 * loss_stats_.ema_coord + 0.02 * losses.coord;
    loss_stats_.ema_lattice = 0.98 * loss_stats_.ema_lattice + 0.02 * losses.lattice;
  }
  ++loss_stats_.count;
  return losses;
}

StepLosses Trainer::step() { return train_step(next_batch()); }

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ck;
  ck.params = params_;
  ck.adam_m = adam_m_;
  ck.adam_v = adam_v_;
  ck.schedules = schedules_;
  ck.config = cfg_;
  ck.standardizer = standardizer_;
  ck.step = step_;
  ck.rng_noise_state = rng_noise_.save_state();
  ck.rng_data_state = rng_data_.save_state();
  ck.epoch_order = epoch_order_;
  ck.epoch_cursor = epoch_cursor_;
  ck.loss_stats = loss_stats_;
  return ck;
}

namespace {

Checkpoint run_loop(Trainer& trainer, const TrainSinks& sinks, std::int64_t checkpoint_every) {
  const std::uint64_t target = trainer.planned_steps();
  while (trainer.step_count() < target) {
    const StepLosses losses = trainer.step();
    if (sinks.on_step) sinks.on_step(trainer.step_count(), losses);
    if (sinks.on_checkpoint && checkpoint_every > 0 &&
        trainer.step_count() % static_cast<std::uint64_t>(checkpoint_every) == 0 &&
        trainer.step_count() < target) {
      sinks.on_checkpoint(trainer.to_checkpoint());
    }
  }
  return trainer.to_checkpoint();
}

}  // namespace

Checkpoint train(const TrainConfig& cfg, const std::vector<Crystal>& dataset,
                 const TrainSinks& sinks) {
  Trainer trainer(cfg, dataset);
  return run_loop(trainer, sinks, cfg.checkpoint_every);
}

Checkpoint resume_train(const Checkpoint& ck, const std::vector<Crystal>& dataset,
                        const TrainSinks& sinks) {
  Trainer trainer(ck, dataset);
  return run_loop(trainer, sinks, ck.config.checkpoint_every);
}

}  // namespace crysgen
