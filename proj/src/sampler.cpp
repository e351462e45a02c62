#include "crysgen/sampler.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "crysgen/errors.hpp"

namespace crysgen {

Mat3 RngNoise::lattice_noise() {
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = rng_.normal();
  }
  return m;
}

MatX3 RngNoise::coord_noise(int num_atoms) {
  MatX3 m(num_atoms, 3);
  for (int i = 0; i < num_atoms; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = rng_.normal();
  }
  return m;
}

MatX3 RngNoise::uniform_coords(int num_atoms) {
  MatX3 m(num_atoms, 3);
  for (int i = 0; i < num_atoms; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = rng_.uniform01();
  }
  return m;
}

SamplerModel model_from_checkpoint(const Checkpoint& ck) {
  auto params = std::make_shared<DenoiserParams>(ck.params);
  SamplerModel model;
  model.denoise = [params](const std::vector<int>& types, const MatX3& coords,
                           const Mat3& lattice, int t) {
    return denoiser_forward(*params, types, coords, lattice, t);
  };
  model.schedules = ck.schedules;
  model.standardizer = ck.standardizer;
  return model;
}

SamplerModel zero_model(const DiffusionSchedules& schedules,
                        const LatticeStandardizer& standardizer) {
  SamplerModel model;
  model.denoise = [](const std::vector<int>& types, const MatX3&, const Mat3&, int) {
    DenoiserOutput out;
    out.lattice_noise = Mat3::Zero();
    out.coord_score = MatX3::Zero(static_cast<Eigen::Index>(types.size()), 3);
    return out;
  };
  model.schedules = schedules;
  model.standardizer = standardizer;
  return model;
}

std::vector<int> reverse_time_grid(int tau, int total_steps, int inference_steps) {
  std::vector<int> grid;
  if (tau <= 0) return grid;
  if (tau >= total_steps && inference_steps > 1 && inference_steps < total_steps) {
    const int s = inference_steps;
    int prev = total_steps + 1;
    for (int k = 0; k < s; ++k) {
      const double v = total_steps - static_cast<double>(k) * (total_steps - 1) / (s - 1);
      const int t = std::max(1, static_cast<int>(std::llround(v)));
      if (t < prev) {
        grid.push_back(t);
        prev = t;
      }
    }
    return grid;
  }
  for (int t = tau; t >= 1; --t) grid.push_back(t);
  return grid;
}

Mat3 lower_triangular_gauge(const Mat3& m) {
  // A^T A = M^T M with A lower triangular and positive diagonal; obtained
  // from the Cholesky factor of the exchange-reversed Gram matrix.
  const Mat3 gram = m.transpose() * m;
  Mat3 exchange = Mat3::Zero();
  exchange(0, 2) = exchange(1, 1) = exchange(2, 0) = 1.0;
  const Mat3 reversed = exchange * gram * exchange;
  Eigen::LLT<Mat3> llt(reversed);
  if (llt.info() != Eigen::Success) {
    throw NonFiniteState("final lattice has a non positive-definite gram matrix");
  }
  const Mat3 lower = llt.matrixL();
  return (exchange * lower * exchange).transpose();
}

namespace {

double mean_periodic_shift(const MatX3& a, const MatX3& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < 3; ++j) acc += std::abs(wrap_centered(a(i, j) - b(i, j)));
  }
  return acc / static_cast<double>(a.size());
}

// Algorithm core shared by hybrid and CSP sampling: runs the reverse loop
// over `grid` starting from standardized-domain state (coords, lattice).
struct ChainResult {
  MatX3 coords;
  Mat3 lattice;  // still standardized-domain
  std::vector<TraceEntry> trace;
};

ChainResult run_reverse_chain(const std::vector<int>& atom_types, MatX3 coords, Mat3 lattice,
                              const std::vector<int>& grid, const SamplerModel& model,
                              const SamplerConfig& cfg, NoiseSource& noise, bool record_trace) {
  const auto& sched = model.schedules;
  const int n = static_cast<int>(atom_types.size());
  ChainResult res;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int t = grid[i];
    const int t_next = (i + 1 < grid.size()) ? grid[i + 1] : 0;

    const DenoiserOutput pred = model.denoise(atom_types, coords, lattice, t);

    // Ancestral DDPM update on the lattice; the effective beta collapses
    // skipped steps and reduces to beta_t on the unstrided grid.
    const double ab_t = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_next);
    const double beta_eff = 1.0 - ab_t / ab_prev;
    const double alpha_eff = 1.0 - beta_eff;
    const Mat3 zeta_l = noise.lattice_noise();
    const Mat3 lattice_next =
        (lattice - beta_eff / std::sqrt(1.0 - ab_t) * pred.lattice_noise) /
            std::sqrt(alpha_eff) +
        std::sqrt(beta_eff * (1.0 - ab_prev) / (1.0 - ab_t)) * zeta_l;

    // Predictor on the coordinates. The network predicts the sigma-scaled
    // score, so divide by sigma_t to recover the score estimate.
    const double s_t = sched.sigma(t);
    const double s_next = sched.sigma(t_next);
    const double var_gap = s_t * s_t - s_next * s_next;
    const MatX3 score1 = pred.coord_score / s_t;
    const MatX3 z1 = noise.coord_noise(n);
    const MatX3 coords_half = wrap_fractional(
        coords + var_gap * score1 + (s_next * std::sqrt(var_gap) / s_t) * z1);

    // Corrector at the fresh state.
    const DenoiserOutput pred2 = model.denoise(atom_types, coords_half, lattice_next, t);
    const MatX3 score2 = pred2.coord_score / s_t;
    const double eta = cfg.step_size * s_next / s_t;
    const MatX3 z2 = noise.coord_noise(n);
    const MatX3 coords_next =
        wrap_fractional(coords_half + eta * score2 + std::sqrt(2.0 * eta) * z2);

    if (!coords_next.allFinite() || !lattice_next.allFinite()) {
      throw NonFiniteState("reverse chain diverged at t=" + std::to_string(t));
    }
    if (record_trace) {
      res.trace.push_back({t, mean_periodic_shift(coords_next, coords),
                           (lattice_next - lattice).norm()});
    }
    coords = coords_next;
    lattice = lattice_next;
  }
  res.coords = std::move(coords);
  res.lattice = lattice;
  return res;
}

int resolve_tau(const SamplerConfig& cfg, int total_steps) {
  const int tau = cfg.tau < 0 ? total_steps / 10 : cfg.tau;
  if (tau < 0 || tau > total_steps) {
    throw TauOutOfRange("tau=" + std::to_string(tau) + " with T=" +
                        std::to_string(total_steps));
  }
  if (!(cfg.step_size > 0.0)) throw ValidationError("step_size must be positive");
  return tau;
}

}  // namespace

GeneratedMaterial sample_with_noise(const Proposal& proposal, const SamplerModel& model,
                                    const SamplerConfig& cfg, NoiseSource& noise) {
  const auto check = validate_proposal(proposal);
  if (!check.accepted) throw InvalidProposal(check.reason);
  const int tau = resolve_tau(cfg, model.schedules.total_steps);

  GeneratedMaterial out;
  out.proposal = proposal;
  out.tau_used = tau;
  out.seed = cfg.seed;

  const MatX3 x_start = wrap_fractional(proposal.frac_coords);
  if (tau == 0) {
    // No reverse steps: the proposal passes through untouched.
    out.crystal = Crystal{proposal.atom_types, x_start, proposal.lattice};
    validate_crystal(out.crystal);
    return out;
  }

  const auto grid = reverse_time_grid(tau, model.schedules.total_steps, cfg.inference_steps);
  ChainResult res = run_reverse_chain(proposal.atom_types, x_start,
                                      model.standardizer.standardize(proposal.lattice), grid,
                                      model, cfg, noise, cfg.record_trace);
  const Mat3 lattice = model.standardizer.destandardize(res.lattice);
  if (!(lattice.determinant() > 0.0)) {
    throw NonFiniteState("refined lattice is left-handed or degenerate");
  }
  out.crystal = Crystal{proposal.atom_types, res.coords, lattice};
  out.trace = std::move(res.trace);
  validate_crystal(out.crystal);
  return out;
}

GeneratedMaterial sample(const Proposal& proposal, const SamplerModel& model,
                         const SamplerConfig& cfg) {
  RngNoise noise(cfg.seed);
  return sample_with_noise(proposal, model, cfg, noise);
}

GeneratedMaterial sample_csp_with_noise(const std::vector<int>& atom_types,
                                        const SamplerModel& model, const SamplerConfig& cfg,
                                        NoiseSource& noise) {
  Proposal pure;
  pure.atom_types = atom_types;
  pure.source = "csp";
  pure.prompt = build_prompt_unconditional();
  const int n = static_cast<int>(atom_types.size());
  if (n == 0) throw InvalidProposal("EmptyStructure");
  if (!(cfg.step_size > 0.0)) throw ValidationError("step_size must be positive");

  const int total = model.schedules.total_steps;
  pure.frac_coords = noise.uniform_coords(n);
  pure.lattice = Mat3::Identity();  // placeholder; the chain starts from noise

  const auto check = validate_proposal(pure);
  if (!check.accepted) throw InvalidProposal(check.reason);

  const auto grid = reverse_time_grid(total, total, cfg.inference_steps);
  ChainResult res = run_reverse_chain(atom_types, pure.frac_coords, noise.lattice_noise(),
                                      grid, model, cfg, noise, cfg.record_trace);

  // The denoiser sees the lattice only through its gram matrix, so the chain
  // fixes the shape but not the orthogonal gauge; decode the canonical
  // lower-triangular member (exact when lattice standardization is off).
  const Mat3 lattice = lower_triangular_gauge(model.standardizer.destandardize(res.lattice));

  GeneratedMaterial out;
  out.proposal = pure;
  out.tau_used = total;
  out.seed = cfg.seed;
  out.crystal = Crystal{atom_types, res.coords, lattice};
  out.trace = std::move(res.trace);
  validate_crystal(out.crystal);
  return out;
}

GeneratedMaterial sample_csp(const std::vector<int>& atom_types, const SamplerModel& model,
                             const SamplerConfig& cfg) {
  RngNoise noise(cfg.seed);
  return sample_csp_with_noise(atom_types, model, cfg, noise);
}

BatchResult generate_batch(const Prompt& prompt, int n, const Proposer& proposer,
                           const SamplerModel& model, const SamplerConfig& cfg, int jobs) {
  if (n < 1) throw ValidationError("generate_batch needs n >= 1");
  BatchResult result;
  result.report.requested = n;

  struct Slot {
    bool ok = false;
    GeneratedMaterial material;
    std::string error;
    int attempts = 0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(n));

  auto run_item = [&](int i) {
    Slot& slot = slots[static_cast<std::size_t>(i)];
    const std::uint64_t item_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
    try {
      const Proposal proposal =
          proposer.propose(prompt, mix_seed(item_seed, 0x9350));
      slot.attempts = proposal.attempts_used;
      SamplerConfig item_cfg = cfg;
      item_cfg.seed = mix_seed(item_seed, 0x5A3F);
      slot.material = sample(proposal, model, item_cfg);
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  };

  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) run_item(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_item(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (int i = 0; i < n; ++i) {
    const Slot& slot = slots[static_cast<std::size_t>(i)];
    if (slot.ok) {
      result.materials.push_back(slot.material);
      result.report.proposal_attempts += slot.attempts;
      result.report.proposals_rejected += slot.attempts - 1;
    } else {
      result.report.failures.emplace_back(i, slot.error);
    }
  }
  result.report.generated = static_cast<int>(result.materials.size());
  result.report.failed = n - result.report.generated;
  return result;
}

}  // namespace crysgen
